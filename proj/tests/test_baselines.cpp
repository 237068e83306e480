#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "mmdg/baselines.hpp"
#include "mmdg/diffusion.hpp"
#include "mmdg/gmm.hpp"

using namespace mmdg;

namespace {

GmmSpec ring_world() { return GmmSpec::ring(8, 1.5, 0.0625, 2); }

EpsOracle oracle(const GmmSpec& world, const NoiseSchedule& sched) {
    return [&world, &sched](const Eigen::VectorXd& z, int t) {
        return eps_pred(world, z, sched.abar(t));
    };
}

Eigen::MatrixXd randn(std::mt19937_64& rng, int n, int d, double shift) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) m(i, c) = g(rng) + (c == 0 ? shift : 0.0);
    }
    return m;
}

}  // namespace

TEST_CASE("logistic regression separates shifted gaussians") {
    std::mt19937_64 rng(1);
    const Batch pos(randn(rng, 200, 2, 2.0));
    const Batch neg(randn(rng, 200, 2, -2.0));
    std::vector<double> loss;
    const LinearClassifier clf = train_linear_classifier(pos, neg, 400, 1.0, &loss);
    CHECK(loss.size() == 400);
    CHECK(loss.back() < loss.front());
    // the separating direction is the first coordinate
    CHECK(clf.weights[0] > 0.0);
    int correct = 0;
    for (Eigen::Index i = 0; i < pos.size(); ++i) correct += clf.prob(pos.data.row(i)) > 0.5;
    for (Eigen::Index i = 0; i < neg.size(); ++i) correct += clf.prob(neg.data.row(i)) < 0.5;
    CHECK(correct >= 380);
}

TEST_CASE("classifier log-prob gradient matches finite differences") {
    std::mt19937_64 rng(2);
    LinearClassifier clf;
    clf.weights = Eigen::Vector3d(0.7, -1.2, 0.4);
    clf.bias = 0.3;
    std::normal_distribution<double> g;
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd x(3);
        for (int c = 0; c < 3; ++c) x[c] = g(rng);
        const Eigen::VectorXd grad = clf.grad_log_prob(x);
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            const double fd = (std::log(clf.prob(xp)) - std::log(clf.prob(xm))) / (2.0 * h);
            CHECK(grad[c] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("classifier guidance at zero scale reduces to the unguided sampler bitwise") {
    const GmmSpec world = ring_world();
    const NoiseSchedule sched = make_linear_schedule(30, 1e-4, 0.02);
    GuidanceConfig cfg;
    cfg.lambda_schedule.value = 0.0;
    LinearClassifier clf;
    clf.weights = Eigen::Vector2d(1.0, -1.0);

    const EpsOracle den = oracle(world, sched);
    ReferenceSet dummy(world.means);
    const Batch unguided = guided_sample(den, dummy, 6, sched, cfg, 9);
    const Batch cg = cg_guided_sample(den, clf, 6, sched, cfg, 0.0, 9);
    CHECK((cg.data.array() == unguided.data.array()).all());
}

TEST_CASE("classifier-free guidance at w=0 reduces to the unguided sampler bitwise") {
    const GmmSpec world = ring_world();
    const NoiseSchedule sched = make_linear_schedule(30, 1e-4, 0.02);
    GuidanceConfig cfg;
    cfg.lambda_schedule.value = 0.0;
    ReferenceSet dummy(world.means);
    const Batch unguided = guided_sample(oracle(world, sched), dummy, 6, sched, cfg, 21);
    const Batch cfg0 = cfg_guided_sample(world, {0, 1}, 6, sched, cfg, 0.0, 21);
    CHECK((cfg0.data.array() == unguided.data.array()).all());
}

TEST_CASE("cfg at w=1 samples the conditional mixture") {
    const GmmSpec world = ring_world();
    const NoiseSchedule sched = make_linear_schedule(100, 1e-4, 0.02);
    GuidanceConfig cfg;
    cfg.lambda_schedule.value = 0.0;
    const std::vector<int> user = {3};
    const Batch b = cfg_guided_sample(world, user, 200, sched, cfg, 1.0, 4);
    const auto assign = assign_components(b, world);
    int hits = 0;
    for (int a : assign) hits += a == 3;
    CHECK(hits >= 190);  // essentially all mass on the conditioned mode
}

TEST_CASE("cfg improves the user-component rate and w=3 over-concentrates") {
    const GmmSpec world = ring_world();
    const NoiseSchedule sched = make_linear_schedule(100, 1e-4, 0.02);
    GuidanceConfig cfg;
    cfg.lambda_schedule.value = 0.0;
    const std::vector<int> user = {5};

    auto rate = [&](const Batch& b) {
        const auto assign = assign_components(b, world);
        double r = 0.0;
        for (int a : assign) r += a == 5;
        return r / static_cast<double>(assign.size());
    };
    const Batch w0 = cfg_guided_sample(world, user, 300, sched, cfg, 0.0, 8);
    const Batch w1 = cfg_guided_sample(world, user, 300, sched, cfg, 1.0, 8);
    CHECK(rate(w1) > rate(w0));

    auto mode_var = [&](const Batch& b) {
        const auto assign = assign_components(b, world);
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            if (assign[static_cast<size_t>(i)] == 5) rows.push_back(i);
        }
        REQUIRE(rows.size() > 10);
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), b.dim());
        for (size_t r = 0; r < rows.size(); ++r) {
            sub.row(static_cast<Eigen::Index>(r)) = b.data.row(rows[r]);
        }
        const Eigen::RowVectorXd mu = sub.colwise().mean();
        return (sub.rowwise() - mu).squaredNorm() /
               (static_cast<double>(rows.size() - 1) * static_cast<double>(b.dim()));
    };
    const Batch w3 = cfg_guided_sample(world, user, 300, sched, cfg, 3.0, 8);
    CHECK(mode_var(w3) < mode_var(w1));
}

TEST_CASE("classifier guidance pulls samples toward the positive class") {
    const GmmSpec world = ring_world();
    const NoiseSchedule sched = make_linear_schedule(100, 1e-4, 0.02);
    GuidanceConfig cfg;
    cfg.lambda_schedule.value = 0.0;
    const EpsOracle den = oracle(world, sched);

    // positives: samples near component 0; negatives: a generic unguided draw
    std::mt19937_64 rng(6);
    GmmSpec only0 = restrict_components(world, {0});
    const Batch pos = sample_gmm(only0, 150, rng);
    const Batch neg = guided_sample(den, ReferenceSet(world.means), 150, sched, cfg, 31);
    const LinearClassifier clf = train_linear_classifier(pos, neg, 400, 1.0);

    auto rate = [&](const Batch& b) {
        const auto assign = assign_components(b, world);
        double r = 0.0;
        for (int a : assign) r += a == 0;
        return r / static_cast<double>(assign.size());
    };
    const Batch base = guided_sample(den, ReferenceSet(world.means), 300, sched, cfg, 12);
    const Batch steered = cg_guided_sample(den, clf, 300, sched, cfg, 0.05, 12);
    CHECK(rate(steered) > rate(base));
}

TEST_CASE("input validation") {
    const NoiseSchedule sched = make_linear_schedule(5, 1e-4, 0.02);
    GuidanceConfig cfg;
    LinearClassifier clf;  // untrained: empty weights
    CHECK_THROWS_AS(cg_guided_sample([](const Eigen::VectorXd& z, int) { return z; }, clf, 4,
                                     sched, cfg, 1.0, 1),
                    std::invalid_argument);
    const Batch empty_pos{Eigen::MatrixXd(0, 2)};
    const Batch neg{Eigen::MatrixXd::Zero(3, 2)};
    CHECK_THROWS_AS(train_linear_classifier(empty_pos, neg, 10, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(train_linear_classifier(neg, neg, 10, -0.1), std::invalid_argument);
}
