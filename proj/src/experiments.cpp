#include "mmdg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <stdexcept>

#include "mmdg/baselines.hpp"
#include "mmdg/concentration.hpp"
#include "mmdg/io.hpp"
#include "mmdg/metrics.hpp"
#include "mmdg/parallel.hpp"
#include "mmdg/rng.hpp"

namespace mmdg {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kTagChunk = 0x5EED;
constexpr std::uint64_t kTagRefBuild = 0x4EF;
constexpr std::uint64_t kTagMetricRef = 0x3EF;
constexpr std::uint64_t kTagDirichlet = 0xD1A;
constexpr int kMetricRefSize = 2000;

std::vector<double> to_vec(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

fs::path resolve_out_dir(const ExperimentConfig& cfg, const RunOptions& opts) {
    fs::path dir = opts.out_dir ? *opts.out_dir : cfg.output_dir;
    fs::create_directories(dir);
    return dir;
}

std::vector<std::uint64_t> resolve_seeds(const ExperimentConfig& cfg, const RunOptions& opts) {
    return opts.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : opts.seeds;
}

// Reference mixture weights over the user's component subset.
Eigen::VectorXd reference_weights(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(cfg.user.components.size());
    if (cfg.user.weights) {
        if (cfg.user.weights->size() != n) {
            throw std::invalid_argument("user.weights length must match user.components");
        }
        return *cfg.user.weights / cfg.user.weights->sum();
    }
    if (cfg.user.dirichlet_alpha) {
        if (cfg.user.dirichlet_alpha->size() != n) {
            throw std::invalid_argument("user.dirichlet_alpha length must match user.components");
        }
        std::mt19937_64 rng(mix_key(seed, kTagDirichlet));
        return dirichlet_weights(*cfg.user.dirichlet_alpha, rng);
    }
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

// Per-component sample counts: largest-remainder apportionment of total_n.
std::vector<int> apportion(const Eigen::VectorXd& w, int total_n) {
    const auto K = static_cast<size_t>(w.size());
    std::vector<int> counts(K);
    std::vector<std::pair<double, size_t>> rema(K);
    int assigned = 0;
    for (size_t k = 0; k < K; ++k) {
        const double exact = w[static_cast<Eigen::Index>(k)] * total_n;
        counts[k] = static_cast<int>(std::floor(exact));
        rema[k] = {exact - counts[k], k};
        assigned += counts[k];
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (int i = 0; assigned < total_n; ++i, ++assigned) counts[rema[static_cast<size_t>(i)].second]++;
    return counts;
}

ReferenceSet build_reference_n(const ExperimentConfig& cfg, int total_n, std::uint64_t seed) {
    if (cfg.user.reference_file) {
        Batch b = read_samples_csv(*cfg.user.reference_file);
        ReferenceSet refs;
        refs.data = b.data;
        refs.prompts = b.prompts;
        return refs;
    }
    if (cfg.user.components.empty()) throw std::invalid_argument("user.components is empty");
    const Eigen::VectorXd w = reference_weights(cfg, seed);
    const std::vector<int> counts = apportion(w, total_n);

    std::mt19937_64 rng(mix_key(seed, kTagRefBuild));
    std::normal_distribution<double> gauss(0.0, 1.0);
    ReferenceSet refs;
    refs.data.resize(total_n, cfg.world.dim());
    const bool with_prompts = cfg.world_prompts.has_value();
    if (with_prompts) refs.prompts = Eigen::MatrixXd(total_n, cfg.world_prompts->cols());

    Eigen::Index row = 0;
    for (size_t i = 0; i < cfg.user.components.size(); ++i) {
        const int k = cfg.user.components[i];
        if (k < 0 || k >= cfg.world.components()) {
            throw std::invalid_argument("user component index out of range");
        }
        const double sd = std::sqrt(cfg.world.variances[k] * cfg.user.variance_scale);
        for (int s = 0; s < counts[i]; ++s, ++row) {
            for (Eigen::Index c = 0; c < cfg.world.dim(); ++c) {
                refs.data(row, c) = cfg.world.means(k, c) + sd * gauss(rng);
            }
            if (with_prompts) refs.prompts->row(row) = cfg.world_prompts->row(k);
        }
    }
    return refs;
}

EpsOracle world_denoiser(const GmmSpec& world, const NoiseSchedule& sched) {
    return [&world, &sched](const Eigen::VectorXd& z, int t) {
        return eps_pred(world, z, sched.abar(t));
    };
}

Batch concat(const std::vector<Batch>& parts) {
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.size();
    Batch out(Eigen::MatrixXd(rows, parts.front().dim()));
    if (parts.front().prompts) {
        out.prompts = Eigen::MatrixXd(rows, parts.front().prompts->cols());
    }
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.data.middleRows(at, p.size()) = p.data;
        if (out.prompts) out.prompts->middleRows(at, p.size()) = *p.prompts;
        at += p.size();
    }
    return out;
}

// Mean + stddev aggregation of per-seed metric reports.
nlohmann::json aggregate_reports(const std::vector<MetricsReport>& reports) {
    if (reports.size() == 1) return reports.front().to_json();
    auto stat = [&](auto field) {
        double mean = 0.0;
        for (const auto& r : reports) mean += field(r);
        mean /= static_cast<double>(reports.size());
        double var = 0.0;
        for (const auto& r : reports) var += (field(r) - mean) * (field(r) - mean);
        var /= static_cast<double>(reports.size() - 1);
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    const auto [fd_m, fd_s] = stat([](const MetricsReport& r) { return r.fd; });
    const auto [kd_m, kd_s] = stat([](const MetricsReport& r) { return r.kd; });
    const auto [de_m, de_s] = stat([](const MetricsReport& r) { return r.density; });
    const auto [co_m, co_s] = stat([](const MetricsReport& r) { return r.coverage; });
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& r : reports) per_seed.push_back(r.to_json());
    return {{"mean", {{"fd", fd_m}, {"kd", kd_m}, {"density", de_m}, {"coverage", co_m}}},
            {"stddev", {{"fd", fd_s}, {"kd", kd_s}, {"density", de_s}, {"coverage", co_s}}},
            {"per_seed", per_seed}};
}

std::string kernel_label(const KernelSpec& k) {
    char buf[64];
    switch (k.kind) {
        case KernelKind::Rbf:
            std::snprintf(buf, sizeof(buf), "rbf_s%g", k.sigma);
            return buf;
        case KernelKind::Polynomial:
            std::snprintf(buf, sizeof(buf), "poly_r%d", k.degree);
            return buf;
        case KernelKind::Product:
            return "product";
        default:
            return "prompt";
    }
}

std::vector<double> component_histogram(const Batch& samples, const GmmSpec& world) {
    const auto assign = assign_components(samples, world);
    std::vector<double> hist(static_cast<size_t>(world.components()), 0.0);
    for (int a : assign) hist[static_cast<size_t>(a)] += 1.0;
    for (auto& h : hist) h /= static_cast<double>(samples.size());
    return hist;
}

struct MethodRuns {
    std::map<std::string, std::vector<Batch>> per_method;  // method -> per-seed batches
};

// Runs MMD guidance, the unguided sampler, and any requested baselines for
// every seed.
MethodRuns run_all_methods(const ExperimentConfig& cfg, const NoiseSchedule& sched,
                           const ReferenceSet& refs, const std::vector<std::uint64_t>& seeds,
                           int threads) {
    MethodRuns runs;
    for (std::uint64_t seed : seeds) {
        runs.per_method["mmd"].push_back(
            generate_guided(cfg, sched, refs, cfg.n_generate, seed, threads));
        runs.per_method["unguided"].push_back(
            generate_unguided(cfg, sched, cfg.n_generate, seed, threads));
        for (const auto& b : cfg.baselines) {
            if (b == "none") continue;
            if (b == "cg") {
                Batch neg = runs.per_method["unguided"].back();
                LinearClassifier clf =
                    train_linear_classifier(refs.as_batch(), neg, 300, 0.5);
                runs.per_method["cg"].push_back(cg_guided_sample(
                    world_denoiser(cfg.world, sched), clf, cfg.n_generate, sched,
                    cfg.guidance, cfg.cg_scale, seed));
            } else if (b == "cfg") {
                runs.per_method["cfg"].push_back(cfg_guided_sample(
                    cfg.world, cfg.user.components, cfg.n_generate, sched, cfg.guidance,
                    cfg.cfg_w, seed));
            } else {
                throw std::invalid_argument("unknown baseline: " + b);
            }
        }
    }
    return runs;
}

class PhaseTimer {
public:
    explicit PhaseTimer(RunManifest& m) : manifest_(m) {}
    void mark(const std::string& phase) {
        const auto now = std::chrono::steady_clock::now();
        manifest_.add_timing(phase, std::chrono::duration<double>(now - last_).count());
        last_ = now;
    }

private:
    RunManifest& manifest_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

nlohmann::json UserSpec::to_json() const {
    nlohmann::json j;
    j["components"] = components;
    j["samples_per_component"] = samples_per_component;
    if (weights) j["weights"] = to_vec(*weights);
    if (dirichlet_alpha) j["dirichlet_alpha"] = to_vec(*dirichlet_alpha);
    if (reference_file) j["reference_file"] = *reference_file;
    j["variance_scale"] = variance_scale;
    return j;
}

UserSpec UserSpec::from_json(const nlohmann::json& j) {
    UserSpec u;
    u.components = j.at("components").get<std::vector<int>>();
    u.samples_per_component = j.value("samples_per_component", 50);
    if (u.samples_per_component < 1) throw std::invalid_argument("samples_per_component must be >= 1");
    if (j.contains("weights")) u.weights = from_vec(j.at("weights").get<std::vector<double>>());
    if (j.contains("dirichlet_alpha")) {
        u.dirichlet_alpha = from_vec(j.at("dirichlet_alpha").get<std::vector<double>>());
    }
    if (j.contains("reference_file")) u.reference_file = j.at("reference_file").get<std::string>();
    u.variance_scale = j.value("variance_scale", 1.0);
    if (!(u.variance_scale > 0.0)) throw std::invalid_argument("variance_scale must be positive");
    return u;
}

nlohmann::json ScheduleParams::to_json() const {
    return {{"T", T}, {"beta_start", beta_start}, {"beta_end", beta_end}};
}

ScheduleParams ScheduleParams::from_json(const nlohmann::json& j) {
    ScheduleParams s;
    s.T = j.value("T", 200);
    s.beta_start = j.value("beta_start", 1e-4);
    s.beta_end = j.value("beta_end", 0.02);
    return s;
}

void ExperimentConfig::validate() const {
    world.validate();
    if (world_prompts && world_prompts->rows() != world.components()) {
        throw std::invalid_argument("world prompts must have one row per component");
    }
    if (n_generate < 1) throw std::invalid_argument("n_generate must be >= 1");
    for (const auto& b : baselines) {
        if (b != "none" && b != "cg" && b != "cfg") {
            throw std::invalid_argument("unknown baseline: " + b);
        }
    }
    for (int k : user.components) {
        if (k < 0 || k >= world.components()) {
            throw std::invalid_argument("user component index out of range");
        }
    }
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["world"] = world.to_json();
    if (world_prompts) {
        nlohmann::json p = nlohmann::json::array();
        for (Eigen::Index k = 0; k < world_prompts->rows(); ++k) {
            const Eigen::RowVectorXd r = world_prompts->row(k);  // contiguous copy
            p.push_back(std::vector<double>(r.data(), r.data() + r.size()));
        }
        j["world"]["prompts"] = p;
    }
    j["user"] = user.to_json();
    j["schedule"] = schedule.to_json();
    j["guidance"] = guidance.to_json();
    j["baselines"] = baselines;
    j["cg_scale"] = cg_scale;
    j["cfg_w"] = cfg_w;
    j["n_generate"] = n_generate;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    const auto& wj = j.at("world");
    if (wj.contains("preset")) {
        const std::string preset = wj.at("preset").get<std::string>();
        const double variance = wj.value("variance", 0.0625);
        const int dim = wj.value("dim", 2);
        if (preset == "ring") {
            cfg.world = GmmSpec::ring(wj.value("components", 8), wj.value("radius", 1.5),
                                      variance, dim);
        } else if (preset == "grid") {
            cfg.world = GmmSpec::grid(wj.value("side", 5), wj.value("spacing", 1.0), variance, dim);
        } else {
            throw std::invalid_argument("unknown world preset: " + preset);
        }
    } else {
        cfg.world = GmmSpec::from_json(wj);
    }
    if (wj.contains("prompts")) {
        const PromptedGmm pg = [&] {
            nlohmann::json full = cfg.world.to_json();
            full["prompts"] = wj.at("prompts");
            return PromptedGmm::from_json(full);
        }();
        cfg.world_prompts = pg.prompt_of_component;
    }
    cfg.user = UserSpec::from_json(j.at("user"));
    if (j.contains("schedule")) cfg.schedule = ScheduleParams::from_json(j.at("schedule"));
    if (j.contains("guidance")) cfg.guidance = GuidanceConfig::from_json(j.at("guidance"));
    cfg.baselines = j.value("baselines", std::vector<std::string>{});
    cfg.cg_scale = j.value("cg_scale", 1.0);
    cfg.cfg_w = j.value("cfg_w", 2.0);
    cfg.n_generate = j.value("n_generate", 1000);
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.output_dir = j.value("output_dir", "out");
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    return from_json(read_json(path));
}

ExperimentConfig ExperimentConfig::default_config() {
    ExperimentConfig cfg;
    cfg.world = GmmSpec::ring(8, 1.5, 0.0625, 2);
    cfg.user.components = {0, 1, 2, 3};
    cfg.user.samples_per_component = 50;
    cfg.guidance.kernel = KernelSpec::rbf(1.0);
    cfg.guidance.lambda_schedule = {LambdaKind::Constant, 0.5};
    cfg.guidance.batch_size = 4;
    cfg.n_generate = 1000;
    return cfg;
}

ReferenceSet build_reference(const ExperimentConfig& cfg, std::uint64_t seed) {
    const int total =
        cfg.user.samples_per_component * static_cast<int>(cfg.user.components.size());
    return build_reference_n(cfg, total, seed);
}

GmmSpec user_target(const ExperimentConfig& cfg, std::uint64_t seed) {
    GmmSpec target = restrict_components(cfg.world, cfg.user.components);
    target.weights = reference_weights(cfg, seed);
    target.variances *= cfg.user.variance_scale;
    return target;
}

Batch generate_guided(const ExperimentConfig& cfg, const NoiseSchedule& sched,
                      const ReferenceSet& refs, int n, std::uint64_t seed, int threads) {
    const int B = cfg.guidance.batch_size;
    const int chunks = (n + B - 1) / B;
    std::vector<Batch> parts(static_cast<size_t>(chunks));
    const EpsOracle denoiser = world_denoiser(cfg.world, sched);
    parallel_for(chunks, threads, [&](int c) {
        const int b = std::min(B, n - c * B);
        parts[static_cast<size_t>(c)] = guided_sample(
            denoiser, refs, b, sched, cfg.guidance, mix_key(mix_key(seed, kTagChunk), c));
    });
    return concat(parts);
}

Batch generate_unguided(const ExperimentConfig& cfg, const NoiseSchedule& sched, int n,
                        std::uint64_t seed, int threads) {
    ExperimentConfig off = cfg;
    off.guidance.lambda_schedule.value = 0.0;
    // reference content is irrelevant at lambda = 0, but the loop needs one
    ReferenceSet dummy;
    dummy.data = cfg.world.means;
    return generate_guided(off, sched, dummy, n, seed, threads);
}

int cmd_gmm_match(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    const fs::path dir = resolve_out_dir(cfg, opts);
    const auto seeds = resolve_seeds(cfg, opts);
    RunManifest manifest(cfg.to_json(), seeds.front(), opts.timings);
    PhaseTimer timer(manifest);

    const NoiseSchedule sched =
        make_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    const ReferenceSet refs = build_reference(cfg, cfg.seed);
    timer.mark("setup");

    const MethodRuns runs = run_all_methods(cfg, sched, refs, seeds, opts.threads);
    timer.mark("sample");

    // a fresh draw from the user-restricted mixture anchors the metrics
    std::mt19937_64 metric_rng(mix_key(cfg.seed, kTagMetricRef));
    const Batch metric_ref = sample_gmm(user_target(cfg, cfg.seed), kMetricRefSize, metric_rng);

    nlohmann::json metrics;
    for (const auto& [method, batches] : runs.per_method) {
        std::vector<MetricsReport> reports;
        reports.reserve(batches.size());
        for (const auto& b : batches) reports.push_back(compute_metrics(b, metric_ref));
        metrics["methods"][method] = aggregate_reports(reports);

        const fs::path csv = dir / ("samples_" + method + ".csv");
        write_samples_csv(csv, batches.front());
        manifest.add_file(csv);
    }
    metrics["n_metric_ref"] = kMetricRefSize;
    timer.mark("metrics");

    write_samples_csv(dir / "reference.csv", refs.as_batch());
    manifest.add_file(dir / "reference.csv");
    write_json(dir / "metrics.json", metrics);
    manifest.add_file(dir / "metrics.json");
    write_json(dir / "config.json", cfg.to_json());
    manifest.add_file(dir / "config.json");

    std::vector<ScatterSeries> series;
    const Batch ref_batch = refs.as_batch();
    series.push_back({"reference", "#ff8800", &ref_batch});
    series.push_back({"mmd", "#2266cc", &runs.per_method.at("mmd").front()});
    series.push_back({"unguided", "#999999", &runs.per_method.at("unguided").front()});
    write_scatter_svg(dir / "scatter.svg", series);
    manifest.add_file(dir / "scatter.svg");
    timer.mark("write");

    manifest.add_file(dir / "manifest.json");
    manifest.write(dir / "manifest.json");
    return 0;
}

int cmd_mode_reweight(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    if (!cfg.user.weights && !cfg.user.dirichlet_alpha) {
        throw std::invalid_argument("mode reweighting needs user.weights or user.dirichlet_alpha");
    }
    const fs::path dir = resolve_out_dir(cfg, opts);
    const auto seeds = resolve_seeds(cfg, opts);
    RunManifest manifest(cfg.to_json(), seeds.front(), opts.timings);

    const NoiseSchedule sched =
        make_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    const ReferenceSet refs = build_reference(cfg, cfg.seed);
    const MethodRuns runs = run_all_methods(cfg, sched, refs, seeds, opts.threads);

    nlohmann::json hist;
    hist["components"] = cfg.user.components;
    hist["reference_weights"] = to_vec(reference_weights(cfg, cfg.seed));
    for (const auto& [method, batches] : runs.per_method) {
        // average assignment fractions over seeds
        std::vector<double> acc(static_cast<size_t>(cfg.world.components()), 0.0);
        for (const auto& b : batches) {
            const auto h = component_histogram(b, cfg.world);
            for (size_t k = 0; k < h.size(); ++k) acc[k] += h[k] / batches.size();
        }
        hist["methods"][method] = acc;

        const fs::path csv = dir / ("samples_" + method + ".csv");
        write_samples_csv(csv, batches.front());
        manifest.add_file(csv);
    }

    write_samples_csv(dir / "reference.csv", refs.as_batch());
    manifest.add_file(dir / "reference.csv");
    write_json(dir / "histograms.json", hist);
    manifest.add_file(dir / "histograms.json");
    write_json(dir / "config.json", cfg.to_json());
    manifest.add_file(dir / "config.json");
    manifest.add_file(dir / "manifest.json");
    manifest.write(dir / "manifest.json");
    return 0;
}

int cmd_prompt_match(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    if (!cfg.world_prompts) throw std::invalid_argument("prompt matching needs world prompts");
    if (cfg.guidance.kernel.kind != KernelKind::Product) {
        throw std::invalid_argument("prompt matching needs a product kernel");
    }
    const fs::path dir = resolve_out_dir(cfg, opts);
    const auto seeds = resolve_seeds(cfg, opts);
    RunManifest manifest(cfg.to_json(), seeds.front(), opts.timings);

    const NoiseSchedule sched =
        make_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    const ReferenceSet refs = build_reference(cfg, cfg.seed);
    const Eigen::MatrixXd& prompts = *cfg.world_prompts;

    // conditional oracle: condition on every component whose prompt matches
    const CondEpsOracle denoiser = [&cfg, &sched, &prompts](const Eigen::VectorXd& z, int t,
                                                            const Eigen::VectorXd& p) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < prompts.rows(); ++k) {
            best = std::min(best, (prompts.row(k).transpose() - p).norm());
        }
        std::vector<int> match;
        for (Eigen::Index k = 0; k < prompts.rows(); ++k) {
            if ((prompts.row(k).transpose() - p).norm() <= best + 1e-12) {
                match.push_back(static_cast<int>(k));
            }
        }
        return conditional_eps_pred(cfg.world, z, sched.abar(t), match);
    };

    // queried prompts cycle through the user's components
    auto prompt_of_row = [&](int row) {
        const int k = cfg.user.components[static_cast<size_t>(row) % cfg.user.components.size()];
        return prompts.row(k);
    };

    auto generate = [&](const GuidanceConfig& gcfg, std::uint64_t seed) {
        const int B = gcfg.batch_size;
        const int chunks = (cfg.n_generate + B - 1) / B;
        std::vector<Batch> parts(static_cast<size_t>(chunks));
        parallel_for(chunks, opts.threads, [&](int c) {
            const int b = std::min(B, cfg.n_generate - c * B);
            Eigen::MatrixXd chunk_prompts(b, prompts.cols());
            for (int i = 0; i < b; ++i) chunk_prompts.row(i) = prompt_of_row(c * B + i);
            parts[static_cast<size_t>(c)] =
                prompt_guided_sample(denoiser, refs, chunk_prompts, sched, gcfg,
                                     mix_key(mix_key(seed, kTagChunk), c));
        });
        return concat(parts);
    };

    GuidanceConfig off = cfg.guidance;
    off.lambda_schedule.value = 0.0;

    nlohmann::json report;
    report["components"] = cfg.user.components;
    const GmmSpec target = user_target(cfg, cfg.seed);
    report["reference_variances"] = to_vec(target.variances);

    for (std::uint64_t seed : seeds) {
        const Batch guided = generate(cfg.guidance, seed);
        const Batch unguided = generate(off, seed);
        nlohmann::json per_seed;
        for (const auto* pair : {&guided, &unguided}) {
            const bool is_guided = pair == &guided;
            const auto assign = assign_components(*pair, cfg.world);
            nlohmann::json prompts_j = nlohmann::json::object();
            nlohmann::json vars_j = nlohmann::json::object();
            for (size_t u = 0; u < cfg.user.components.size(); ++u) {
                const int k = cfg.user.components[u];
                // histogram of assigned components among rows queried with prompt k
                std::vector<double> h(static_cast<size_t>(cfg.world.components()), 0.0);
                int n_rows = 0;
                for (Eigen::Index i = 0; i < pair->size(); ++i) {
                    if (static_cast<size_t>(i) % cfg.user.components.size() != u) continue;
                    h[static_cast<size_t>(assign[static_cast<size_t>(i)])] += 1.0;
                    ++n_rows;
                }
                for (auto& x : h) x /= std::max(n_rows, 1);
                prompts_j[std::to_string(k)] = h;

                // pooled per-dimension variance of samples assigned to k
                std::vector<Eigen::Index> rows;
                for (Eigen::Index i = 0; i < pair->size(); ++i) {
                    if (assign[static_cast<size_t>(i)] == k) rows.push_back(i);
                }
                double var = 0.0;
                if (rows.size() > 1) {
                    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), pair->dim());
                    for (size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = pair->data.row(rows[r]);
                    const Eigen::RowVectorXd mu = sub.colwise().mean();
                    var = (sub.rowwise() - mu).squaredNorm() /
                          (static_cast<double>(rows.size() - 1) * static_cast<double>(pair->dim()));
                }
                vars_j[std::to_string(k)] = var;
            }
            per_seed[is_guided ? "mmd" : "unguided"] = {{"histograms", prompts_j},
                                                        {"variances", vars_j}};
        }
        report["per_seed"].push_back(per_seed);

        if (seed == seeds.front()) {
            write_samples_csv(dir / "samples_mmd.csv", guided);
            manifest.add_file(dir / "samples_mmd.csv");
            write_samples_csv(dir / "samples_unguided.csv", unguided);
            manifest.add_file(dir / "samples_unguided.csv");
        }
    }

    write_samples_csv(dir / "reference.csv", refs.as_batch());
    manifest.add_file(dir / "reference.csv");
    write_json(dir / "prompt_match.json", report);
    manifest.add_file(dir / "prompt_match.json");
    write_json(dir / "config.json", cfg.to_json());
    manifest.add_file(dir / "config.json");
    manifest.add_file(dir / "manifest.json");
    manifest.write(dir / "manifest.json");
    return 0;
}

int cmd_ref_sweep(const ExperimentConfig& cfg, const std::vector<int>& counts,
                  const RunOptions& opts) {
    cfg.validate();
    if (counts.empty()) throw std::invalid_argument("ref sweep needs at least one count");
    const fs::path dir = resolve_out_dir(cfg, opts);
    const auto seeds = resolve_seeds(cfg, opts);
    RunManifest manifest(cfg.to_json(), seeds.front(), opts.timings);

    const NoiseSchedule sched =
        make_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    std::mt19937_64 metric_rng(mix_key(cfg.seed, kTagMetricRef));
    const Batch metric_ref = sample_gmm(user_target(cfg, cfg.seed), kMetricRefSize, metric_rng);

    std::ofstream csv(dir / "ref_sweep.csv");
    if (!csv) throw std::runtime_error("cannot open ref_sweep.csv");
    csv << "n,fd,kd,density,coverage\n";
    for (int n : counts) {
        if (n < 0) throw std::invalid_argument("reference count must be >= 0");
        std::vector<MetricsReport> reports;
        for (std::uint64_t seed : seeds) {
            Batch gen = n == 0 ? generate_unguided(cfg, sched, cfg.n_generate, seed, opts.threads)
                               : generate_guided(cfg, sched, build_reference_n(cfg, n, cfg.seed),
                                                 cfg.n_generate, seed, opts.threads);
            reports.push_back(compute_metrics(gen, metric_ref));
        }
        double fd = 0.0, kd = 0.0, de = 0.0, co = 0.0;
        for (const auto& r : reports) {
            fd += r.fd / reports.size();
            kd += r.kd / reports.size();
            de += r.density / reports.size();
            co += r.coverage / reports.size();
        }
        csv << n << "," << format_double(fd) << "," << format_double(kd) << ","
            << format_double(de) << "," << format_double(co) << "\n";
    }
    csv.close();
    manifest.add_file(dir / "ref_sweep.csv");
    write_json(dir / "config.json", cfg.to_json());
    manifest.add_file(dir / "config.json");
    manifest.add_file(dir / "manifest.json");
    manifest.write(dir / "manifest.json");
    return 0;
}

int cmd_ablation(const ExperimentConfig& cfg, const std::vector<KernelSpec>& kernels,
                 const std::vector<double>& lambdas, const RunOptions& opts) {
    cfg.validate();
    if (kernels.empty() || lambdas.empty()) throw std::invalid_argument("ablation grids are empty");
    const fs::path dir = resolve_out_dir(cfg, opts);
    const auto seeds = resolve_seeds(cfg, opts);
    RunManifest manifest(cfg.to_json(), seeds.front(), opts.timings);

    const NoiseSchedule sched =
        make_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    const ReferenceSet refs = build_reference(cfg, cfg.seed);
    std::mt19937_64 metric_rng(mix_key(cfg.seed, kTagMetricRef));
    const Batch metric_ref = sample_gmm(user_target(cfg, cfg.seed), kMetricRefSize, metric_rng);

    struct Row {
        std::string kernel;
        double lambda, fd, kd;
        bool best = false;
    };
    std::vector<Row> rows;
    for (const auto& kernel : kernels) {
        size_t best_idx = rows.size();
        double best_fd = std::numeric_limits<double>::infinity();
        for (double lambda : lambdas) {
            if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
            ExperimentConfig run = cfg;
            run.guidance.kernel = kernel;
            run.guidance.lambda_schedule.value = lambda;
            double fd = 0.0, kd = 0.0;
            for (std::uint64_t seed : seeds) {
                ReferenceSet local;
                local.data = refs.data;
                local.prompts = refs.prompts;
                const Batch gen =
                    generate_guided(run, sched, local, cfg.n_generate, seed, opts.threads);
                const MetricsReport r = compute_metrics(gen, metric_ref);
                fd += r.fd / seeds.size();
                kd += r.kd / seeds.size();
            }
            if (fd < best_fd) {
                best_fd = fd;
                best_idx = rows.size();
            }
            rows.push_back({kernel_label(kernel), lambda, fd, kd});
        }
        rows[best_idx].best = true;
    }

    std::ofstream csv(dir / "ablation.csv");
    if (!csv) throw std::runtime_error("cannot open ablation.csv");
    csv << "kernel,lambda,fd,kd,best\n";
    for (const auto& r : rows) {
        csv << r.kernel << "," << format_double(r.lambda) << "," << format_double(r.fd) << ","
            << format_double(r.kd) << "," << (r.best ? 1 : 0) << "\n";
    }
    csv.close();
    manifest.add_file(dir / "ablation.csv");
    write_json(dir / "config.json", cfg.to_json());
    manifest.add_file(dir / "config.json");
    manifest.add_file(dir / "manifest.json");
    manifest.write(dir / "manifest.json");
    return 0;
}

int cmd_concentration(const nlohmann::json& grid_cfg, const RunOptions& opts) {
    const auto sigmas = grid_cfg.value("sigmas", std::vector<double>{0.5, 1.0, 2.0});
    const auto n_refs = grid_cfg.value("n_refs", std::vector<int>{25, 100, 400});
    const auto deltas = grid_cfg.value("deltas", std::vector<double>{0.05, 0.2});
    const auto dims = grid_cfg.value("dims", std::vector<int>{2, 10, 50});
    const int trials = grid_cfg.value("trials", 1000);
    const double bound_scale = grid_cfg.value("bound_scale", 1.0);
    const std::uint64_t seed = grid_cfg.value("seed", std::uint64_t{7});
    if (trials < 100) throw std::invalid_argument("concentration check needs trials >= 100");

    fs::path dir = opts.out_dir ? fs::path(*opts.out_dir) : fs::path("out");
    fs::create_directories(dir);

    const auto rows = run_concentration_grid(sigmas, n_refs, deltas, dims, trials, seed);

    bool all_pass = true;
    std::ofstream csv(dir / "concentration.csv");
    if (!csv) throw std::runtime_error("cannot open concentration.csv");
    csv << "sigma,n_ref,delta,dim,quantile,bound,pass\n";
    for (auto row : rows) {
        row.bound *= bound_scale;
        row.pass = row.quantile <= row.bound;
        all_pass = all_pass && row.pass;
        csv << format_double(row.sigma) << "," << row.n_ref << "," << format_double(row.delta)
            << "," << row.dim << "," << format_double(row.quantile) << ","
            << format_double(row.bound) << "," << (row.pass ? 1 : 0) << "\n";
    }
    csv.close();

    RunManifest manifest(grid_cfg, seed, opts.timings);
    manifest.add_file(dir / "concentration.csv");
    manifest.add_file(dir / "manifest.json");
    manifest.write(dir / "manifest.json");
    return all_pass ? 0 : 2;
}

int cmd_metrics(const std::filesystem::path& file_a, const std::filesystem::path& file_b, int k) {
    const Batch a = read_samples_csv(file_a);
    const Batch b = read_samples_csv(file_b);
    if (a.dim() != b.dim()) throw std::invalid_argument("batch dimension mismatch");
    const MetricsReport report = compute_metrics(a, b, k);
    std::cout << report.to_json().dump(2) << std::endl;
    return 0;
}

}  // namespace mmdg
