#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mmdg/experiments.hpp"
#include "mmdg/io.hpp"

using namespace mmdg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mmdg_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Eigen::MatrixXd randn(std::mt19937_64& rng, int n, int d) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) m(i, c) = g(rng);
    }
    return m;
}

}  // namespace

TEST_CASE("samples csv round trip is lossless") {
    TempDir tmp;
    std::mt19937_64 rng(1);
    Batch b(randn(rng, 23, 3));
    b.data(0, 0) = 1.0 / 3.0;
    b.data(1, 1) = 1e-300;
    b.data(2, 2) = -123456.789012345678;
    const fs::path p = tmp.path / "samples.csv";
    write_samples_csv(p, b);
    const Batch back = read_samples_csv(p);
    CHECK(back.size() == b.size());
    CHECK((back.data.array() == b.data.array()).all());  // 17 sig digits round-trip exactly
    CHECK(!back.prompts.has_value());

    // header names
    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == "z0,z1,z2");
}

TEST_CASE("samples csv with prompts") {
    TempDir tmp;
    std::mt19937_64 rng(2);
    const Batch b(randn(rng, 8, 2), randn(rng, 8, 4));
    const fs::path p = tmp.path / "samples.csv";
    write_samples_csv(p, b);
    const Batch back = read_samples_csv(p);
    REQUIRE(back.prompts.has_value());
    CHECK((back.data.array() == b.data.array()).all());
    CHECK((back.prompts->array() == b.prompts->array()).all());

    std::ifstream in(p);
    std::string header;
    std::getline(in, header);
    CHECK(header == "z0,z1,p0,p1,p2,p3");
}

TEST_CASE("csv parse errors") {
    TempDir tmp;
    const fs::path p = tmp.path / "bad.csv";
    {
        std::ofstream out(p);
        out << "z0,z1\n1.0,2.0\n3.0\n";
    }
    CHECK_THROWS(read_samples_csv(p));
    {
        std::ofstream out(p);
        out << "z0,z1\n1.0,abc\n";
    }
    CHECK_THROWS(read_samples_csv(p));
    {
        std::ofstream out(p);
        out << "q0,q1\n1.0,2.0\n";
    }
    CHECK_THROWS(read_samples_csv(p));
    CHECK_THROWS(read_samples_csv(tmp.path / "missing.csv"));
}

TEST_CASE("scatter svg") {
    TempDir tmp;
    std::mt19937_64 rng(3);
    const Batch a(randn(rng, 30, 2));
    const Batch b(randn(rng, 30, 2));
    const fs::path p = tmp.path / "scatter.svg";
    write_scatter_svg(p, {{"ref", "#ff8800", &a}, {"gen", "#2266cc", &b}});
    std::ifstream in(p);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(all.find("<svg") != std::string::npos);
    CHECK(all.find("circle") != std::string::npos);
    CHECK(all.find("ref") != std::string::npos);
}

TEST_CASE("run manifest") {
    TempDir tmp;
    RunManifest m(nlohmann::json{{"a", 1}}, 42, false);
    m.add_file(tmp.path / "x.csv");
    m.add_file(tmp.path / "y.json");
    m.add_timing("phase", 1.0);  // ignored without --timings
    m.write(tmp.path / "manifest.json");
    const nlohmann::json j = read_json(tmp.path / "manifest.json");
    CHECK(j.at("seed") == 42);
    CHECK(j.at("files").size() == 2);
    CHECK(j.at("files")[0] == "x.csv");
    CHECK(!j.contains("timings"));

    RunManifest t(nlohmann::json{{"a", 1}}, 42, true);
    t.add_timing("phase", 1.5);
    t.write(tmp.path / "manifest2.json");
    CHECK(read_json(tmp.path / "manifest2.json").at("timings").at("phase") == 1.5);
}

TEST_CASE("experiment config round trip") {
    ExperimentConfig cfg = ExperimentConfig::default_config();
    cfg.baselines = {"cg", "cfg"};
    cfg.user.weights = Eigen::Vector4d(0.4, 0.3, 0.2, 0.1);
    cfg.user.variance_scale = 0.5;
    cfg.seed = 99;
    const nlohmann::json j = cfg.to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(j);
    CHECK(back.to_json() == j);

    // prompted world round trip
    ExperimentConfig pc = ExperimentConfig::default_config();
    pc.world_prompts = Eigen::MatrixXd::Identity(8, 8);
    const ExperimentConfig pback = ExperimentConfig::from_json(pc.to_json());
    CHECK(pback.to_json() == pc.to_json());
    REQUIRE(pback.world_prompts.has_value());
    CHECK((pback.world_prompts->array() == pc.world_prompts->array()).all());
}

TEST_CASE("experiment config presets and validation") {
    nlohmann::json j = {
        {"world", {{"preset", "ring"}, {"components", 4}, {"radius", 2.0}, {"variance", 0.1}}},
        {"user", {{"components", {0, 1}}}},
    };
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);
    CHECK(cfg.world.components() == 4);
    CHECK(cfg.world.means.row(0).norm() == doctest::Approx(2.0));

    j["user"]["components"] = {0, 9};
    CHECK_THROWS(ExperimentConfig::from_json(j));
    j["user"]["components"] = {0, 1};
    j["world"]["preset"] = "bogus";
    CHECK_THROWS(ExperimentConfig::from_json(j));
    j["world"]["preset"] = "ring";
    j["baselines"] = {"nope"};
    CHECK_THROWS(ExperimentConfig::from_json(j));
}

TEST_CASE("format double") {
    CHECK(format_double(0.5) == "0.5");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
