#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmdg/experiments.hpp"
#include "mmdg/io.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::uint64_t> seeds;
    std::optional<std::string> out_dir;
    int threads = 1;
    bool timings = false;
};

void add_common(CLI::App* cmd, GlobalArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config JSON");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--seeds", args.seeds, "run every seed and report mean/stddev");
    cmd->add_option("--out-dir", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--threads", args.threads, "worker thread cap")->check(CLI::PositiveNumber);
    cmd->add_flag("--timings", args.timings, "record wall-clock phases in the manifest");
}

mmdg::ExperimentConfig load_config(const GlobalArgs& args) {
    mmdg::ExperimentConfig cfg = args.config_path.empty()
                                     ? mmdg::ExperimentConfig::default_config()
                                     : mmdg::ExperimentConfig::load(args.config_path);
    if (args.seed) cfg.seed = *args.seed;
    return cfg;
}

mmdg::RunOptions run_options(const GlobalArgs& args) {
    mmdg::RunOptions opts;
    opts.seeds = args.seeds;
    opts.out_dir = args.out_dir;
    opts.threads = args.threads;
    opts.timings = args.timings;
    return opts;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MMD-guided diffusion sampling on Gaussian-mixture worlds"};
    app.require_subcommand(1);

    GlobalArgs args;

    auto* gmm_match = app.add_subcommand("gmm-match", "match a component-subset reference set");
    add_common(gmm_match, args);

    auto* mode_reweight =
        app.add_subcommand("mode-reweight", "match skewed mixture weights on a component subset");
    add_common(mode_reweight, args);

    auto* prompt_match =
        app.add_subcommand("prompt-match", "prompt-conditioned matching with a product kernel");
    add_common(prompt_match, args);

    std::vector<int> counts{0, 5, 25, 50, 100, 150};
    auto* ref_sweep = app.add_subcommand("ref-sweep", "metrics vs reference-set size");
    add_common(ref_sweep, args);
    ref_sweep->add_option("--counts", counts, "reference counts to sweep");

    std::vector<double> lambdas{0.0, 0.1, 0.5, 1.0, 5.0};
    std::vector<double> sigmas{0.5, 1.0, 2.0};
    auto* ablation = app.add_subcommand("ablation", "kernel x guidance-scale grid");
    add_common(ablation, args);
    ablation->add_option("--lambdas", lambdas, "guidance scales");
    ablation->add_option("--sigmas", sigmas, "rbf bandwidths");

    auto* concentration =
        app.add_subcommand("concentration-check", "verify the cross-term deviation bounds");
    add_common(concentration, args);

    std::string file_a, file_b;
    int knn_k = 5;
    auto* metrics = app.add_subcommand("metrics", "compare two samples.csv files");
    metrics->add_option("file_a", file_a, "first samples.csv")->required();
    metrics->add_option("file_b", file_b, "second samples.csv")->required();
    metrics->add_option("--k", knn_k, "k-NN neighborhood size")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gmm_match->parsed()) {
            return mmdg::cmd_gmm_match(load_config(args), run_options(args));
        }
        if (mode_reweight->parsed()) {
            return mmdg::cmd_mode_reweight(load_config(args), run_options(args));
        }
        if (prompt_match->parsed()) {
            return mmdg::cmd_prompt_match(load_config(args), run_options(args));
        }
        if (ref_sweep->parsed()) {
            return mmdg::cmd_ref_sweep(load_config(args), counts, run_options(args));
        }
        if (ablation->parsed()) {
            std::vector<mmdg::KernelSpec> kernels;
            kernels.reserve(sigmas.size());
            for (double s : sigmas) kernels.push_back(mmdg::KernelSpec::rbf(s));
            return mmdg::cmd_ablation(load_config(args), kernels, lambdas, run_options(args));
        }
        if (concentration->parsed()) {
            nlohmann::json grid = nlohmann::json::object();
            if (!args.config_path.empty()) grid = mmdg::read_json(args.config_path);
            if (args.seed) grid["seed"] = *args.seed;
            return mmdg::cmd_concentration(grid, run_options(args));
        }
        if (metrics->parsed()) {
            return mmdg::cmd_metrics(file_a, file_b, knn_k);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
