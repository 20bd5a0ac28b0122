// difflab: command-line driver wiring the counter-machine interpreter, the
// groove compiler, the pinball SDE engine, the exact-score diffusion sampler
// and the threshold-circuit kit into config-driven experiments.

#include "difflab/experiment.hpp"
#include "difflab/kernels.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonArgs {
    std::string config;
    difflab::experiment::CliOverrides overrides;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> trials;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "experiment config file (JSON)")
        ->required();
    cmd->add_option("--seed", args.seed, "override the master seed");
    cmd->add_option("--out", args.out, "override the output directory");
    cmd->add_option("--trials", args.trials, "override the trial/sample count");
    cmd->add_flag("--dry-run", args.overrides.dry_run,
                  "validate and describe the run without simulating");
    cmd->add_flag("--quiet", args.overrides.quiet, "suppress the one-line summary");
}

int dispatch(const CommonArgs& args, const std::string& kind) {
    difflab::experiment::CliOverrides ov = args.overrides;
    ov.seed = args.seed;
    ov.out_dir = args.out;
    ov.trials = args.trials;
    try {
        return difflab::experiment::run_experiment_file(args.config, kind, ov);
    } catch (const difflab::experiment::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"difflab: counter-machine pinball SDEs and exact-score diffusion sampling"};
    app.require_subcommand(1);

    std::string backend;
    app.add_option("--kernels", backend, "force a kernel backend (scalar|avx2)");

    struct Leaf {
        CLI::App* cmd;
        CommonArgs args;
        std::string kind;
    };
    std::vector<std::unique_ptr<Leaf>> leaves;
    auto add_leaf = [&](CLI::App* parent, const char* name, const char* desc,
                        const char* kind) {
        auto leaf = std::make_unique<Leaf>();
        leaf->cmd = parent->add_subcommand(name, desc);
        leaf->kind = kind;
        add_common(leaf->cmd, leaf->args);
        leaves.push_back(std::move(leaf));
    };

    CLI::App* cm = app.add_subcommand("cm", "counter-machine interpreter");
    cm->require_subcommand(1);
    add_leaf(cm, "run", "run a program on an input word", "cm-run");

    CLI::App* pinball = app.add_subcommand("pinball", "groove-compiled SDE simulation");
    pinball->require_subcommand(1);
    add_leaf(pinball, "simulate", "simulate pinball trials for one program/input", "pinball");
    add_leaf(pinball, "leakage", "success rate across cell sizes", "leakage");

    CLI::App* diffusion = app.add_subcommand("diffusion", "exact-score diffusion sampling");
    diffusion->require_subcommand(1);
    add_leaf(diffusion, "converge", "TV against ground truth across step counts", "converge");
    add_leaf(diffusion, "prefix", "constant-probability-bound evaluation", "prefix");
    add_leaf(diffusion, "derandomize", "majority-vote advice-seed search", "derandomize");

    CLI::App* circuit = app.add_subcommand("circuit", "threshold circuits");
    circuit->require_subcommand(1);
    add_leaf(circuit, "eval", "evaluate a circuit on a bit string", "circuit");

    CLI11_PARSE(app, argc, argv);

    if (!backend.empty()) {
        try {
            if (backend == "scalar")
                difflab::kernels::set_backend(difflab::kernels::Backend::scalar);
            else if (backend == "avx2")
                difflab::kernels::set_backend(difflab::kernels::Backend::avx2);
            else {
                std::cerr << "config error: unknown kernel backend '" << backend << "'\n";
                return 2;
            }
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        }
    }

    for (const auto& leaf : leaves)
        if (leaf->cmd->parsed()) return dispatch(leaf->args, leaf->kind);
    return 2;
}
