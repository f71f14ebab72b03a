#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace prorl::cli;

namespace {

void add_train_flags(CLI::App& app, TrainOptions& o) {
    app.add_option("-c,--config", o.config_path, "JSON run config (defaults apply when omitted)")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "Master seed; overrides the file and PRORL_SEED");
    app.add_option("--out", o.out_dir, "Output directory; overrides the file and PRORL_OUT");
    app.add_option("--steps", o.steps, "Total training steps");
    app.add_flag("-q,--quiet", o.quiet, "Only print the final line");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prolonged GRPO training on toy reasoning tasks"};
    app.require_subcommand(1);

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train a policy from a config");
    add_train_flags(*train_cmd, train);
    train_cmd->add_option("--resume", train.resume, "Continue from a trainer checkpoint")->check(CLI::ExistingFile);

    TrainOptions shown;
    auto* config_cmd = app.add_subcommand("config", "Print the resolved run config as JSON");
    add_train_flags(*config_cmd, shown);

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "pass@k curves, bounds and difficulty sweeps for a checkpoint");
    eval_cmd->add_option("--ckpt", ev.checkpoint, "Trainer or policy checkpoint")->required();
    eval_cmd->add_option("--families", ev.families, "Task families")->delimiter(',');
    eval_cmd->add_option("--sizes", ev.sizes, "Difficulty sizes (default: family default)")->delimiter(',');
    eval_cmd->add_option("--n", ev.samples, "Samples per prompt");
    eval_cmd->add_option("--ks", ev.ks, "k values for pass@k")->delimiter(',');
    eval_cmd->add_option("--prompts", ev.prompts, "Held-out prompts per size");
    eval_cmd->add_option("--temperature", ev.temperature, "Sampling temperature");
    eval_cmd->add_option("--max-len", ev.max_len, "Maximum response length");
    eval_cmd->add_option("--modulus", ev.modulus, "Arithmetic modulus");
    eval_cmd->add_option("--seed", ev.seed, "Sampling seed");
    eval_cmd->add_option("--out", ev.out_dir, "Output directory");
    eval_cmd->add_option("--bins", ev.bins, "Histogram bins");

    AblateOptions ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the clip / KL / reset ablation grid");
    add_train_flags(*ablate_cmd, ab.train);
    ablate_cmd->add_option("--only", ab.only, "Variant names to run")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigFailure;
    }

    if (*train_cmd) return cmd_train(train, std::cout, std::cerr);
    if (*config_cmd) return cmd_config(shown, std::cout, std::cerr);
    if (*eval_cmd) return cmd_eval(ev, std::cout, std::cerr);
    return cmd_ablate(ab, std::cout, std::cerr);
}
