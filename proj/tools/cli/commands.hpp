#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "prorl/trainer.hpp"

namespace prorl::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kConfigFailure = 1, kRuntimeFailure = 2 };

/// Trains `config` into `out_dir`: config.json, metrics.jsonl (one line per
/// step, flushed as it goes), checkpoint_step<N>.ckpt every checkpoint_every
/// steps and final.ckpt. A `.lock` file guards the directory for the duration.
/// `resume` continues from a trainer checkpoint instead of a fresh state.
RunResult run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                       const std::optional<TrainerState>& resume = std::nullopt, std::ostream* progress = nullptr);

struct TrainOptions {
    std::optional<std::filesystem::path> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> steps;
    std::optional<std::filesystem::path> resume;
    bool quiet = false;
};

/// File values, then PRORL_SEED / PRORL_OUT, then explicit flags.
RunConfig resolve_config(const TrainOptions& options);

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);

/// Prints the resolved config as JSON, ready to edit and pass back to train.
int cmd_config(const TrainOptions& options, std::ostream& out, std::ostream& err);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::vector<std::string> families{"arithmetic"};
    /// Empty means the family's default size.
    std::vector<int> sizes;
    std::size_t samples = 16;
    std::vector<std::size_t> ks{1, 2, 4, 8, 16};
    std::size_t prompts = 50;
    double temperature = 0.6;
    int max_len = 32;
    int modulus = 7;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "eval";
    std::size_t bins = 10;
};

/// Loads either checkpoint kind and returns the current policy.
PolicyParameters load_any_policy(const std::filesystem::path& path);

/// Writes report.jsonl, curves.csv, histogram.csv, bounds.csv and sweep.csv.
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

struct AblationVariant {
    std::string name;
    RunConfig config;
};

/// {symmetric, clip-higher} x {beta 0, beta > 0} x {reset off, interval}.
std::vector<AblationVariant> ablation_variants(const RunConfig& base);

struct AblateOptions {
    TrainOptions train;
    /// Restrict to these variant names; empty runs all eight.
    std::vector<std::string> only;
};

/// One run directory per variant plus summary.csv and kl_trace.csv.
int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err);

} // namespace prorl::cli
