#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prorl/error.hpp"
#include "prorl/optimizer.hpp"
#include "prorl/policy.hpp"
#include "prorl/trainer.hpp"

namespace prorl::cli {

/// Extra knobs used only by the ablation grid: the penalty weight of the
/// "beta > 0" arm and the interval of the "reset on" arm.
struct AblationSettings {
    double beta = 0.02;
    std::uint64_t reset_interval = 500;

    friend bool operator==(const AblationSettings&, const AblationSettings&) = default;
};

/// Everything a run needs. Parsed from one JSON file; every key is optional
/// and falls back to the value below.
///
///   {
///     "seed": 1, "out_dir": "runs/default", "total_steps": 3000,
///     "checkpoint_every": 1000, "init_std": 0.3,
///     "model":      {"vocab_size", "embed_dim", "hidden_dim", "window"},
///     "optimizer":  {"lr", "beta1", "beta2", "eps", "weight_decay"},
///     "validation": {"cadence", "prompts_per_task", "samples", "temperature", "at_start"},
///     "stages": [{"steps", "max_len", "temperature", "rollouts", "batch_size",
///                 "minibatch_size", "eps_low", "eps_high", "beta", "shaping_penalty",
///                 "reset_on_enter",
///                 "reset": {"mode", "interval", "window", "min_improvement"},
///                 "tasks": [{"family", "size", "modulus", "weight"}]}],
///     "ablation":   {"beta", "reset_interval"}
///   }
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
    std::uint64_t total_steps = 3000;
    /// Write checkpoint_step<N>.ckpt every this many steps; 0 disables.
    std::uint64_t checkpoint_every = 1000;
    double init_std = kDefaultInitStd;
    ModelDims model;
    AdamWConfig optimizer;
    ValidationConfig validation{100, 64, 16, 0.6, true};
    std::vector<StageConfig> stages{default_stage()};
    AblationSettings ablation;

    static constexpr double kDefaultInitStd = 0.3;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Invalid configuration. `field()` is a JSON path such as
/// "stages[0].batch_size"; syntax errors report "line L, column C".
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(ErrorKind::InvalidConfig, field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Pretty JSON with every key present, in schema order, newline-terminated.
std::string serialize_config(const RunConfig& config);

/// Applies PRORL_SEED and PRORL_OUT when set. `getenv` is injectable for tests.
void apply_env_overrides(RunConfig& config,
                         const std::function<std::optional<std::string>(const char*)>& getenv = {});

} // namespace prorl::cli
