#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prorl/grpo.hpp"
#include "prorl/optimizer.hpp"
#include "prorl/policy.hpp"
#include "prorl/tasks.hpp"

namespace prorl {

struct TaskWeight {
    tasks::Family family = tasks::Family::Arithmetic;
    tasks::DifficultySpec difficulty;
    double weight = 1.0;

    friend bool operator==(const TaskWeight&, const TaskWeight&) = default;
};

struct ResetPolicy {
    enum class Mode { None, Interval, Stagnation };

    Mode mode = Mode::None;
    /// Interval mode: steps between resets.
    std::uint64_t interval = 0;
    /// Stagnation mode: evaluations in the window and the improvement that
    /// counts as progress.
    std::size_t window = 3;
    double min_improvement = 0.005;

    void validate() const;
    friend bool operator==(const ResetPolicy&, const ResetPolicy&) = default;
};

std::string_view reset_mode_name(ResetPolicy::Mode mode) noexcept;
ResetPolicy::Mode parse_reset_mode(std::string_view name);

struct StageConfig {
    /// Steps in this stage. The last stage runs until the run's total steps.
    std::uint64_t steps = 0;
    int max_len = 32;
    double temperature = 1.2;
    int rollouts = 8;
    int batch_size = 32;
    int minibatch_size = 8;
    grpo::ClipConfig clip;
    grpo::KlConfig kl;
    double shaping_penalty = 0.5;
    /// Hard-reset when the run enters this stage.
    bool reset_on_enter = false;
    ResetPolicy reset;
    std::vector<TaskWeight> tasks;

    /// Throws InvalidConfig (or InvalidDifficulty for a task entry).
    void validate() const;
    friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

/// Default stage: arithmetic, two operands mod 7, beta 0.02.
StageConfig default_stage();

struct ValidationRecord {
    std::uint64_t step = 0;
    double pass1 = 0.0;
    double pass_n = 0.0;

    friend bool operator==(const ValidationRecord&, const ValidationRecord&) = default;
};

struct TrainerState {
    PolicyParameters policy;
    PolicyParameters reference;
    OptimizerState optimizer;
    StageConfig stage;
    std::size_t stage_index = 0;
    std::uint64_t global_step = 0;
    std::uint64_t last_reset_step = 0;
    /// Master seed. Every random stream is derived from (seed, step, ...), so
    /// this plus global_step is the complete rng state.
    std::uint64_t seed = 0;
    std::vector<ValidationRecord> validation_history;

    friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

/// Fresh state: Gaussian policy, reference equal to the policy, zero moments.
TrainerState make_initial_state(const ModelDims& dims, double init_std, const AdamWConfig& optimizer,
                                const StageConfig& stage, std::uint64_t seed);

struct TrajectoryGroup {
    tasks::TaskInstance task;
    std::vector<TokenSequence> samples;
    /// Temperature-1 log-probabilities under the rollout policy.
    std::vector<PerTokenLogProbs> old_logprobs;
    /// Log-probabilities under the reference policy (fixed within a step).
    std::vector<PerTokenLogProbs> ref_logprobs;
    /// Rollout-policy entropy at every response position.
    std::vector<std::vector<double>> entropy;
    std::vector<double> raw_rewards;
    std::vector<double> shaped_rewards;

    double mean_raw_reward() const noexcept;
};

/// terminated ? raw : max(raw - penalty, 0)
double apply_reward_shaping(double raw, bool terminated, double penalty) noexcept;

/// The step's training prompts: tasks drawn from the stage mixture, instance
/// seeds from the training split.
std::vector<tasks::TaskInstance> draw_prompts(const StageConfig& stage, std::uint64_t seed, std::uint64_t step);

/// stage.rollouts samples per prompt at the stage temperature. Sample j of
/// prompt i uses the stream (seed, global_step, i, j). Throws EmptyBatch.
std::vector<TrajectoryGroup> rollout_batch(const TrainerState& state,
                                           std::span<const tasks::TaskInstance> prompts);

/// Keeps a group iff 0 < mean raw reward < 1 and its shaped rewards differ.
bool carries_signal(const TrajectoryGroup& group) noexcept;
std::vector<TrajectoryGroup> dynamic_filter(std::vector<TrajectoryGroup> groups);

struct StepMetrics {
    std::uint64_t step = 0;
    std::size_t stage = 0;
    /// Mean minibatch loss; empty for a skipped step.
    std::optional<double> loss;
    double entropy = 0.0;
    /// Mean k3 estimate of the rollout policy against the reference.
    double kl = 0.0;
    std::optional<double> mean_ratio;
    double filter_rate = 0.0;
    double mean_len = 0.0;
    double mean_reward = 0.0;
    std::optional<double> val_pass1;
    std::optional<double> val_pass_n;
    bool reset_flag = false;
    bool skipped = false;
    std::size_t updates = 0;

    friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

/// One JSON line with a fixed key set and order; absent values are null.
std::string metrics_record(const StepMetrics& metrics);

struct UpdateStats {
    std::vector<double> losses;
    /// Mean ratio over every token of every minibatch.
    double mean_ratio = 0.0;
    std::size_t tokens = 0;
};

/// The optimisation half of a step: the groups are cut into consecutive
/// minibatches of stage.minibatch_size groups, and each minibatch recomputes
/// log-probs under the current policy, assembles the loss and takes one AdamW
/// step. Groups must have passed dynamic_filter.
UpdateStats update_on_groups(TrainerState& state, std::span<const TrajectoryGroup> groups);

/// rollout -> filter -> minibatch updates. Advances global_step. A batch with
/// no surviving group is recorded as skipped and leaves the policy alone.
StepMetrics train_step(TrainerState& state, std::span<const tasks::TaskInstance> prompts);

/// reference <- policy, optimizer zeroed, optional stage swap. The policy and
/// global_step are untouched.
void hard_reset(TrainerState& state, const StageConfig* next_stage = nullptr);

/// Interval mode looks at steps since the last reset. Stagnation mode needs
/// `window` scores since the last reset: it fires when the best of the latest
/// window - 1 scores beats the best score before them by less than
/// min_improvement.
bool maybe_reset(std::uint64_t global_step, std::uint64_t last_reset_step, std::span<const double> scores,
                 const ResetPolicy& policy);

struct ValidationConfig {
    /// Evaluate every `cadence` steps; 0 disables validation.
    std::uint64_t cadence = 0;
    std::size_t prompts_per_task = 32;
    std::size_t samples = 16;
    double temperature = 0.6;
    /// Evaluate before the first step as well.
    bool at_start = false;

    friend bool operator==(const ValidationConfig&, const ValidationConfig&) = default;
};

/// Validation-split instances for every distinct (family, difficulty) in the stages.
std::vector<tasks::TaskInstance> validation_instances(std::span<const StageConfig> stages, std::size_t per_task,
                                                      std::uint64_t seed);

/// Mean pass@1 and pass@n over the instances at the validation temperature.
ValidationRecord evaluate_validation(const PolicyParameters& policy, std::span<const tasks::TaskInstance> instances,
                                     const ValidationConfig& config, int max_len, std::uint64_t seed,
                                     std::uint64_t step);

struct RunPlan {
    std::vector<StageConfig> stages;
    std::uint64_t total_steps = 0;
    ValidationConfig validation;
};

/// Called after each step with the post-step state.
using StepCallback = std::function<void(const TrainerState&, const StepMetrics&)>;

struct RunResult {
    TrainerState state;
    std::vector<StepMetrics> log;
};

/// Runs from state.global_step to plan.total_steps. Stage k starts after the
/// steps of stages 0..k-1. Throws EmptyBatch for an empty stage list.
RunResult run_stages(TrainerState state, const RunPlan& plan, std::span<const tasks::TaskInstance> validation_set,
                     const StepCallback& on_step = {});

inline constexpr std::string_view kTrainerMagic = "PRORLTRN";
inline constexpr std::uint32_t kTrainerFormatVersion = 1;

std::vector<std::uint8_t> encode_trainer_state(const TrainerState& state);
TrainerState decode_trainer_state(std::span<const std::uint8_t> bytes);
bool is_trainer_checkpoint(std::span<const std::uint8_t> bytes) noexcept;

} // namespace prorl
