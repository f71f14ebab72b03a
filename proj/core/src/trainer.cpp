#include "prorl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>

#include <json.hpp>

#include "prorl/checkpoint.hpp"
#include "prorl/error.hpp"
#include "prorl/eval.hpp"
#include "prorl/rng.hpp"

namespace prorl {

namespace {

constexpr std::uint64_t kPromptTag = 0x70726f6d;    // "prom"
constexpr std::uint64_t kRolloutTag = 0x726f6c6c;   // "roll"
constexpr std::uint64_t kValidateTag = 0x76616c69;  // "vali"

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

} // namespace

std::string_view reset_mode_name(ResetPolicy::Mode mode) noexcept {
    switch (mode) {
    case ResetPolicy::Mode::None: return "none";
    case ResetPolicy::Mode::Interval: return "interval";
    case ResetPolicy::Mode::Stagnation: return "stagnation";
    }
    return "none";
}

ResetPolicy::Mode parse_reset_mode(std::string_view name) {
    for (auto mode : {ResetPolicy::Mode::None, ResetPolicy::Mode::Interval, ResetPolicy::Mode::Stagnation}) {
        if (reset_mode_name(mode) == name) return mode;
    }
    config_error("unknown reset mode '" + std::string(name) + "'");
}

void ResetPolicy::validate() const {
    if (mode == Mode::Interval && interval == 0) config_error("interval reset needs interval > 0");
    if (mode == Mode::Stagnation) {
        if (window < 2) config_error("stagnation reset needs window >= 2");
        if (!std::isfinite(min_improvement) || min_improvement < 0.0) {
            config_error("stagnation min_improvement must be finite and >= 0");
        }
    }
}

void StageConfig::validate() const {
    if (max_len < 1) config_error("max_len must be >= 1");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) config_error("temperature must be > 0");
    if (rollouts < 2) config_error("rollouts must be >= 2");
    if (batch_size < 1 || minibatch_size < 1) config_error("batch and minibatch sizes must be >= 1");
    if (batch_size % minibatch_size != 0) {
        config_error("batch_size " + std::to_string(batch_size) + " is not divisible by minibatch_size " +
                     std::to_string(minibatch_size));
    }
    clip.validate();
    kl.validate();
    if (!(shaping_penalty >= 0.0 && shaping_penalty <= 1.0)) config_error("shaping_penalty must lie in [0, 1]");
    reset.validate();
    if (tasks.empty()) config_error("stage has no tasks");
    double total = 0.0;
    for (const TaskWeight& t : tasks) {
        tasks::validate_difficulty(t.family, t.difficulty);
        if (!(t.weight > 0.0) || !std::isfinite(t.weight)) config_error("task weights must be > 0");
        total += t.weight;
    }
    if (!std::isfinite(total)) config_error("task weights overflow");
}

StageConfig default_stage() {
    StageConfig s;
    // Heavier than the KlConfig default; with 1e-3 some seeds of the default
    // arithmetic run settle well below the others.
    s.kl.beta = 0.02;
    s.tasks.push_back({tasks::Family::Arithmetic, tasks::default_difficulty(tasks::Family::Arithmetic), 1.0});
    return s;
}

TrainerState make_initial_state(const ModelDims& dims, double init_std, const AdamWConfig& optimizer,
                                const StageConfig& stage, std::uint64_t seed) {
    optimizer.validate();
    stage.validate();
    if (!(init_std >= 0.0) || !std::isfinite(init_std)) config_error("init_std must be finite and >= 0");
    PolicyParameters policy = init_gaussian(dims, init_std, derive_seed({seed, 0x696e6974}));
    PolicyParameters reference = policy;
    return TrainerState{std::move(policy), std::move(reference), OptimizerState(optimizer, dims.parameter_count()),
                        stage, 0, 0, 0, seed, {}};
}

double TrajectoryGroup::mean_raw_reward() const noexcept {
    if (raw_rewards.empty()) return 0.0;
    double sum = 0.0;
    for (double r : raw_rewards) sum += r;
    return sum / static_cast<double>(raw_rewards.size());
}

double apply_reward_shaping(double raw, bool terminated, double penalty) noexcept {
    return terminated ? raw : std::max(raw - penalty, 0.0);
}

std::vector<tasks::TaskInstance> draw_prompts(const StageConfig& stage, std::uint64_t seed, std::uint64_t step) {
    std::vector<double> weights;
    weights.reserve(stage.tasks.size());
    for (const TaskWeight& t : stage.tasks) weights.push_back(t.weight);

    std::vector<tasks::TaskInstance> out;
    out.reserve(static_cast<std::size_t>(stage.batch_size));
    const std::uint64_t step_seed = derive_seed({seed, kPromptTag, step});
    for (int i = 0; i < stage.batch_size; ++i) {
        std::size_t pick = 0;
        if (weights.size() > 1) {
            auto rng = make_stream({step_seed, static_cast<std::uint64_t>(i)});
            // Inverse-CDF by hand: std::discrete_distribution is not pinned
            // across standard libraries.
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            double total = 0.0;
            for (double w : weights) total += w;
            double acc = 0.0;
            pick = weights.size() - 1;
            for (std::size_t k = 0; k < weights.size(); ++k) {
                acc += weights[k] / total;
                if (u < acc) {
                    pick = k;
                    break;
                }
            }
        }
        const TaskWeight& task = stage.tasks[pick];
        out.push_back(tasks::generate(task.family, task.difficulty,
                                      tasks::split_seed(tasks::Split::Train, step_seed, static_cast<std::uint64_t>(i))));
    }
    return out;
}

std::vector<TrajectoryGroup> rollout_batch(const TrainerState& state, std::span<const tasks::TaskInstance> prompts) {
    if (prompts.empty()) throw Error(ErrorKind::EmptyBatch, "rollout_batch needs at least one prompt");
    const StageConfig& stage = state.stage;
    std::vector<TrajectoryGroup> groups(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        TrajectoryGroup& g = groups[i];
        g.task = prompts[i];
        const auto n = static_cast<std::size_t>(stage.rollouts);
        g.samples.reserve(n);
        g.old_logprobs.reserve(n);
        g.ref_logprobs.reserve(n);
        g.entropy.reserve(n);
        g.raw_rewards.reserve(n);
        g.shaped_rewards.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            auto rng = make_stream({state.seed, kRolloutTag, state.global_step, i, j});
            SampleResult s = sample(state.policy, g.task.prompt, stage.temperature, stage.max_len, rng);
            const tasks::Verdict v = tasks::verify(g.task, s.sequence.response);
            g.raw_rewards.push_back(v.reward);
            g.shaped_rewards.push_back(apply_reward_shaping(v.reward, s.sequence.terminated, stage.shaping_penalty));
            g.ref_logprobs.push_back(state.reference == state.policy ? s.logprobs
                                                                     : logprobs(state.reference, s.sequence));
            g.samples.push_back(std::move(s.sequence));
            g.old_logprobs.push_back(std::move(s.logprobs));
            g.entropy.push_back(std::move(s.entropy));
        }
    }
    return groups;
}

bool carries_signal(const TrajectoryGroup& group) noexcept {
    // Rewards live in [0, 1], so the mean is strictly inside iff some reward
    // is above 0 and some is below 1. Testing that directly avoids rounding
    // the sum of near-1 rewards up to exactly 1.
    const auto& raw = group.raw_rewards;
    const bool any_above = std::any_of(raw.begin(), raw.end(), [](double r) { return r > 0.0; });
    const bool any_below = std::any_of(raw.begin(), raw.end(), [](double r) { return r < 1.0; });
    return any_above && any_below && !grpo::zero_variance(group.shaped_rewards);
}

std::vector<TrajectoryGroup> dynamic_filter(std::vector<TrajectoryGroup> groups) {
    std::erase_if(groups, [](const TrajectoryGroup& g) { return !carries_signal(g); });
    return groups;
}

std::string metrics_record(const StepMetrics& m) {
    const auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["step"] = m.step;
    j["stage"] = m.stage;
    j["loss"] = opt(m.loss);
    j["entropy"] = m.entropy;
    j["kl"] = m.kl;
    j["mean_ratio"] = opt(m.mean_ratio);
    j["filter_rate"] = m.filter_rate;
    j["mean_len"] = m.mean_len;
    j["mean_reward"] = m.mean_reward;
    j["val_pass1"] = opt(m.val_pass1);
    j["val_pass_n"] = opt(m.val_pass_n);
    j["reset_flag"] = m.reset_flag;
    j["skipped"] = m.skipped;
    j["updates"] = m.updates;
    return j.dump();
}

UpdateStats update_on_groups(TrainerState& state, std::span<const TrajectoryGroup> groups) {
    const StageConfig& stage = state.stage;
    const auto mb = static_cast<std::size_t>(stage.minibatch_size);
    const bool use_kl = stage.kl.beta > 0.0;
    UpdateStats stats;
    double ratio_sum = 0.0;

    for (std::size_t begin = 0; begin < groups.size(); begin += mb) {
        const std::size_t end = std::min(groups.size(), begin + mb);
        grpo::TokenTerms surrogate;
        grpo::TokenTerms kl;
        std::vector<const TokenSequence*> sequences;
        std::vector<std::size_t> offsets{0};

        for (std::size_t g = begin; g < end; ++g) {
            const TrajectoryGroup& group = groups[g];
            const grpo::AdvantageSet adv = grpo::compute_advantages(group.shaped_rewards);
            for (std::size_t i = 0; i < group.samples.size(); ++i) {
                const TokenSequence& seq = group.samples[i];
                const PerTokenLogProbs current = logprobs(state.policy, seq);
                const std::vector<double> ratios = grpo::importance_ratio(current.values, group.old_logprobs[i].values);
                for (double r : ratios) ratio_sum += r;

                grpo::TokenTerms s = grpo::clipped_surrogate(ratios, adv.values[i], stage.clip);
                surrogate.values.insert(surrogate.values.end(), s.values.begin(), s.values.end());
                surrogate.derivs.insert(surrogate.derivs.end(), s.derivs.begin(), s.derivs.end());
                if (use_kl) {
                    grpo::TokenTerms k = grpo::kl_k3(current.values, group.ref_logprobs[i].values);
                    kl.values.insert(kl.values.end(), k.values.begin(), k.values.end());
                    kl.derivs.insert(kl.derivs.end(), k.derivs.begin(), k.derivs.end());
                } else {
                    kl.values.resize(surrogate.values.size(), 0.0);
                    kl.derivs.resize(surrogate.derivs.size(), 0.0);
                }
                sequences.push_back(&seq);
                offsets.push_back(surrogate.values.size());
            }
        }

        const std::size_t tokens = surrogate.values.size();
        const grpo::LossTerms loss = grpo::assemble_loss(surrogate, kl, stage.kl, tokens);
        std::vector<WeightedSequence> weighted;
        weighted.reserve(sequences.size());
        const std::span<const double> derivs(loss.derivs);
        for (std::size_t s = 0; s < sequences.size(); ++s) {
            weighted.push_back({sequences[s], derivs.subspan(offsets[s], offsets[s + 1] - offsets[s])});
        }
        const ObjectiveGradient grad = grad_weighted_logprob(state.policy, weighted);
        adamw_update(state.policy, grad, state.optimizer);

        stats.losses.push_back(loss.loss);
        stats.tokens += tokens;
    }
    stats.mean_ratio = stats.tokens ? ratio_sum / static_cast<double>(stats.tokens) : 1.0;
    return stats;
}

StepMetrics train_step(TrainerState& state, std::span<const tasks::TaskInstance> prompts) {
    if (prompts.size() != static_cast<std::size_t>(state.stage.batch_size)) {
        throw Error(ErrorKind::ShapeMismatch, "train_step got " + std::to_string(prompts.size()) +
                                                  " prompts for batch size " + std::to_string(state.stage.batch_size));
    }
    StepMetrics m;
    m.step = state.global_step;
    m.stage = state.stage_index;

    std::vector<TrajectoryGroup> groups = rollout_batch(state, prompts);

    double kl_sum = 0.0;
    double entropy_sum = 0.0;
    double reward_sum = 0.0;
    std::size_t tokens = 0;
    std::size_t samples = 0;
    for (const TrajectoryGroup& g : groups) {
        for (std::size_t i = 0; i < g.samples.size(); ++i) {
            for (double v : grpo::kl_k3(g.old_logprobs[i].values, g.ref_logprobs[i].values).values) kl_sum += v;
            for (double e : g.entropy[i]) entropy_sum += e;
            tokens += g.samples[i].response.size();
            reward_sum += g.shaped_rewards[i];
            ++samples;
        }
    }
    // sample() always draws at least one token, so tokens > 0.
    m.entropy = entropy_sum / static_cast<double>(tokens);
    m.kl = kl_sum / static_cast<double>(tokens);
    m.mean_len = static_cast<double>(tokens) / static_cast<double>(samples);
    m.mean_reward = reward_sum / static_cast<double>(samples);

    const std::size_t before = groups.size();
    groups = dynamic_filter(std::move(groups));
    m.filter_rate = 1.0 - static_cast<double>(groups.size()) / static_cast<double>(before);

    if (groups.empty()) {
        m.skipped = true;
    } else {
        const UpdateStats stats = update_on_groups(state, groups);
        double loss_sum = 0.0;
        for (double l : stats.losses) loss_sum += l;
        m.loss = loss_sum / static_cast<double>(stats.losses.size());
        m.mean_ratio = stats.mean_ratio;
        m.updates = stats.losses.size();
    }
    ++state.global_step;
    return m;
}

void hard_reset(TrainerState& state, const StageConfig* next_stage) {
    state.reference = state.policy;
    state.optimizer.reset();
    if (next_stage) state.stage = *next_stage;
    state.last_reset_step = state.global_step;
}

bool maybe_reset(std::uint64_t global_step, std::uint64_t last_reset_step, std::span<const double> scores,
                 const ResetPolicy& policy) {
    switch (policy.mode) {
    case ResetPolicy::Mode::None: return false;
    case ResetPolicy::Mode::Interval:
        return policy.interval > 0 && global_step >= last_reset_step && global_step - last_reset_step >= policy.interval;
    case ResetPolicy::Mode::Stagnation: {
        const std::size_t w = policy.window;
        if (w < 2 || scores.size() < w) return false;
        const std::size_t split = scores.size() - (w - 1);
        const double baseline = *std::max_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(split));
        const double recent = *std::max_element(scores.begin() + static_cast<std::ptrdiff_t>(split), scores.end());
        return recent - baseline < policy.min_improvement;
    }
    }
    return false;
}

std::vector<tasks::TaskInstance> validation_instances(std::span<const StageConfig> stages, std::size_t per_task,
                                                      std::uint64_t seed) {
    std::set<std::tuple<int, int, int>> seen;
    std::vector<tasks::TaskInstance> out;
    for (const StageConfig& stage : stages) {
        for (const TaskWeight& t : stage.tasks) {
            const auto key = std::make_tuple(static_cast<int>(t.family), t.difficulty.size, t.difficulty.modulus);
            if (!seen.insert(key).second) continue;
            for (std::size_t i = 0; i < per_task; ++i) {
                out.push_back(tasks::generate(t.family, t.difficulty,
                                              tasks::split_seed(tasks::Split::Validation, seed, i)));
            }
        }
    }
    return out;
}

ValidationRecord evaluate_validation(const PolicyParameters& policy, std::span<const tasks::TaskInstance> instances,
                                     const ValidationConfig& config, int max_len, std::uint64_t seed,
                                     std::uint64_t step) {
    ValidationRecord rec;
    rec.step = step;
    if (instances.empty() || config.samples == 0) return rec;
    const eval::SampleMatrix m = eval::collect_samples(policy, instances, config.samples, config.temperature, max_len,
                                                       derive_seed({seed, kValidateTag, step}));
    const std::size_t ks[] = {1, config.samples};
    const eval::PassAtKReport report = eval::pass_at_k_curve(m, ks);
    rec.pass1 = report.mean[0];
    rec.pass_n = report.mean[1];
    return rec;
}

namespace {

std::size_t stage_for_step(std::span<const StageConfig> stages, std::uint64_t step) {
    std::uint64_t start = 0;
    for (std::size_t k = 0; k + 1 < stages.size(); ++k) {
        start += stages[k].steps;
        if (step < start) return k;
    }
    return stages.size() - 1;
}

std::vector<double> scores_since_reset(const TrainerState& state) {
    std::vector<double> out;
    for (const ValidationRecord& r : state.validation_history) {
        if (r.step > state.last_reset_step) out.push_back(r.pass1);
    }
    return out;
}

} // namespace

RunResult run_stages(TrainerState state, const RunPlan& plan, std::span<const tasks::TaskInstance> validation_set,
                     const StepCallback& on_step) {
    if (plan.stages.empty()) throw Error(ErrorKind::EmptyBatch, "run_stages needs at least one stage");
    for (const StageConfig& s : plan.stages) s.validate();

    RunResult result{std::move(state), {}};
    TrainerState& st = result.state;
    const ValidationConfig& vc = plan.validation;
    const bool validate = vc.cadence > 0 && !validation_set.empty();

    if (validate && vc.at_start && st.global_step == 0 && st.validation_history.empty() &&
        plan.total_steps > 0) {
        st.validation_history.push_back(
            evaluate_validation(st.policy, validation_set, vc, st.stage.max_len, st.seed, 0));
    }

    while (st.global_step < plan.total_steps) {
        const std::size_t k = stage_for_step(plan.stages, st.global_step);
        bool reset_flag = false;
        if (k != st.stage_index) {
            if (plan.stages[k].reset_on_enter) {
                hard_reset(st, &plan.stages[k]);
                reset_flag = true;
            } else {
                st.stage = plan.stages[k];
            }
            st.stage_index = k;
        }

        const std::vector<tasks::TaskInstance> prompts = draw_prompts(st.stage, st.seed, st.global_step);
        StepMetrics m = train_step(st, prompts);

        if (validate && st.global_step % vc.cadence == 0) {
            const ValidationRecord rec =
                evaluate_validation(st.policy, validation_set, vc, st.stage.max_len, st.seed, st.global_step);
            st.validation_history.push_back(rec);
            m.val_pass1 = rec.pass1;
            m.val_pass_n = rec.pass_n;
            if (st.stage.reset.mode == ResetPolicy::Mode::Stagnation &&
                maybe_reset(st.global_step, st.last_reset_step, scores_since_reset(st), st.stage.reset)) {
                hard_reset(st);
                reset_flag = true;
            }
        }
        if (st.stage.reset.mode == ResetPolicy::Mode::Interval &&
            maybe_reset(st.global_step, st.last_reset_step, {}, st.stage.reset)) {
            hard_reset(st);
            reset_flag = true;
        }
        m.reset_flag = reset_flag;
        result.log.push_back(m);
        if (on_step) on_step(st, m);
    }
    return result;
}

// Trainer checkpoint layout (all little-endian):
//   magic "PRORLTRN", u32 version
//   u64 global_step, u64 last_reset_step, u64 stage_index, u64 seed
//   stage config (see write_stage)
//   u64 count, then (u64 step, f64 pass1, f64 pass_n) per validation record
//   blob policy checkpoint (theta), blob policy checkpoint (reference)
//   f64 lr, beta1, beta2, eps, weight_decay; u64 step; u64 count; f64 m[]; f64 v[]

namespace {

void write_stage(ByteWriter& w, const StageConfig& s) {
    w.u64(s.steps);
    w.u32(static_cast<std::uint32_t>(s.max_len));
    w.f64(s.temperature);
    w.u32(static_cast<std::uint32_t>(s.rollouts));
    w.u32(static_cast<std::uint32_t>(s.batch_size));
    w.u32(static_cast<std::uint32_t>(s.minibatch_size));
    w.f64(s.clip.eps_low);
    w.f64(s.clip.eps_high);
    w.f64(s.kl.beta);
    w.f64(s.shaping_penalty);
    w.u8(s.reset_on_enter ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(s.reset.mode));
    w.u64(s.reset.interval);
    w.u64(s.reset.window);
    w.f64(s.reset.min_improvement);
    w.u64(s.tasks.size());
    for (const TaskWeight& t : s.tasks) {
        w.u32(static_cast<std::uint32_t>(t.family));
        w.u32(static_cast<std::uint32_t>(t.difficulty.size));
        w.u32(static_cast<std::uint32_t>(t.difficulty.modulus));
        w.f64(t.weight);
    }
}

StageConfig read_stage(ByteReader& r) {
    StageConfig s;
    s.steps = r.u64("stage.steps");
    s.max_len = static_cast<int>(r.u32("stage.max_len"));
    s.temperature = r.f64("stage.temperature");
    s.rollouts = static_cast<int>(r.u32("stage.rollouts"));
    s.batch_size = static_cast<int>(r.u32("stage.batch_size"));
    s.minibatch_size = static_cast<int>(r.u32("stage.minibatch_size"));
    s.clip.eps_low = r.f64("stage.eps_low");
    s.clip.eps_high = r.f64("stage.eps_high");
    s.kl.beta = r.f64("stage.beta");
    s.shaping_penalty = r.f64("stage.shaping_penalty");
    const std::uint8_t on_enter = r.u8("stage.reset_on_enter");
    if (on_enter > 1) throw CheckpointError("stage.reset_on_enter", "flag is not 0 or 1");
    s.reset_on_enter = on_enter == 1;
    const std::uint8_t mode = r.u8("stage.reset.mode");
    if (mode > static_cast<std::uint8_t>(ResetPolicy::Mode::Stagnation)) {
        throw CheckpointError("stage.reset.mode", "unknown reset mode " + std::to_string(mode));
    }
    s.reset.mode = static_cast<ResetPolicy::Mode>(mode);
    s.reset.interval = r.u64("stage.reset.interval");
    s.reset.window = r.u64("stage.reset.window");
    s.reset.min_improvement = r.f64("stage.reset.min_improvement");
    const std::uint64_t count = r.u64("stage.tasks");
    if (count > 1024) throw CheckpointError("stage.tasks", "implausible task count");
    for (std::uint64_t i = 0; i < count; ++i) {
        TaskWeight t;
        const std::uint32_t family = r.u32("stage.tasks.family");
        if (family > static_cast<std::uint32_t>(tasks::Family::GraphColor)) {
            throw CheckpointError("stage.tasks.family", "unknown family " + std::to_string(family));
        }
        t.family = static_cast<tasks::Family>(family);
        t.difficulty.size = static_cast<int>(r.u32("stage.tasks.size"));
        t.difficulty.modulus = static_cast<int>(r.u32("stage.tasks.modulus"));
        t.weight = r.f64("stage.tasks.weight");
        s.tasks.push_back(t);
    }
    try {
        s.validate();
    } catch (const Error& e) {
        throw CheckpointError("stage", e.what());
    }
    return s;
}

} // namespace

std::vector<std::uint8_t> encode_trainer_state(const TrainerState& state) {
    ByteWriter w;
    w.magic(kTrainerMagic);
    w.u32(kTrainerFormatVersion);
    w.u64(state.global_step);
    w.u64(state.last_reset_step);
    w.u64(state.stage_index);
    w.u64(state.seed);
    write_stage(w, state.stage);
    w.u64(state.validation_history.size());
    for (const ValidationRecord& r : state.validation_history) {
        w.u64(r.step);
        w.f64(r.pass1);
        w.f64(r.pass_n);
    }
    w.blob(encode_policy(state.policy));
    w.blob(encode_policy(state.reference));
    const OptimizerState& o = state.optimizer;
    w.f64(o.config.lr);
    w.f64(o.config.beta1);
    w.f64(o.config.beta2);
    w.f64(o.config.eps);
    w.f64(o.config.weight_decay);
    w.u64(o.step);
    w.u64(o.m.size());
    w.f64s(o.m);
    w.f64s(o.v);
    return std::move(w).take();
}

TrainerState decode_trainer_state(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic("magic", kTrainerMagic);
    const std::uint32_t version = r.u32("format_version");
    if (version != kTrainerFormatVersion) {
        throw CheckpointError("format_version", "unsupported trainer checkpoint version " + std::to_string(version));
    }
    const std::uint64_t global_step = r.u64("global_step");
    const std::uint64_t last_reset = r.u64("last_reset_step");
    const std::uint64_t stage_index = r.u64("stage_index");
    const std::uint64_t seed = r.u64("seed");
    StageConfig stage = read_stage(r);
    const std::uint64_t records = r.u64("validation_history");
    if (records > bytes.size()) throw CheckpointError("validation_history", "implausible record count");
    std::vector<ValidationRecord> history;
    history.reserve(records);
    for (std::uint64_t i = 0; i < records; ++i) {
        ValidationRecord rec;
        rec.step = r.u64("validation_history.step");
        rec.pass1 = r.f64("validation_history.pass1");
        rec.pass_n = r.f64("validation_history.pass_n");
        history.push_back(rec);
    }
    const std::vector<std::uint8_t> theta_bytes = r.blob("policy");
    const std::vector<std::uint8_t> ref_bytes = r.blob("reference");
    PolicyParameters policy = decode_policy(theta_bytes);
    PolicyParameters reference = decode_policy(ref_bytes);
    if (!(policy.dims() == reference.dims())) throw CheckpointError("reference", "shape differs from the policy");

    AdamWConfig cfg;
    cfg.lr = r.f64("optimizer.lr");
    cfg.beta1 = r.f64("optimizer.beta1");
    cfg.beta2 = r.f64("optimizer.beta2");
    cfg.eps = r.f64("optimizer.eps");
    cfg.weight_decay = r.f64("optimizer.weight_decay");
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw CheckpointError("optimizer", e.what());
    }
    OptimizerState opt(cfg, policy.size());
    opt.step = r.u64("optimizer.step");
    if (r.u64("optimizer.size") != policy.size()) {
        throw CheckpointError("optimizer.size", "moment arrays do not match the policy");
    }
    r.f64s("optimizer.m", opt.m);
    r.f64s("optimizer.v", opt.v);
    r.expect_end("trailing");
    return TrainerState{std::move(policy), std::move(reference), std::move(opt), std::move(stage),
                        static_cast<std::size_t>(stage_index), global_step, last_reset, seed, std::move(history)};
}

bool is_trainer_checkpoint(std::span<const std::uint8_t> bytes) noexcept {
    return bytes.size() >= kTrainerMagic.size() &&
           std::equal(kTrainerMagic.begin(), kTrainerMagic.end(), bytes.begin(),
                      [](char c, std::uint8_t b) { return static_cast<std::uint8_t>(c) == b; });
}

} // namespace prorl
