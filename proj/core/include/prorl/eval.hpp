#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prorl/policy.hpp"
#include "prorl/tasks.hpp"

namespace prorl::eval {

/// Outcomes of the n samples drawn for one prompt.
struct PromptSamples {
    /// Samples with reward exactly 1.
    std::size_t correct = 0;
    /// Per-sample rewards; may be empty for count-only matrices.
    std::vector<double> rewards;
};

/// Prompts x n outcome matrix. Binary families use `correct`; continuous
/// families additionally carry the rewards (and `correct` thresholds them at 1).
struct SampleMatrix {
    std::size_t n = 0;
    double temperature = 0.6;
    std::string policy_id;
    std::vector<PromptSamples> prompts;

    /// Throws ShapeMismatch unless 0 <= c <= n and rewards are empty or n long.
    void validate() const;
    double mean_reward() const;
};

/// Count-only matrix, mostly for simulations.
SampleMatrix matrix_from_counts(std::size_t n, std::span<const std::size_t> correct);

/// Samples n responses per instance at `temperature` (one independent stream
/// per (seed, prompt, sample)) and scores them with the task verifiers.
SampleMatrix collect_samples(const PolicyParameters& params, std::span<const tasks::TaskInstance> instances,
                             std::size_t n, double temperature, int max_len, std::uint64_t seed,
                             std::string policy_id = {});

/// 1 - C(n-c, k) / C(n, k) in product form. Throws InvalidK unless 1 <= k <= n,
/// and ShapeMismatch when c > n.
double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k);

struct PassAtKReport {
    std::vector<std::size_t> ks;
    /// Arithmetic mean over prompts, one per k.
    std::vector<double> mean;
    /// per_prompt[i][j]: prompt i at ks[j].
    std::vector<std::vector<double>> per_prompt;
    /// Upper bound at the matrix's empirical pass@1 moments, one per k.
    std::vector<double> upper_bound;
};

/// Throws EmptyMatrix for a matrix without prompts and InvalidK for k outside [1, n].
PassAtKReport pass_at_k_curve(const SampleMatrix& matrix, std::span<const std::size_t> ks);

/// 1 - ((1 - E[rho])^2 + Var(rho))^(k/2). Throws InvalidMoments unless
/// mean_rho in [0, 1] and var_rho in [0, 0.25].
double pass_at_k_upper_bound(double mean_rho, double var_rho, double k);

struct Pass1Moments {
    double mean = 0.0;
    /// Population variance across prompts of c/n.
    double variance = 0.0;
};

Pass1Moments pass1_moments(const SampleMatrix& matrix);

struct Histogram {
    /// bins + 1 uniform edges on [0, 1]; the last bin is closed on the right.
    std::vector<double> edges;
    std::vector<std::size_t> counts;
};

/// Distribution of per-prompt c/n. Throws InvalidConfig when bins < 2.
Histogram pass1_histogram(const SampleMatrix& matrix, std::size_t bins);

struct BoundCheck {
    std::size_t k = 0;
    /// Mean over prompts of 1 - (1 - c/n)^k: pass@k at the per-prompt
    /// empirical pass@1, the quantity the moment bound constrains.
    double empirical = 0.0;
    double bound = 0.0;
    bool holds = false;
};

/// Absolute slack allowed when the two sides agree up to rounding.
inline constexpr double kBoundTolerance = 1e-12;

/// Compares empirical pass@k with the bound at the same matrix's moments.
std::vector<BoundCheck> check_bound(const SampleMatrix& matrix, std::span<const std::size_t> ks);

struct SweepConfig {
    std::size_t samples = 16;
    std::size_t prompts = 50;
    std::vector<std::size_t> ks{1, 16};
    double temperature = 0.6;
    int max_len = 32;
    std::uint64_t seed = 0;
    /// Arithmetic modulus (ignored by other families).
    int modulus = 7;
};

struct SweepRow {
    int size = 0;
    SampleMatrix matrix;
    PassAtKReport curve;
    double pass1 = 0.0;
    double mean_reward = 0.0;
};

/// Fresh held-out (test-split) instances per size, sampled and scored.
std::vector<SweepRow> difficulty_sweep(const PolicyParameters& params, tasks::Family family,
                                       std::span<const int> sizes, const SweepConfig& config);

} // namespace prorl::eval
