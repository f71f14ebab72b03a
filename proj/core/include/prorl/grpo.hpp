#pragma once

#include <span>
#include <vector>

namespace prorl::grpo {

/// Decoupled clip window [1 - eps_low, 1 + eps_high].
struct ClipConfig {
    double eps_low = 0.2;
    double eps_high = 0.4;

    /// Throws InvalidConfig unless eps_low in (0, 1) and eps_high > 0.
    void validate() const;
    friend bool operator==(const ClipConfig&, const ClipConfig&) = default;
};

struct KlConfig {
    /// Penalty weight; 0 disables the KL term.
    double beta = 1e-3;

    void validate() const;
    friend bool operator==(const KlConfig&, const KlConfig&) = default;
};

struct AdvantageSet {
    std::vector<double> values;
    double mean = 0.0;
    /// Population standard deviation of the rewards.
    double stddev = 0.0;
};

/// Per-token objective values and their derivatives w.r.t. log pi_theta.
struct TokenTerms {
    std::vector<double> values;
    std::vector<double> derivs;
};

struct LossTerms {
    double loss = 0.0;
    /// d(loss)/d(log pi_theta(token_t)), one per token.
    std::vector<double> derivs;
};

/// True when every reward equals the first (population std exactly 0).
bool zero_variance(std::span<const double> rewards) noexcept;

/// A_i = (R_i - mean) / std with the population std.
/// Throws ShapeMismatch for fewer than two rewards and DegenerateGroup when
/// all rewards are equal.
AdvantageSet compute_advantages(std::span<const double> rewards);

/// r_t = exp(logp_new_t - logp_old_t). Throws ShapeMismatch on length mismatch.
std::vector<double> importance_ratio(std::span<const double> logp_new, std::span<const double> logp_old);

/// value_t = min(r_t A, clip(r_t, 1 - eps_low, 1 + eps_high) A). The
/// derivative is r_t A when the unclipped branch is selected (ties included)
/// and 0 otherwise.
TokenTerms clipped_surrogate(std::span<const double> ratios, double advantage, const ClipConfig& clip);

/// k3 estimator with rho_t = pi_ref / pi_theta:
/// value_t = rho_t - log rho_t - 1, d/d(log pi_theta) = 1 - rho_t.
TokenTerms kl_k3(std::span<const double> logp_theta, std::span<const double> logp_ref);

/// loss = -mean_t(surrogate_t) + beta * mean_t(kl_t), both means taken over
/// `token_count` tokens (the whole minibatch).
LossTerms assemble_loss(const TokenTerms& surrogate, const TokenTerms& kl, const KlConfig& kl_config,
                        std::size_t token_count);

} // namespace prorl::grpo
