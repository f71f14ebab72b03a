#pragma once

#include <cstdint>
#include <vector>

#include "prorl/policy.hpp"

namespace prorl {

struct AdamWConfig {
    double lr = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
    friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

/// Moment accumulators for decoupled-weight-decay Adam, shaped like the policy.
struct OptimizerState {
    AdamWConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    OptimizerState() = default;
    OptimizerState(const AdamWConfig& cfg, std::size_t parameter_count)
        : config(cfg), m(parameter_count, 0.0), v(parameter_count, 0.0) {}

    /// Zero both moments and the step counter.
    void reset() noexcept;
    bool is_zero() const noexcept;

    friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One bias-corrected AdamW step:
///   theta <- theta * (1 - lr * weight_decay) - lr * m_hat / (sqrt(v_hat) + eps)
/// Throws ShapeMismatch on size mismatch and NonFiniteGradient (leaving both
/// params and state untouched) when any gradient entry is not finite.
void adamw_update(PolicyParameters& params, const ObjectiveGradient& grad, OptimizerState& state);

} // namespace prorl
