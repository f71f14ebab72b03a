#include "prorl/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "prorl/error.hpp"

namespace prorl {

void AdamWConfig::validate() const {
    const bool ok = std::isfinite(lr) && lr >= 0.0 && beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 &&
                    beta2 < 1.0 && eps > 0.0 && std::isfinite(weight_decay) && weight_decay >= 0.0;
    if (!ok) throw Error(ErrorKind::InvalidConfig, "invalid AdamW hyperparameters");
}

void OptimizerState::reset() noexcept {
    std::fill(m.begin(), m.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    step = 0;
}

bool OptimizerState::is_zero() const noexcept {
    const auto zero = [](double x) { return x == 0.0; };
    return step == 0 && std::all_of(m.begin(), m.end(), zero) && std::all_of(v.begin(), v.end(), zero);
}

void adamw_update(PolicyParameters& params, const ObjectiveGradient& grad, OptimizerState& state) {
    const std::size_t n = params.size();
    if (grad.size() != n || state.m.size() != n || state.v.size() != n) {
        throw Error(ErrorKind::ShapeMismatch, "optimizer, gradient and parameters differ in size");
    }
    const auto g = grad.values();
    if (!std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x); })) {
        throw Error(ErrorKind::NonFiniteGradient, "gradient has non-finite entries; update refused");
    }

    const AdamWConfig& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(c.beta1, t);
    const double bias2 = 1.0 - std::pow(c.beta2, t);

    // Decay is applied multiplicatively first, as in the decoupled form.
    const double decay = 1.0 - c.lr * c.weight_decay;
    auto theta = params.values();
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        theta[i] = theta[i] * decay - c.lr * (m_hat / (std::sqrt(v_hat) + c.eps));
    }
}

} // namespace prorl
