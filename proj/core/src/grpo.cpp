#include "prorl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prorl/error.hpp"

namespace prorl::grpo {

void ClipConfig::validate() const {
    if (!(eps_low > 0.0 && eps_low < 1.0) || !(eps_high > 0.0) || !std::isfinite(eps_high)) {
        throw Error(ErrorKind::InvalidConfig, "clip requires eps_low in (0,1) and eps_high > 0");
    }
}

void KlConfig::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw Error(ErrorKind::InvalidConfig, "kl beta must be finite and >= 0");
    }
}

bool zero_variance(std::span<const double> rewards) noexcept {
    return std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); });
}

AdvantageSet compute_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2) {
        throw Error(ErrorKind::ShapeMismatch, "advantage group needs at least two rewards");
    }
    if (zero_variance(rewards)) {
        throw Error(ErrorKind::DegenerateGroup, "all rewards in the group are equal");
    }
    const auto n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;
    const double stddev = std::sqrt(var);
    if (!(stddev > 0.0)) {
        throw Error(ErrorKind::DegenerateGroup, "reward spread vanished numerically");
    }

    AdvantageSet out;
    out.mean = mean;
    out.stddev = stddev;
    out.values.reserve(rewards.size());
    for (double r : rewards) out.values.push_back((r - mean) / stddev);
    return out;
}

std::vector<double> importance_ratio(std::span<const double> logp_new, std::span<const double> logp_old) {
    if (logp_new.size() != logp_old.size()) {
        throw Error(ErrorKind::ShapeMismatch, "ratio inputs have lengths " + std::to_string(logp_new.size()) +
                                                  " and " + std::to_string(logp_old.size()));
    }
    std::vector<double> out(logp_new.size());
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::exp(logp_new[t] - logp_old[t]);
    return out;
}

TokenTerms clipped_surrogate(std::span<const double> ratios, double advantage, const ClipConfig& clip) {
    const double lo = 1.0 - clip.eps_low;
    const double hi = 1.0 + clip.eps_high;
    TokenTerms out;
    out.values.resize(ratios.size());
    out.derivs.resize(ratios.size());
    for (std::size_t t = 0; t < ratios.size(); ++t) {
        const double r = ratios[t];
        const double unclipped = r * advantage;
        const double clipped = std::clamp(r, lo, hi) * advantage;
        if (unclipped <= clipped) {
            out.values[t] = unclipped;
            out.derivs[t] = unclipped;  // d(r A)/d(log pi) = r A
        } else {
            out.values[t] = clipped;
            out.derivs[t] = 0.0;
        }
    }
    return out;
}

TokenTerms kl_k3(std::span<const double> logp_theta, std::span<const double> logp_ref) {
    if (logp_theta.size() != logp_ref.size()) {
        throw Error(ErrorKind::ShapeMismatch, "kl inputs have lengths " + std::to_string(logp_theta.size()) +
                                                  " and " + std::to_string(logp_ref.size()));
    }
    TokenTerms out;
    out.values.resize(logp_theta.size());
    out.derivs.resize(logp_theta.size());
    for (std::size_t t = 0; t < logp_theta.size(); ++t) {
        const double log_rho = logp_ref[t] - logp_theta[t];
        const double rho = std::exp(log_rho);
        // expm1(x) - x: accurate near rho = 1 and never below 0 since
        // expm1 is faithfully rounded and x is representable.
        out.values[t] = std::expm1(log_rho) - log_rho;
        out.derivs[t] = 1.0 - rho;
    }
    return out;
}

LossTerms assemble_loss(const TokenTerms& surrogate, const TokenTerms& kl, const KlConfig& kl_config,
                        std::size_t token_count) {
    const std::size_t n = surrogate.values.size();
    if (surrogate.derivs.size() != n || kl.values.size() != n || kl.derivs.size() != n) {
        throw Error(ErrorKind::ShapeMismatch, "surrogate and kl token counts differ");
    }
    if (token_count == 0) {
        if (n != 0) throw Error(ErrorKind::ShapeMismatch, "token_count is zero for a nonempty minibatch");
        return {};
    }
    const auto denom = static_cast<double>(token_count);
    const double beta = kl_config.beta;

    double surrogate_sum = 0.0;
    double kl_sum = 0.0;
    LossTerms out;
    out.derivs.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        surrogate_sum += surrogate.values[t];
        kl_sum += kl.values[t];
        out.derivs[t] = (-surrogate.derivs[t] + beta * kl.derivs[t]) / denom;
    }
    out.loss = -(surrogate_sum / denom) + beta * (kl_sum / denom);
    return out;
}

} // namespace prorl::grpo
