#pragma once

// Test-side oracles. Each one recomputes a quantity through a code path that
// shares nothing with the library implementation it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "prorl/policy.hpp"
#include "prorl/vocabulary.hpp"

namespace prorl::oracle {

/// Scalar long-double forward pass, one position at a time, read straight off
/// the flat parameter vector.
inline std::vector<long double> logprobs_ld(const PolicyParameters& p, const TokenSequence& seq) {
    const ModelDims& dims = p.dims();
    const int V = dims.vocab_size, d = dims.embed_dim, h = dims.hidden_dim, w = dims.window;
    const std::span<const double> theta = p.values();
    const std::size_t off_mix = static_cast<std::size_t>(V * d);
    const std::size_t off_bmix = off_mix + static_cast<std::size_t>(h * w * d);
    const std::size_t off_out = off_bmix + static_cast<std::size_t>(h);
    const std::size_t off_bout = off_out + static_cast<std::size_t>(V * h);

    std::vector<TokenId> all(seq.prompt);
    all.insert(all.end(), seq.response.begin(), seq.response.end());
    std::vector<long double> out;
    for (std::size_t t = 0; t < seq.response.size(); ++t) {
        const long pos = static_cast<long>(seq.prompt.size() + t);
        std::vector<long double> x;
        for (long j = pos - w; j < pos; ++j) {
            const TokenId tok = j < 0 ? Vocabulary::kPad : all[static_cast<std::size_t>(j)];
            for (int k = 0; k < d; ++k) x.push_back(theta[static_cast<std::size_t>(tok * d + k)]);
        }
        std::vector<long double> hid(static_cast<std::size_t>(h));
        for (int i = 0; i < h; ++i) {
            long double z = theta[off_bmix + static_cast<std::size_t>(i)];
            for (int k = 0; k < w * d; ++k) z += theta[off_mix + static_cast<std::size_t>(i * w * d + k)] * x[static_cast<std::size_t>(k)];
            hid[static_cast<std::size_t>(i)] = std::tanh(z);
        }
        std::vector<long double> logit(static_cast<std::size_t>(V));
        for (int o = 0; o < V; ++o) {
            long double z = theta[off_bout + static_cast<std::size_t>(o)];
            for (int i = 0; i < h; ++i) z += theta[off_out + static_cast<std::size_t>(o * h + i)] * hid[static_cast<std::size_t>(i)];
            logit[static_cast<std::size_t>(o)] = z;
        }
        const long double mx = *std::max_element(logit.begin(), logit.end());
        long double s = 0.0L;
        for (long double z : logit) s += std::exp(z - mx);
        out.push_back(logit[static_cast<std::size_t>(seq.response[t])] - mx - std::log(s));
    }
    return out;
}

/// Central differences of f with respect to every parameter.
inline std::vector<double> central_differences(const PolicyParameters& base,
                                               const std::function<double(const PolicyParameters&)>& f,
                                               double step = 1e-5) {
    PolicyParameters p = base;
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p.values()[i];
        p.values()[i] = keep + step;
        const double up = f(p);
        p.values()[i] = keep - step;
        const double down = f(p);
        p.values()[i] = keep;
        out[i] = (up - down) / (2.0 * step);
    }
    return out;
}

/// Relative error with an absolute floor: |a - b| / max(|a|, |b|), or 0 when
/// both sides are within `floor` of each other.
inline double relative_error(double a, double b, double floor = 1e-8) {
    const double diff = std::fabs(a - b);
    if (diff <= floor) return 0.0;
    return diff / std::max(std::fabs(a), std::fabs(b));
}

/// Exact probability that a uniform token model over `vocab` ids emits a
/// response whose first tagged span equals `answer`, with at most `max_len`
/// tokens and generation stopping at EOS. Dynamic program over the states of
/// a tag scanner: outside the tags, or inside with j tokens matched so far
/// (j = answer.size() + 1 marks a mismatch).
inline double uniform_chance_rate(std::span<const TokenId> answer, int vocab, int max_len) {
    const std::size_t L = answer.size();
    const std::size_t mismatch = L + 1;
    const double u = 1.0 / vocab;
    double outside = 1.0;
    std::vector<double> inside(L + 2, 0.0);
    double success = 0.0;
    for (int t = 0; t < max_len; ++t) {
        double next_outside = 0.0;
        std::vector<double> next_inside(L + 2, 0.0);
        for (int tok = 0; tok < vocab; ++tok) {
            // Outside the tags: EOS ends the response unparsed, OPEN enters.
            if (tok == Vocabulary::kAnswerOpen) next_inside[0] += outside * u;
            else if (tok != Vocabulary::kEos) next_outside += outside * u;
            for (std::size_t j = 0; j <= mismatch; ++j) {
                const double mass = inside[j] * u;
                if (mass == 0.0) continue;
                if (tok == Vocabulary::kAnswerClose) {
                    if (j == L) success += mass;
                } else if (tok == Vocabulary::kEos || tok == Vocabulary::kAnswerOpen) {
                    // unterminated or nested tag: parse failure
                } else if (j < L && tok == answer[j]) {
                    next_inside[j + 1] += mass;
                } else {
                    next_inside[mismatch] += mass;
                }
            }
        }
        outside = next_outside;
        inside = std::move(next_inside);
    }
    return success;
}

/// pass@k by walking every size-k subset of n samples whose first c are
/// correct; returns (subsets containing a correct sample, total subsets).
inline std::pair<std::uint64_t, std::uint64_t> pass_at_k_subsets(int n, int c, int k) {
    std::uint64_t hit = 0, total = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (std::popcount(mask) != k) continue;
        ++total;
        if ((mask & ((1u << c) - 1u)) != 0) ++hit;
    }
    return {hit, total};
}

/// Exact KL(p || q) over a finite support.
inline double kl_exact(std::span<const double> p, std::span<const double> q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

} // namespace prorl::oracle
