#include "prorl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prorl/error.hpp"
#include "prorl/rng.hpp"

namespace prorl::eval {

namespace {
constexpr std::uint64_t kEvalStreamTag = 0x6576616c;  // "eval"
}

void SampleMatrix::validate() const {
    for (const PromptSamples& p : prompts) {
        if (p.correct > n) {
            throw Error(ErrorKind::ShapeMismatch,
                        "prompt has " + std::to_string(p.correct) + " correct of n = " + std::to_string(n));
        }
        if (!p.rewards.empty() && p.rewards.size() != n) {
            throw Error(ErrorKind::ShapeMismatch, "reward list length differs from n");
        }
    }
}

double SampleMatrix::mean_reward() const {
    double total = 0.0;
    std::size_t count = 0;
    for (const PromptSamples& p : prompts) {
        if (p.rewards.empty()) {
            total += static_cast<double>(p.correct);
            count += n;
        } else {
            for (double r : p.rewards) total += r;
            count += p.rewards.size();
        }
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

SampleMatrix matrix_from_counts(std::size_t n, std::span<const std::size_t> correct) {
    SampleMatrix m;
    m.n = n;
    m.prompts.reserve(correct.size());
    for (std::size_t c : correct) m.prompts.push_back({c, {}});
    m.validate();
    return m;
}

SampleMatrix collect_samples(const PolicyParameters& params, std::span<const tasks::TaskInstance> instances,
                             std::size_t n, double temperature, int max_len, std::uint64_t seed,
                             std::string policy_id) {
    SampleMatrix m;
    m.n = n;
    m.temperature = temperature;
    m.policy_id = std::move(policy_id);
    m.prompts.resize(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        PromptSamples& row = m.prompts[i];
        row.rewards.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            auto rng = make_stream({seed, kEvalStreamTag, i, j});
            const SampleResult s = sample(params, instances[i].prompt, temperature, max_len, rng);
            const tasks::Verdict v = tasks::verify(instances[i], s.sequence.response);
            row.rewards.push_back(v.reward);
            if (v.correct) ++row.correct;
        }
    }
    return m;
}

double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k) {
    if (k < 1 || k > n) {
        throw Error(ErrorKind::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    if (c > n) throw Error(ErrorKind::ShapeMismatch, "c > n");
    if (n - c < k) return 1.0;
    // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
    double miss = 1.0;
    for (std::size_t i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    return 1.0 - miss;
}

Pass1Moments pass1_moments(const SampleMatrix& matrix) {
    Pass1Moments out;
    if (matrix.prompts.empty() || matrix.n == 0) return out;
    const auto count = static_cast<double>(matrix.prompts.size());
    const auto n = static_cast<double>(matrix.n);
    for (const PromptSamples& p : matrix.prompts) out.mean += static_cast<double>(p.correct) / n;
    out.mean /= count;
    for (const PromptSamples& p : matrix.prompts) {
        const double d = static_cast<double>(p.correct) / n - out.mean;
        out.variance += d * d;
    }
    out.variance /= count;
    return out;
}

double pass_at_k_upper_bound(double mean_rho, double var_rho, double k) {
    if (!(mean_rho >= 0.0 && mean_rho <= 1.0) || !(var_rho >= 0.0 && var_rho <= 0.25)) {
        throw Error(ErrorKind::InvalidMoments, "mean must lie in [0,1] and variance in [0,0.25]");
    }
    const double miss = 1.0 - mean_rho;
    return 1.0 - std::pow(miss * miss + var_rho, k / 2.0);
}

namespace {

// Moments can leave their closed ranges by an ulp through rounding.
Pass1Moments clamped_moments(const SampleMatrix& matrix) {
    Pass1Moments m = pass1_moments(matrix);
    m.mean = std::clamp(m.mean, 0.0, 1.0);
    m.variance = std::clamp(m.variance, 0.0, 0.25);
    return m;
}

} // namespace

PassAtKReport pass_at_k_curve(const SampleMatrix& matrix, std::span<const std::size_t> ks) {
    if (matrix.prompts.empty()) throw Error(ErrorKind::EmptyMatrix, "pass@k of an empty matrix");
    matrix.validate();
    PassAtKReport report;
    report.ks.assign(ks.begin(), ks.end());
    report.mean.assign(ks.size(), 0.0);
    report.per_prompt.resize(matrix.prompts.size());
    for (std::size_t i = 0; i < matrix.prompts.size(); ++i) {
        auto& row = report.per_prompt[i];
        row.reserve(ks.size());
        for (std::size_t j = 0; j < ks.size(); ++j) {
            const double p = pass_at_k_unbiased(matrix.n, matrix.prompts[i].correct, ks[j]);
            row.push_back(p);
            report.mean[j] += p;
        }
    }
    const Pass1Moments moments = clamped_moments(matrix);
    for (std::size_t j = 0; j < ks.size(); ++j) {
        report.mean[j] /= static_cast<double>(matrix.prompts.size());
        report.upper_bound.push_back(
            pass_at_k_upper_bound(moments.mean, moments.variance, static_cast<double>(ks[j])));
    }
    return report;
}

Histogram pass1_histogram(const SampleMatrix& matrix, std::size_t bins) {
    if (bins < 2) throw Error(ErrorKind::InvalidConfig, "histogram needs at least two bins");
    matrix.validate();
    Histogram h;
    h.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
    if (matrix.n == 0) return h;
    for (const PromptSamples& p : matrix.prompts) {
        // Integer binning: floor(c / n * bins), with c = n landing in the last bin.
        const std::size_t b = std::min(p.correct * bins / matrix.n, bins - 1);
        ++h.counts[b];
    }
    return h;
}

std::vector<BoundCheck> check_bound(const SampleMatrix& matrix, std::span<const std::size_t> ks) {
    if (matrix.prompts.empty()) throw Error(ErrorKind::EmptyMatrix, "bound check of an empty matrix");
    matrix.validate();
    const Pass1Moments moments = clamped_moments(matrix);
    const auto n = static_cast<double>(matrix.n);
    std::vector<BoundCheck> out;
    out.reserve(ks.size());
    for (std::size_t k : ks) {
        if (k < 1 || k > matrix.n) throw Error(ErrorKind::InvalidK, "k outside [1, n]");
        BoundCheck check;
        check.k = k;
        double total = 0.0;
        for (const PromptSamples& p : matrix.prompts) {
            total += 1.0 - std::pow(1.0 - static_cast<double>(p.correct) / n, static_cast<double>(k));
        }
        check.empirical = total / static_cast<double>(matrix.prompts.size());
        check.bound = pass_at_k_upper_bound(moments.mean, moments.variance, static_cast<double>(k));
        check.holds = check.empirical <= check.bound + kBoundTolerance;
        out.push_back(check);
    }
    return out;
}

std::vector<SweepRow> difficulty_sweep(const PolicyParameters& params, tasks::Family family,
                                       std::span<const int> sizes, const SweepConfig& config) {
    std::vector<SweepRow> rows;
    rows.reserve(sizes.size());
    for (int size : sizes) {
        tasks::DifficultySpec difficulty{size, family == tasks::Family::Arithmetic ? config.modulus : 0};
        tasks::validate_difficulty(family, difficulty);
        std::vector<tasks::TaskInstance> instances;
        instances.reserve(config.prompts);
        for (std::size_t i = 0; i < config.prompts; ++i) {
            instances.push_back(tasks::generate(
                family, difficulty,
                tasks::split_seed(tasks::Split::Test, derive_seed({config.seed, static_cast<std::uint64_t>(size)}), i)));
        }
        SweepRow row;
        row.size = size;
        row.matrix = collect_samples(params, instances, config.samples, config.temperature, config.max_len,
                                     derive_seed({config.seed, static_cast<std::uint64_t>(size), kEvalStreamTag}));
        row.curve = pass_at_k_curve(row.matrix, config.ks);
        row.pass1 = pass1_moments(row.matrix).mean;
        row.mean_reward = row.matrix.mean_reward();
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace prorl::eval
