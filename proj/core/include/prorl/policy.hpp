#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "prorl/vocabulary.hpp"

namespace prorl {

/// Shape of the fixed-window MLP policy.
///
/// The next-token distribution at every position is
///   softmax(W_out · tanh(W_mix · [e(t-w), ..., e(t-1)] + b_mix) + b_out)
/// where e(.) are embedding rows and positions before the start of the
/// prompt read as PAD.
struct ModelDims {
    int vocab_size = symbols::kStandardSize;
    int embed_dim = 16;
    int hidden_dim = 32;
    int window = 4;

    static constexpr std::size_t kMaxParameters = 100'000;

    std::size_t parameter_count() const noexcept;
    /// Throws InvalidConfig when a dimension is non-positive, the vocabulary
    /// is outside [8, 64], or the parameter count exceeds kMaxParameters.
    void validate() const;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Offsets of each weight matrix inside the flat parameter vector, in
/// checkpoint order: embedding (V x d), mix weight (h x w*d), mix bias (h),
/// output weight (V x h), output bias (V). All matrices are row-major.
struct ParameterLayout {
    explicit ParameterLayout(const ModelDims& dims) noexcept;

    std::size_t embedding;
    std::size_t mix_weight;
    std::size_t mix_bias;
    std::size_t out_weight;
    std::size_t out_bias;
    std::size_t total;
};

/// Flat double-precision storage shaped by ModelDims. Tagged so parameters and
/// gradients cannot be mixed up at call sites.
template <class Tag>
class ParameterBlock {
public:
    explicit ParameterBlock(const ModelDims& dims)
        : dims_(dims), values_((dims.validate(), dims.parameter_count()), 0.0) {}

    const ModelDims& dims() const noexcept { return dims_; }
    ParameterLayout layout() const noexcept { return ParameterLayout(dims_); }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<double> embedding() noexcept { return slice(layout().embedding, layout().mix_weight); }
    std::span<double> mix_weight() noexcept { return slice(layout().mix_weight, layout().mix_bias); }
    std::span<double> mix_bias() noexcept { return slice(layout().mix_bias, layout().out_weight); }
    std::span<double> out_weight() noexcept { return slice(layout().out_weight, layout().out_bias); }
    std::span<double> out_bias() noexcept { return slice(layout().out_bias, layout().total); }

    std::span<const double> embedding() const noexcept { return slice(layout().embedding, layout().mix_weight); }
    std::span<const double> mix_weight() const noexcept { return slice(layout().mix_weight, layout().mix_bias); }
    std::span<const double> mix_bias() const noexcept { return slice(layout().mix_bias, layout().out_weight); }
    std::span<const double> out_weight() const noexcept { return slice(layout().out_weight, layout().out_bias); }
    std::span<const double> out_bias() const noexcept { return slice(layout().out_bias, layout().total); }

    bool all_finite() const noexcept {
        for (double v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const ParameterBlock&, const ParameterBlock&) = default;

private:
    std::span<double> slice(std::size_t b, std::size_t e) noexcept { return {values_.data() + b, e - b}; }
    std::span<const double> slice(std::size_t b, std::size_t e) const noexcept { return {values_.data() + b, e - b}; }

    ModelDims dims_;
    std::vector<double> values_;
};

using PolicyParameters = ParameterBlock<struct PolicyParametersTag>;
using ObjectiveGradient = ParameterBlock<struct ObjectiveGradientTag>;

/// Gaussian initialisation with the given standard deviation, seeded.
PolicyParameters init_gaussian(const ModelDims& dims, double stddev, std::uint64_t seed);

struct TokenSequence {
    std::vector<TokenId> prompt;
    std::vector<TokenId> response;
    /// True iff the response ends with EOS within the length cap.
    bool terminated = false;

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// One log-probability per response token, each <= 0.
struct PerTokenLogProbs {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double total() const noexcept;

    friend bool operator==(const PerTokenLogProbs&, const PerTokenLogProbs&) = default;
};

/// Log-probabilities of every vocabulary entry after `context` (only the
/// last `window` tokens matter; missing positions read as PAD).
std::vector<double> next_token_logprobs(const PolicyParameters& params,
                                        std::span<const TokenId> context);

/// Exact per-token log-probabilities of `seq.response` given `seq.prompt`.
/// Throws InvalidToken for ids outside the vocabulary.
PerTokenLogProbs logprobs(const PolicyParameters& params, const TokenSequence& seq);

struct SampleResult {
    TokenSequence sequence;
    /// Temperature-1 log-probabilities of the drawn tokens (the policy itself,
    /// not the tempered proposal).
    PerTokenLogProbs logprobs;
    /// Temperature-1 entropy of the next-token distribution at each drawn position.
    std::vector<double> entropy;
};

/// Draws a response from softmax(logits / temperature), stopping at EOS or
/// after max_len tokens.
SampleResult sample(const PolicyParameters& params, std::span<const TokenId> prompt,
                    double temperature, int max_len, std::mt19937_64& rng);

/// Mean over every response position of the batch of the policy's
/// (temperature-1) next-token entropy. Throws EmptyBatch when there are no
/// sequences or no response tokens at all.
double mean_token_entropy(const PolicyParameters& params, std::span<const TokenSequence> batch);

struct WeightedSequence {
    const TokenSequence* sequence;
    /// d(objective)/d(log pi(token_t)), one per response token.
    std::span<const double> weights;
};

/// Reverse-mode gradient of sum_i sum_t weight_{i,t} * log pi(token_{i,t}).
/// Throws ShapeMismatch when a weight list does not match its response.
ObjectiveGradient grad_weighted_logprob(const PolicyParameters& params,
                                        std::span<const WeightedSequence> batch);

} // namespace prorl
