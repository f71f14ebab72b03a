#include "prorl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "prorl/error.hpp"

namespace prorl {

std::size_t ModelDims::parameter_count() const noexcept {
    const auto v = static_cast<std::size_t>(std::max(vocab_size, 0));
    const auto d = static_cast<std::size_t>(std::max(embed_dim, 0));
    const auto h = static_cast<std::size_t>(std::max(hidden_dim, 0));
    const auto w = static_cast<std::size_t>(std::max(window, 0));
    return v * d + h * w * d + h + v * h + v;
}

void ModelDims::validate() const {
    static_cast<void>(Vocabulary{vocab_size});
    if (embed_dim < 1 || hidden_dim < 1 || window < 1) {
        throw Error(ErrorKind::InvalidConfig, "model dimensions must be positive");
    }
    if (parameter_count() > kMaxParameters) {
        throw Error(ErrorKind::InvalidConfig,
                    "parameter count " + std::to_string(parameter_count()) + " exceeds 100000");
    }
}

ParameterLayout::ParameterLayout(const ModelDims& dims) noexcept {
    const auto v = static_cast<std::size_t>(dims.vocab_size);
    const auto d = static_cast<std::size_t>(dims.embed_dim);
    const auto h = static_cast<std::size_t>(dims.hidden_dim);
    const auto w = static_cast<std::size_t>(dims.window);
    embedding = 0;
    mix_weight = embedding + v * d;
    mix_bias = mix_weight + h * w * d;
    out_weight = mix_bias + h;
    out_bias = out_weight + v * h;
    total = out_bias + v;
}

PolicyParameters init_gaussian(const ModelDims& dims, double stddev, std::uint64_t seed) {
    PolicyParameters params(dims);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    for (double& x : params.values()) x = normal(rng);
    return params;
}

double PerTokenLogProbs::total() const noexcept {
    return std::accumulate(values.begin(), values.end(), 0.0);
}

namespace {

/// Activations of one forward pass at a single position.
struct Activations {
    std::vector<TokenId> window;
    std::vector<double> input;   // w*d
    std::vector<double> hidden;  // h, post-tanh
    std::vector<double> logits;  // V
    std::vector<double> logp;    // V

    explicit Activations(const ModelDims& dims)
        : window(static_cast<std::size_t>(dims.window)),
          input(static_cast<std::size_t>(dims.window * dims.embed_dim)),
          hidden(static_cast<std::size_t>(dims.hidden_dim)),
          logits(static_cast<std::size_t>(dims.vocab_size)),
          logp(static_cast<std::size_t>(dims.vocab_size)) {}
};

void check_tokens(const ModelDims& dims, std::span<const TokenId> tokens) {
    for (TokenId t : tokens) {
        if (t < 0 || t >= dims.vocab_size) {
            throw Error(ErrorKind::InvalidToken,
                        "token id " + std::to_string(t) + " outside vocabulary of size " +
                            std::to_string(dims.vocab_size));
        }
    }
}

/// Fills `act.window` with the `w` tokens preceding index `pos` of the
/// concatenation prompt ++ response.
void gather_window(std::span<const TokenId> prompt, std::span<const TokenId> response,
                   std::size_t pos, Activations& act) {
    const std::size_t w = act.window.size();
    for (std::size_t j = 0; j < w; ++j) {
        // Slot j holds the token at absolute index pos - w + j.
        const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(pos) - static_cast<std::ptrdiff_t>(w) +
                                   static_cast<std::ptrdiff_t>(j);
        if (idx < 0) {
            act.window[j] = Vocabulary::kPad;
        } else if (static_cast<std::size_t>(idx) < prompt.size()) {
            act.window[j] = prompt[static_cast<std::size_t>(idx)];
        } else {
            act.window[j] = response[static_cast<std::size_t>(idx) - prompt.size()];
        }
    }
}

void forward(const PolicyParameters& params, Activations& act) {
    const ModelDims& dims = params.dims();
    const auto d = static_cast<std::size_t>(dims.embed_dim);
    const auto h = static_cast<std::size_t>(dims.hidden_dim);
    const auto v = static_cast<std::size_t>(dims.vocab_size);
    const std::size_t in = act.input.size();

    const auto emb = params.embedding();
    for (std::size_t j = 0; j < act.window.size(); ++j) {
        const auto row = static_cast<std::size_t>(act.window[j]) * d;
        std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(row), d,
                    act.input.begin() + static_cast<std::ptrdiff_t>(j * d));
    }

    const auto wm = params.mix_weight();
    const auto bm = params.mix_bias();
    for (std::size_t i = 0; i < h; ++i) {
        const double* row = wm.data() + i * in;
        double acc = bm[i];
        for (std::size_t k = 0; k < in; ++k) acc += row[k] * act.input[k];
        act.hidden[i] = std::tanh(acc);
    }

    const auto wo = params.out_weight();
    const auto bo = params.out_bias();
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < v; ++o) {
        const double* row = wo.data() + o * h;
        double acc = bo[o];
        for (std::size_t i = 0; i < h; ++i) acc += row[i] * act.hidden[i];
        act.logits[o] = acc;
        max_logit = std::max(max_logit, acc);
    }

    double sum = 0.0;
    for (std::size_t o = 0; o < v; ++o) sum += std::exp(act.logits[o] - max_logit);
    const double lse = max_logit + std::log(sum);
    for (std::size_t o = 0; o < v; ++o) act.logp[o] = act.logits[o] - lse;
}

double entropy_of(std::span<const double> logp) {
    double h = 0.0;
    for (double lp : logp) {
        const double p = std::exp(lp);
        if (p > 0.0) h -= p * lp;
    }
    return h;
}

} // namespace

std::vector<double> next_token_logprobs(const PolicyParameters& params,
                                        std::span<const TokenId> context) {
    check_tokens(params.dims(), context);
    Activations act(params.dims());
    gather_window(context, {}, context.size(), act);
    forward(params, act);
    return act.logp;
}

PerTokenLogProbs logprobs(const PolicyParameters& params, const TokenSequence& seq) {
    check_tokens(params.dims(), seq.prompt);
    check_tokens(params.dims(), seq.response);
    PerTokenLogProbs out;
    out.values.reserve(seq.response.size());
    Activations act(params.dims());
    for (std::size_t t = 0; t < seq.response.size(); ++t) {
        gather_window(seq.prompt, seq.response, seq.prompt.size() + t, act);
        forward(params, act);
        out.values.push_back(act.logp[static_cast<std::size_t>(seq.response[t])]);
    }
    return out;
}

SampleResult sample(const PolicyParameters& params, std::span<const TokenId> prompt,
                    double temperature, int max_len, std::mt19937_64& rng) {
    if (!(temperature > 0.0) || max_len < 1) {
        throw Error(ErrorKind::InvalidConfig, "sample requires temperature > 0 and max_len >= 1");
    }
    check_tokens(params.dims(), prompt);

    SampleResult result;
    result.sequence.prompt.assign(prompt.begin(), prompt.end());
    auto& response = result.sequence.response;
    response.reserve(static_cast<std::size_t>(max_len));
    result.logprobs.values.reserve(static_cast<std::size_t>(max_len));
    result.entropy.reserve(static_cast<std::size_t>(max_len));

    Activations act(params.dims());
    const auto v = static_cast<std::size_t>(params.dims().vocab_size);
    std::vector<double> weights(v);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    for (int t = 0; t < max_len; ++t) {
        gather_window(prompt, response, prompt.size() + response.size(), act);
        forward(params, act);

        // Tempered proposal: probabilities proportional to exp(logp / T).
        double max_scaled = -std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < v; ++o) max_scaled = std::max(max_scaled, act.logp[o] / temperature);
        double total = 0.0;
        for (std::size_t o = 0; o < v; ++o) {
            weights[o] = std::exp(act.logp[o] / temperature - max_scaled);
            total += weights[o];
        }
        const double u = uniform(rng) * total;
        std::size_t pick = v - 1;
        double cumulative = 0.0;
        for (std::size_t o = 0; o < v; ++o) {
            cumulative += weights[o];
            if (u < cumulative) {
                pick = o;
                break;
            }
        }
        // Guard against the rounding tail selecting a zero-weight entry.
        while (weights[pick] == 0.0 && pick > 0) --pick;

        const auto token = static_cast<TokenId>(pick);
        response.push_back(token);
        result.logprobs.values.push_back(act.logp[pick]);
        result.entropy.push_back(entropy_of(act.logp));
        if (token == Vocabulary::kEos) {
            result.sequence.terminated = true;
            break;
        }
    }
    return result;
}

double mean_token_entropy(const PolicyParameters& params, std::span<const TokenSequence> batch) {
    if (batch.empty()) throw Error(ErrorKind::EmptyBatch, "entropy of an empty batch");
    Activations act(params.dims());
    double total = 0.0;
    std::size_t positions = 0;
    for (const TokenSequence& seq : batch) {
        check_tokens(params.dims(), seq.prompt);
        check_tokens(params.dims(), seq.response);
        for (std::size_t t = 0; t < seq.response.size(); ++t) {
            gather_window(seq.prompt, seq.response, seq.prompt.size() + t, act);
            forward(params, act);
            total += entropy_of(act.logp);
            ++positions;
        }
    }
    if (positions == 0) throw Error(ErrorKind::EmptyBatch, "batch has no response tokens");
    return total / static_cast<double>(positions);
}

ObjectiveGradient grad_weighted_logprob(const PolicyParameters& params,
                                        std::span<const WeightedSequence> batch) {
    const ModelDims& dims = params.dims();
    const auto d = static_cast<std::size_t>(dims.embed_dim);
    const auto h = static_cast<std::size_t>(dims.hidden_dim);
    const auto v = static_cast<std::size_t>(dims.vocab_size);
    const auto in = static_cast<std::size_t>(dims.window) * d;

    ObjectiveGradient grad(dims);
    auto g_emb = grad.embedding();
    auto g_wm = grad.mix_weight();
    auto g_bm = grad.mix_bias();
    auto g_wo = grad.out_weight();
    auto g_bo = grad.out_bias();
    const auto wm = params.mix_weight();
    const auto wo = params.out_weight();

    Activations act(dims);
    std::vector<double> d_logits(v);
    std::vector<double> d_pre(h);
    std::vector<double> d_input(in);

    for (const WeightedSequence& item : batch) {
        const TokenSequence& seq = *item.sequence;
        if (item.weights.size() != seq.response.size()) {
            throw Error(ErrorKind::ShapeMismatch,
                        "got " + std::to_string(item.weights.size()) + " weights for " +
                            std::to_string(seq.response.size()) + " response tokens");
        }
        check_tokens(dims, seq.prompt);
        check_tokens(dims, seq.response);

        for (std::size_t t = 0; t < seq.response.size(); ++t) {
            const double weight = item.weights[t];
            if (weight == 0.0) continue;
            gather_window(seq.prompt, seq.response, seq.prompt.size() + t, act);
            forward(params, act);

            // d log p_y / d logits = onehot(y) - softmax
            const auto y = static_cast<std::size_t>(seq.response[t]);
            for (std::size_t o = 0; o < v; ++o) d_logits[o] = -weight * std::exp(act.logp[o]);
            d_logits[y] += weight;

            std::fill(d_pre.begin(), d_pre.end(), 0.0);
            for (std::size_t o = 0; o < v; ++o) {
                const double g = d_logits[o];
                g_bo[o] += g;
                double* g_row = g_wo.data() + o * h;
                const double* w_row = wo.data() + o * h;
                for (std::size_t i = 0; i < h; ++i) {
                    g_row[i] += g * act.hidden[i];
                    d_pre[i] += g * w_row[i];
                }
            }
            for (std::size_t i = 0; i < h; ++i) d_pre[i] *= 1.0 - act.hidden[i] * act.hidden[i];

            std::fill(d_input.begin(), d_input.end(), 0.0);
            for (std::size_t i = 0; i < h; ++i) {
                const double g = d_pre[i];
                g_bm[i] += g;
                double* g_row = g_wm.data() + i * in;
                const double* w_row = wm.data() + i * in;
                for (std::size_t k = 0; k < in; ++k) {
                    g_row[k] += g * act.input[k];
                    d_input[k] += g * w_row[k];
                }
            }
            for (std::size_t j = 0; j < act.window.size(); ++j) {
                double* g_row = g_emb.data() + static_cast<std::size_t>(act.window[j]) * d;
                for (std::size_t k = 0; k < d; ++k) g_row[k] += d_input[j * d + k];
            }
        }
    }
    return grad;
}

} // namespace prorl
