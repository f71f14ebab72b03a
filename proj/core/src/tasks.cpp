#include "prorl/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "prorl/error.hpp"
#include "prorl/rng.hpp"

namespace prorl::tasks {

using namespace symbols;

std::string_view family_name(Family family) noexcept {
    switch (family) {
    case Family::Arithmetic: return "arithmetic";
    case Family::Reversal: return "reversal";
    case Family::Parentheses: return "parentheses";
    case Family::GraphColor: return "graph_color";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    for (Family f : kAllFamilies) {
        if (family_name(f) == name) return f;
    }
    throw Error(ErrorKind::InvalidConfig, "unknown task family '" + std::string(name) + "'");
}

bool is_continuous(Family family) noexcept { return family == Family::GraphColor; }

DifficultyCaps difficulty_caps(Family family) noexcept {
    switch (family) {
    case Family::Arithmetic: return {1, 6, 2, 11};
    case Family::Reversal: return {1, 8, 0, 0};
    case Family::Parentheses: return {1, 12, 0, 0};
    case Family::GraphColor: return {2, 12, 0, 0};
    }
    return {0, 0, 0, 0};
}

DifficultySpec default_difficulty(Family family) noexcept {
    switch (family) {
    case Family::Arithmetic: return {2, 7};
    case Family::Reversal: return {5, 0};
    case Family::Parentheses: return {6, 0};
    case Family::GraphColor: return {6, 0};
    }
    return {};
}

void validate_difficulty(Family family, const DifficultySpec& difficulty) {
    const DifficultyCaps caps = difficulty_caps(family);
    const auto fail = [&](const std::string& what) {
        throw Error(ErrorKind::InvalidDifficulty, std::string(family_name(family)) + ": " + what);
    };
    if (difficulty.size < caps.min_size || difficulty.size > caps.max_size) {
        fail("size " + std::to_string(difficulty.size) + " outside [" + std::to_string(caps.min_size) + ", " +
             std::to_string(caps.max_size) + "]");
    }
    if (difficulty.modulus < caps.min_modulus || difficulty.modulus > caps.max_modulus) {
        fail("modulus " + std::to_string(difficulty.modulus) + " outside [" + std::to_string(caps.min_modulus) +
             ", " + std::to_string(caps.max_modulus) + "]");
    }
}

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

void make_arithmetic(TaskInstance& inst, std::mt19937_64& rng) {
    const int m = inst.difficulty.modulus;
    // Addition only. With '*' in the mix a zero operand annihilates the chain
    // and training collapses onto predicting 0.
    static constexpr TokenId kOps[] = {kPlus};
    inst.prompt = {kMod, numeral(m)};
    int acc = uniform_int(rng, 0, m - 1);
    inst.prompt.push_back(numeral(acc));
    for (int i = 1; i < inst.difficulty.size; ++i) {
        const TokenId op = kOps[uniform_int(rng, 0, 0)];
        const int operand = uniform_int(rng, 0, m - 1);
        inst.prompt.push_back(op);
        inst.prompt.push_back(numeral(operand));
        if (op == kPlus) acc = (acc + operand) % m;
        else if (op == kMinus) acc = ((acc - operand) % m + m) % m;
        else acc = (acc * operand) % m;
    }
    inst.answer = {numeral(acc)};
}

void make_reversal(TaskInstance& inst, std::mt19937_64& rng) {
    for (int i = 0; i < inst.difficulty.size; ++i) inst.prompt.push_back(letter(uniform_int(rng, 0, kLetterCount - 1)));
    inst.answer.assign(inst.prompt.rbegin(), inst.prompt.rend());
}

void make_parentheses(TaskInstance& inst, std::mt19937_64& rng) {
    const int n = inst.difficulty.size;
    int depth = 0;
    do {
        inst.prompt.clear();
        depth = 0;
        for (int i = 0; i < n; ++i) {
            const bool open = depth == 0 || uniform_int(rng, 0, 1) == 0;
            inst.prompt.push_back(open ? kLParen : kRParen);
            depth += open ? 1 : -1;
        }
    } while (depth == 0);
    inst.answer.assign(static_cast<std::size_t>(depth), kRParen);
}

// Answer-first: node i gets colour i % 2, the path 0-1-...-(N-1) is always
// present, and the remaining edges are drawn among opposite-colour pairs.
void make_graph(TaskInstance& inst, std::mt19937_64& rng) {
    const int n = inst.difficulty.size;
    inst.node_count = n;
    for (int i = 0; i + 1 < n; ++i) inst.edges.push_back({i, i + 1});

    std::vector<Edge> chords;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 3; j < n; j += 2) chords.push_back({i, j});
    }
    const int max_edges = ((n + 1) / 2) * (n / 2);
    const int target = std::min(n + 1, max_edges);
    std::shuffle(chords.begin(), chords.end(), rng);
    for (const Edge& e : chords) {
        if (static_cast<int>(inst.edges.size()) >= target) break;
        inst.edges.push_back(e);
    }
    std::shuffle(inst.edges.begin(), inst.edges.end(), rng);
    for (Edge& e : inst.edges) {
        if (uniform_int(rng, 0, 1) == 1) std::swap(e.u, e.v);
        inst.prompt.push_back(numeral(e.u));
        inst.prompt.push_back(numeral(e.v));
    }
    for (int i = 0; i < n; ++i) inst.answer.push_back(color(i % 2));
}

Verdict verify_graph(const TaskInstance& inst, const std::vector<TokenId>& span) {
    if (inst.node_count < 2 || inst.edges.empty()) {
        throw Error(ErrorKind::VerifierError, "graph instance without nodes or edges");
    }
    for (const Edge& e : inst.edges) {
        if (e.u < 0 || e.v < 0 || e.u >= inst.node_count || e.v >= inst.node_count || e.u == e.v) {
            throw Error(ErrorKind::VerifierError, "graph instance edge out of range");
        }
    }
    const auto assigned = static_cast<int>(span.size());
    if (assigned == 0 || assigned > inst.node_count ||
        !std::all_of(span.begin(), span.end(), [](TokenId t) { return is_color(t); })) {
        return {};
    }
    // A prefix assignment colours nodes 0..assigned-1; edges touching an
    // uncoloured node count as unsatisfied.
    int satisfied = 0;
    for (const Edge& e : inst.edges) {
        if (e.u < assigned && e.v < assigned &&
            span[static_cast<std::size_t>(e.u)] != span[static_cast<std::size_t>(e.v)]) {
            ++satisfied;
        }
    }
    const auto total = static_cast<int>(inst.edges.size());
    Verdict v;
    v.parse_ok = true;
    v.correct = satisfied == total;
    v.reward = v.correct ? 1.0 : static_cast<double>(satisfied) / static_cast<double>(total);
    return v;
}

} // namespace

TaskInstance generate(Family family, const DifficultySpec& difficulty, std::uint64_t seed) {
    validate_difficulty(family, difficulty);
    TaskInstance inst;
    inst.family = family;
    inst.difficulty = difficulty;
    inst.seed = seed;
    auto rng = make_stream({static_cast<std::uint64_t>(family), static_cast<std::uint64_t>(difficulty.size),
                            static_cast<std::uint64_t>(difficulty.modulus), seed});
    switch (family) {
    case Family::Arithmetic: make_arithmetic(inst, rng); break;
    case Family::Reversal: make_reversal(inst, rng); break;
    case Family::Parentheses: make_parentheses(inst, rng); break;
    case Family::GraphColor: make_graph(inst, rng); break;
    }
    return inst;
}

std::optional<std::vector<TokenId>> parse_answer(std::span<const TokenId> response) {
    auto end = std::find(response.begin(), response.end(), Vocabulary::kEos);
    auto open = std::find(response.begin(), end, Vocabulary::kAnswerOpen);
    if (open == end) return std::nullopt;
    auto close = std::find(open + 1, end, Vocabulary::kAnswerClose);
    if (close == end) return std::nullopt;
    if (std::find(open + 1, close, Vocabulary::kAnswerOpen) != close) return std::nullopt;
    return std::vector<TokenId>(open + 1, close);
}

Verdict verify(const TaskInstance& instance, std::span<const TokenId> response) {
    if (instance.answer.empty()) throw Error(ErrorKind::VerifierError, "instance has no ground truth");
    const auto parsed = parse_answer(response);
    if (instance.family == Family::GraphColor) {
        if (!parsed) {
            verify_graph(instance, {});  // still validates the instance
            return {};
        }
        return verify_graph(instance, *parsed);
    }
    if (!parsed) return {};
    Verdict v;
    v.parse_ok = true;
    v.correct = *parsed == instance.answer;
    v.reward = v.correct ? 1.0 : 0.0;
    return v;
}

std::vector<TokenId> tagged_answer(const TaskInstance& instance) {
    std::vector<TokenId> out;
    out.reserve(instance.answer.size() + 3);
    out.push_back(Vocabulary::kAnswerOpen);
    out.insert(out.end(), instance.answer.begin(), instance.answer.end());
    out.push_back(Vocabulary::kAnswerClose);
    out.push_back(Vocabulary::kEos);
    return out;
}

std::uint64_t split_seed(Split split, std::uint64_t master_seed, std::uint64_t index) noexcept {
    const std::uint64_t low = derive_seed({master_seed, static_cast<std::uint64_t>(split), index}) >> 2;
    return (static_cast<std::uint64_t>(split) << 62) | low;
}

Split split_of_seed(std::uint64_t seed) noexcept { return static_cast<Split>(seed >> 62); }

Splits make_splits(Family family, const DifficultySpec& difficulty, const SplitCounts& counts,
                   std::uint64_t master_seed) {
    validate_difficulty(family, difficulty);
    std::set<std::vector<TokenId>> seen;
    Splits out;
    const auto fill = [&](Split split, std::size_t count, std::vector<TaskInstance>& dest) {
        const std::uint64_t max_attempts = 1000 + 50 * static_cast<std::uint64_t>(count);
        for (std::uint64_t j = 0; dest.size() < count; ++j) {
            if (j >= max_attempts) {
                throw Error(ErrorKind::InstanceSpaceExhausted,
                            std::string(family_name(family)) + " cannot supply " + std::to_string(count) +
                                " distinct prompts for split " + std::to_string(static_cast<int>(split)));
            }
            TaskInstance inst = generate(family, difficulty, split_seed(split, master_seed, j));
            if (seen.insert(inst.prompt).second) dest.push_back(std::move(inst));
        }
    };
    fill(Split::Train, counts.train, out.train);
    fill(Split::Validation, counts.validation, out.validation);
    fill(Split::Test, counts.test, out.test);
    return out;
}

std::string dataset_record(const TaskInstance& instance, std::string_view split) {
    nlohmann::ordered_json j;
    if (!split.empty()) j["split"] = split;
    j["family"] = family_name(instance.family);
    j["size"] = instance.difficulty.size;
    j["modulus"] = instance.difficulty.modulus;
    j["seed"] = instance.seed;
    j["prompt"] = instance.prompt;
    j["answer"] = instance.answer;
    j["prompt_text"] = render_tokens(instance.prompt);
    j["answer_text"] = render_tokens(instance.answer);
    return j.dump();
}

void write_dataset(const std::filesystem::path& path, const Splits& splits) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    for (const auto& inst : splits.train) out << dataset_record(inst, "train") << '\n';
    for (const auto& inst : splits.validation) out << dataset_record(inst, "validation") << '\n';
    for (const auto& inst : splits.test) out << dataset_record(inst, "test") << '\n';
}

} // namespace prorl::tasks
