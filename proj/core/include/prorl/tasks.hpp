#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prorl/vocabulary.hpp"

namespace prorl::tasks {

/// Task families and their canonical encodings (standard vocabulary):
///
///   arithmetic   prompt  % m a1 o1 a2 o2 ... ak      (o is +, operands in [0, m))
///                answer  value of the left-to-right chain mod m, one numeral
///   reversal     prompt  s1 ... sL                   (letters a..f)
///                answer  sL ... s1
///   parentheses  prompt  a prefix of a balanced string with open depth >= 1
///                answer  the closing run ")" x depth
///   graph_color  prompt  u1 v1 u2 v2 ... uE vE       (node numerals, shuffled edge list)
///                answer  one colour (R/G) per node, node order
///
/// Every response wraps its answer as <answer> ... </answer> followed by EOS.
enum class Family { Arithmetic, Reversal, Parentheses, GraphColor };

inline constexpr Family kAllFamilies[] = {Family::Arithmetic, Family::Reversal, Family::Parentheses,
                                          Family::GraphColor};

std::string_view family_name(Family family) noexcept;
/// Throws InvalidConfig for unknown names.
Family parse_family(std::string_view name);
/// Graph colouring scores the fraction of satisfied edges; the rest are 0/1.
bool is_continuous(Family family) noexcept;

/// size: operand count (arithmetic), string length (reversal), prefix length
/// (parentheses), node count (graph_color). modulus is used by arithmetic only
/// and must be 0 for the other families.
struct DifficultySpec {
    int size = 0;
    int modulus = 0;

    friend bool operator==(const DifficultySpec&, const DifficultySpec&) = default;
};

struct DifficultyCaps {
    int min_size;
    int max_size;
    int min_modulus;
    int max_modulus;
};

DifficultyCaps difficulty_caps(Family family) noexcept;
/// Training defaults: 2 operands mod 7, length 5, prefix 6, 6 nodes.
DifficultySpec default_difficulty(Family family) noexcept;
/// Throws InvalidDifficulty when outside the family caps.
void validate_difficulty(Family family, const DifficultySpec& difficulty);

struct Edge {
    int u = 0;
    int v = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

struct TaskInstance {
    Family family = Family::Arithmetic;
    DifficultySpec difficulty;
    std::uint64_t seed = 0;
    std::vector<TokenId> prompt;
    /// Canonical ground-truth answer tokens, without tags.
    std::vector<TokenId> answer;
    /// graph_color only.
    int node_count = 0;
    std::vector<Edge> edges;

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

/// Deterministic in (family, difficulty, seed). Throws InvalidDifficulty.
TaskInstance generate(Family family, const DifficultySpec& difficulty, std::uint64_t seed);

/// Tokens between the first ANSWER_OPEN and the next ANSWER_CLOSE, scanning
/// no further than the first EOS. A missing open tag, a missing close tag or
/// a nested open tag yields nullopt.
std::optional<std::vector<TokenId>> parse_answer(std::span<const TokenId> response);

struct Verdict {
    double reward = 0.0;
    bool correct = false;
    bool parse_ok = false;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Total: every response maps to a verdict. Throws VerifierError only when the
/// instance itself violates its family invariants.
Verdict verify(const TaskInstance& instance, std::span<const TokenId> response);

/// <answer> ground truth </answer> <eos>
std::vector<TokenId> tagged_answer(const TaskInstance& instance);

enum class Split : std::uint64_t { Train = 0, Validation = 1, Test = 2 };

/// Generator seed for the index-th instance of a split. The top two bits carry
/// the split, so seed ranges of different splits never intersect.
std::uint64_t split_seed(Split split, std::uint64_t master_seed, std::uint64_t index) noexcept;
Split split_of_seed(std::uint64_t seed) noexcept;

struct SplitCounts {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

struct Splits {
    std::vector<TaskInstance> train;
    std::vector<TaskInstance> validation;
    std::vector<TaskInstance> test;
};

/// Draws instances from each split's seed range, skipping any whose prompt was
/// already produced, so no canonical prompt appears twice across the result.
/// Throws InstanceSpaceExhausted when the family cannot supply enough distinct
/// prompts at this difficulty.
Splits make_splits(Family family, const DifficultySpec& difficulty, const SplitCounts& counts,
                   std::uint64_t master_seed);

/// One line-delimited JSON record: family, size, modulus, seed, prompt,
/// answer (token ids) plus readable renderings.
std::string dataset_record(const TaskInstance& instance, std::string_view split = {});
void write_dataset(const std::filesystem::path& path, const Splits& splits);

} // namespace prorl::tasks
