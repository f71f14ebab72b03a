#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prorl {

using TokenId = std::int32_t;

/// Token id space shared by the policy and the task generators.
///
/// Ids 0..3 are reserved and fixed for every vocabulary size; the remaining
/// ids are task symbols. Policies may use any size in [8, 64]; the task
/// families are encoded in the standard 30-token layout below.
class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kAnswerOpen = 2;
    static constexpr TokenId kAnswerClose = 3;

    static constexpr int kMinSize = 8;
    static constexpr int kMaxSize = 64;

    explicit Vocabulary(int size);

    /// The layout every task family encodes into.
    static Vocabulary standard();

    int size() const noexcept { return size_; }
    bool contains(TokenId id) const noexcept { return id >= 0 && id < size_; }

    friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

private:
    int size_;
};

// Standard task-symbol layout.
namespace symbols {

inline constexpr int kNumeralCount = 12;
inline constexpr TokenId kNumeralBase = 4;   // "0".."11"
inline constexpr TokenId kPlus = 16;
inline constexpr TokenId kMinus = 17;
inline constexpr TokenId kTimes = 18;
inline constexpr TokenId kMod = 19;
inline constexpr TokenId kLParen = 20;
inline constexpr TokenId kRParen = 21;
inline constexpr int kLetterCount = 6;
inline constexpr TokenId kLetterBase = 22;   // "a".."f"
inline constexpr TokenId kColorBase = 28;    // "R", "G"
inline constexpr int kStandardSize = 30;

constexpr TokenId numeral(int value) { return kNumeralBase + value; }
constexpr TokenId letter(int index) { return kLetterBase + index; }
constexpr TokenId color(int index) { return kColorBase + index; }

constexpr bool is_numeral(TokenId t) { return t >= kNumeralBase && t < kNumeralBase + kNumeralCount; }
constexpr bool is_letter(TokenId t) { return t >= kLetterBase && t < kLetterBase + kLetterCount; }
constexpr bool is_color(TokenId t) { return t == kColorBase || t == kColorBase + 1; }

constexpr int numeral_value(TokenId t) { return t - kNumeralBase; }
constexpr int color_index(TokenId t) { return t - kColorBase; }

} // namespace symbols

/// Human-readable rendering of a standard-layout token.
std::string token_text(TokenId id);
std::string render_tokens(std::span<const TokenId> tokens);

} // namespace prorl
