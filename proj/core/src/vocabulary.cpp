#include "prorl/vocabulary.hpp"

#include "prorl/error.hpp"

namespace prorl {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::InvalidToken: return "InvalidToken";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DegenerateGroup: return "DegenerateGroup";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::InvalidDifficulty: return "InvalidDifficulty";
    case ErrorKind::InstanceSpaceExhausted: return "InstanceSpaceExhausted";
    case ErrorKind::VerifierError: return "VerifierError";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::InvalidMoments: return "InvalidMoments";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

Vocabulary::Vocabulary(int size) : size_(size) {
    if (size < kMinSize || size > kMaxSize) {
        throw Error(ErrorKind::InvalidConfig,
                    "vocabulary size " + std::to_string(size) + " outside [8, 64]");
    }
}

Vocabulary Vocabulary::standard() { return Vocabulary(symbols::kStandardSize); }

std::string token_text(TokenId id) {
    using namespace symbols;
    switch (id) {
    case Vocabulary::kPad: return "<pad>";
    case Vocabulary::kEos: return "<eos>";
    case Vocabulary::kAnswerOpen: return "<answer>";
    case Vocabulary::kAnswerClose: return "</answer>";
    case kPlus: return "+";
    case kMinus: return "-";
    case kTimes: return "*";
    case kMod: return "%";
    case kLParen: return "(";
    case kRParen: return ")";
    default: break;
    }
    if (is_numeral(id)) return std::to_string(numeral_value(id));
    if (is_letter(id)) return std::string(1, static_cast<char>('a' + (id - kLetterBase)));
    if (is_color(id)) return color_index(id) == 0 ? "R" : "G";
    return "#" + std::to_string(id);
}

std::string render_tokens(std::span<const TokenId> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += token_text(tokens[i]);
    }
    return out;
}

} // namespace prorl
