#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "oracles.hpp"
#include "prorl/error.hpp"
#include "prorl/policy.hpp"
#include "prorl/rng.hpp"
#include "prorl/tasks.hpp"

using namespace prorl;
using namespace prorl::tasks;
using namespace prorl::symbols;

namespace {

constexpr TokenId O = Vocabulary::kAnswerOpen;
constexpr TokenId C = Vocabulary::kAnswerClose;
constexpr TokenId E = Vocabulary::kEos;

std::vector<TokenId> tagged(std::vector<TokenId> body) {
    std::vector<TokenId> out{O};
    out.insert(out.end(), body.begin(), body.end());
    out.push_back(C);
    out.push_back(E);
    return out;
}

// Independent evaluation of an arithmetic prompt: % m a1 o1 a2 ...
int eval_chain(const std::vector<TokenId>& prompt) {
    const int m = numeral_value(prompt[1]);
    int acc = numeral_value(prompt[2]);
    for (std::size_t i = 3; i + 1 < prompt.size(); i += 2) {
        const int b = numeral_value(prompt[i + 1]);
        switch (prompt[i]) {
        case kPlus: acc = (acc + b) % m; break;
        case kMinus: acc = ((acc - b) % m + m) % m; break;
        case kTimes: acc = (acc * b) % m; break;
        default: FAIL("unexpected operator");
        }
    }
    return acc;
}

// Depth of a parenthesis prefix, or -1 if it ever goes negative.
int paren_depth(const std::vector<TokenId>& s) {
    int d = 0;
    for (TokenId t : s) {
        d += t == kLParen ? 1 : -1;
        if (d < 0) return -1;
    }
    return d;
}

bool two_colourable_by_parity(const TaskInstance& inst) {
    for (const Edge& e : inst.edges) {
        if ((e.u % 2) == (e.v % 2)) return false;
    }
    return true;
}

} // namespace

TEST_SUITE("tasks") {

TEST_CASE("generation is deterministic") {
    for (Family f : kAllFamilies) {
        const DifficultySpec d = default_difficulty(f);
        CHECK(generate(f, d, 1) == generate(f, d, 1));
    }
    const TaskInstance a = generate(Family::Arithmetic, {2, 7}, 1);
    CHECK(a.prompt.size() == 5);
    CHECK(a.prompt[0] == kMod);
    CHECK(a.prompt[1] == numeral(7));
}

TEST_CASE("difficulty caps are enforced") {
    CHECK_THROWS_AS(generate(Family::Arithmetic, {0, 7}, 1), Error);
    CHECK_THROWS_AS(generate(Family::Arithmetic, {2, 1}, 1), Error);
    CHECK_THROWS_AS(generate(Family::Arithmetic, {2, 12}, 1), Error);
    CHECK_THROWS_AS(generate(Family::Reversal, {9, 0}, 1), Error);
    CHECK_THROWS_AS(generate(Family::Reversal, {5, 3}, 1), Error);
    CHECK_THROWS_AS(generate(Family::GraphColor, {13, 0}, 1), Error);
    CHECK_THROWS_AS(generate(Family::GraphColor, {1, 0}, 1), Error);
    try {
        generate(Family::Parentheses, {0, 0}, 1);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidDifficulty);
    }
}

TEST_CASE("ground truth matches an independent evaluation of every family") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        for (int size = 1; size <= 6; ++size) {
            for (int m : {2, 7, 11}) {
                const TaskInstance a = generate(Family::Arithmetic, {size, m}, seed);
                REQUIRE(a.answer.size() == 1);
                CHECK(numeral_value(a.answer[0]) == eval_chain(a.prompt));
            }
        }
        const TaskInstance r = generate(Family::Reversal, {5, 0}, seed);
        CHECK(r.prompt.size() == 5);
        CHECK(std::vector<TokenId>(r.prompt.rbegin(), r.prompt.rend()) == r.answer);

        const TaskInstance p = generate(Family::Parentheses, {6, 0}, seed);
        const int depth = paren_depth(p.prompt);
        CHECK(depth >= 1);
        CHECK(p.answer == std::vector<TokenId>(static_cast<std::size_t>(depth), kRParen));

        for (int n = 2; n <= 12; ++n) {
            const TaskInstance g = generate(Family::GraphColor, {n, 0}, seed);
            CHECK(g.node_count == n);
            CHECK(two_colourable_by_parity(g));
            CHECK(g.prompt.size() == 2 * g.edges.size());
            std::set<std::pair<int, int>> uniq;
            for (const Edge& e : g.edges) uniq.insert({std::min(e.u, e.v), std::max(e.u, e.v)});
            CHECK(uniq.size() == g.edges.size());
        }
    }
}

TEST_CASE("prompts never carry answer tags") {
    for (Family f : kAllFamilies) {
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const TaskInstance inst = generate(f, default_difficulty(f), seed);
            for (TokenId t : inst.prompt) {
                CHECK(t != O);
                CHECK(t != C);
                CHECK(t != E);
            }
            CHECK(inst.prompt.size() <= 16);
        }
    }
}

TEST_CASE("parse_answer") {
    const TokenId x = numeral(3), a = letter(0), b = letter(1);
    CHECK(parse_answer(std::vector<TokenId>{x, O, a, b, C, E}) == std::vector<TokenId>{a, b});
    CHECK_FALSE(parse_answer(std::vector<TokenId>{x, a, b, C, E}).has_value());
    CHECK_FALSE(parse_answer(std::vector<TokenId>{O, a, E, C}).has_value());
    CHECK_FALSE(parse_answer(std::vector<TokenId>{O, a}).has_value());
    CHECK_FALSE(parse_answer(std::vector<TokenId>{O, O, a, C}).has_value());
    CHECK(parse_answer(std::vector<TokenId>{O, C, E}) == std::vector<TokenId>{});
    // The first tagged span wins.
    CHECK(parse_answer(std::vector<TokenId>{O, a, C, O, b, C}) == std::vector<TokenId>{a});
}

TEST_CASE("verify: arithmetic worked example") {
    TaskInstance inst;
    inst.family = Family::Arithmetic;
    inst.difficulty = {2, 5};
    inst.prompt = {kMod, numeral(5), numeral(3), kPlus, numeral(4)};
    inst.answer = {numeral(2)};
    const Verdict right = verify(inst, tagged({numeral(2)}));
    CHECK(right.reward == 1.0);
    CHECK(right.correct);
    CHECK(right.parse_ok);
    const Verdict wrong = verify(inst, tagged({numeral(3)}));
    CHECK(wrong.reward == 0.0);
    CHECK_FALSE(wrong.correct);
    CHECK(wrong.parse_ok);
    const Verdict junk = verify(inst, std::vector<TokenId>{numeral(2), E});
    CHECK(junk == Verdict{});
}

TEST_CASE("verify: graph colouring gives partial credit") {
    const TaskInstance g = generate(Family::GraphColor, {6, 0}, 3);
    REQUIRE(g.edges.size() == 7);
    // Enumerate all colourings and find one violating exactly two edges.
    bool found = false;
    for (unsigned mask = 0; mask < 64 && !found; ++mask) {
        int violated = 0;
        for (const Edge& e : g.edges) violated += ((mask >> e.u) & 1u) == ((mask >> e.v) & 1u);
        if (violated != 2) continue;
        found = true;
        std::vector<TokenId> body;
        for (int i = 0; i < 6; ++i) body.push_back(color(static_cast<int>((mask >> i) & 1u)));
        const Verdict v = verify(g, tagged(body));
        CHECK(v.reward == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
        CHECK_FALSE(v.correct);
        CHECK(v.parse_ok);
    }
    CHECK(found);
    // The swapped colouring is equally valid.
    std::vector<TokenId> swapped;
    for (int i = 0; i < 6; ++i) swapped.push_back(color(1 - i % 2));
    CHECK(verify(g, tagged(swapped)).correct);
    // Non-colour tokens inside the tags do not parse.
    CHECK(verify(g, tagged({color(0), letter(1)})).reward == 0.0);
}

TEST_CASE("verify round-trips the tagged ground truth for thousands of seeds") {
    for (Family f : kAllFamilies) {
        const DifficultyCaps caps = difficulty_caps(f);
        for (std::uint64_t seed = 0; seed < 1000; ++seed) {
            const int size = caps.min_size + static_cast<int>(seed % static_cast<std::uint64_t>(caps.max_size - caps.min_size + 1));
            const int m = caps.max_modulus == 0 ? 0 : caps.min_modulus + static_cast<int>(seed % 10) % (caps.max_modulus - caps.min_modulus + 1);
            const TaskInstance inst = generate(f, {size, m}, seed);
            const Verdict v = verify(inst, tagged_answer(inst));
            CHECK(v.reward == 1.0);
            CHECK(v.correct);
        }
    }
}

TEST_CASE("verify is total and keeps rewards in [0, 1]") {
    auto rng = make_stream({13});
    std::uniform_int_distribution<TokenId> tok(0, kStandardSize - 1);
    std::uniform_int_distribution<int> len(0, 20);
    for (Family f : kAllFamilies) {
        const TaskInstance inst = generate(f, default_difficulty(f), 9);
        for (int i = 0; i < 3000; ++i) {
            std::vector<TokenId> resp(static_cast<std::size_t>(len(rng)));
            for (TokenId& t : resp) t = tok(rng);
            if (i % 3 == 0 && resp.size() > 2) resp[0] = O;
            Verdict v;
            CHECK_NOTHROW(v = verify(inst, resp));
            CHECK(v.reward >= 0.0);
            CHECK(v.reward <= 1.0);
            if (v.correct) CHECK(v.reward == 1.0);
            if (!v.parse_ok) CHECK(v.reward == 0.0);
        }
    }
}

TEST_CASE("malformed instances raise VerifierError") {
    TaskInstance inst = generate(Family::GraphColor, {6, 0}, 1);
    inst.edges.push_back({2, 2});
    try {
        (void)verify(inst, tagged_answer(inst));
        FAIL("expected VerifierError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::VerifierError);
    }
    TaskInstance empty;
    CHECK_THROWS_AS((void)verify(empty, std::vector<TokenId>{}), Error);
}

TEST_CASE("split seeds are disjoint by construction") {
    for (std::uint64_t i = 0; i < 1000; ++i) {
        CHECK(split_of_seed(split_seed(Split::Train, 5, i)) == Split::Train);
        CHECK(split_of_seed(split_seed(Split::Validation, 5, i)) == Split::Validation);
        CHECK(split_of_seed(split_seed(Split::Test, 5, i)) == Split::Test);
    }
}

TEST_CASE("make_splits: counts, disjoint prompts, determinism") {
    const Splits s = make_splits(Family::Reversal, {5, 0}, {100, 20, 20}, 17);
    CHECK(s.train.size() == 100);
    CHECK(s.validation.size() == 20);
    CHECK(s.test.size() == 20);
    std::set<std::vector<TokenId>> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
        for (const TaskInstance& inst : *part) all.insert(inst.prompt);
    }
    CHECK(all.size() == 140);
    const Splits again = make_splits(Family::Reversal, {5, 0}, {100, 20, 20}, 17);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
}

TEST_CASE("make_splits reports an exhausted instance space") {
    // One operand mod 2 has exactly two prompts.
    try {
        (void)make_splits(Family::Arithmetic, {1, 2}, {2, 1, 0}, 1);
        FAIL("expected InstanceSpaceExhausted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InstanceSpaceExhausted);
    }
}

TEST_CASE("dataset records are line-delimited JSON") {
    const Splits s = make_splits(Family::Parentheses, {6, 0}, {3, 2, 1}, 2);
    const auto path = std::filesystem::temp_directory_path() / "prorl_dataset_test.jsonl";
    write_dataset(path, s);
    std::ifstream in(path);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("family") == "parentheses");
        CHECK(j.at("size") == 6);
        CHECK(j.contains("seed"));
        CHECK(j.at("prompt").is_array());
        CHECK(j.at("answer").is_array());
        ++n;
    }
    CHECK(n == 6);
    std::filesystem::remove(path);
}

TEST_CASE("family names round-trip") {
    for (Family f : kAllFamilies) CHECK(parse_family(family_name(f)) == f);
    CHECK_THROWS_AS(parse_family("sudoku"), Error);
    CHECK(is_continuous(Family::GraphColor));
    CHECK_FALSE(is_continuous(Family::Reversal));
}

TEST_CASE("uniform-policy chance rate matches the enumerated value and falls with size") {
    const PolicyParameters uniform(ModelDims{});
    const int max_len = 6;
    const int draws = 60000;
    double previous = 1.0, previous_sigma = 0.0;
    for (int size = 1; size <= 3; ++size) {
        int hits = 0;
        double exact_sum = 0.0;
        for (int i = 0; i < draws; ++i) {
            const TaskInstance inst = generate(Family::Reversal, {size, 0}, static_cast<std::uint64_t>(i));
            auto rng = make_stream({77, static_cast<std::uint64_t>(size), static_cast<std::uint64_t>(i)});
            const SampleResult s = sample(uniform, inst.prompt, 1.0, max_len, rng);
            hits += verify(inst, s.sequence.response).correct ? 1 : 0;
            if (i == 0) exact_sum = oracle::uniform_chance_rate(inst.answer, kStandardSize, max_len);
        }
        const double p = exact_sum;
        const double rate = static_cast<double>(hits) / draws;
        const double sigma = std::sqrt(p * (1 - p) / draws);
        CHECK(std::fabs(rate - p) <= 3.0 * sigma + 1e-12);
        CHECK(rate <= previous + 3.0 * std::hypot(sigma, previous_sigma));
        previous = rate;
        previous_sigma = sigma;
    }
}

}
