#include <doctest.h>

#include <cmath>
#include <limits>

#include "prorl/error.hpp"
#include "prorl/optimizer.hpp"

using namespace prorl;

namespace {

ModelDims tiny() {
    ModelDims d;
    d.vocab_size = 8;
    d.embed_dim = 2;
    d.hidden_dim = 2;
    d.window = 1;
    return d;
}

} // namespace

TEST_SUITE("optimizer") {

TEST_CASE("lr 0 leaves parameters but updates moments") {
    PolicyParameters p = init_gaussian(tiny(), 0.5, 1);
    const PolicyParameters before = p;
    ObjectiveGradient g(tiny());
    for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = 0.1 * static_cast<double>(i + 1);
    OptimizerState s(AdamWConfig{0.0, 0.9, 0.999, 1e-8, 0.01}, p.size());
    adamw_update(p, g, s);
    CHECK(p == before);
    CHECK(s.step == 1);
    CHECK(s.m[0] == doctest::Approx(0.1 * 0.1).epsilon(1e-14));
    CHECK(s.v[0] == doctest::Approx(0.001 * 0.01).epsilon(1e-14));
}

TEST_CASE("first step moves by lr * g / (|g| + eps)") {
    PolicyParameters p(tiny());
    ObjectiveGradient g(tiny());
    g.values()[0] = 0.37;
    g.values()[1] = -2.5;
    const AdamWConfig cfg{0.01, 0.9, 0.999, 1e-8, 0.0};
    OptimizerState s(cfg, p.size());
    adamw_update(p, g, s);
    CHECK(p.values()[0] == doctest::Approx(-0.01 * 0.37 / (0.37 + 1e-8)).epsilon(1e-12));
    CHECK(p.values()[1] == doctest::Approx(0.01 * 2.5 / (2.5 + 1e-8)).epsilon(1e-12));
    CHECK(p.values()[2] == 0.0);
}

TEST_CASE("zero gradient with weight decay is a pure multiplicative shrink") {
    PolicyParameters p = init_gaussian(tiny(), 1.0, 4);
    const PolicyParameters before = p;
    const AdamWConfig cfg{0.05, 0.9, 0.999, 1e-8, 0.1};
    OptimizerState s(cfg, p.size());
    adamw_update(p, ObjectiveGradient(tiny()), s);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p.values()[i] == before.values()[i] * (1.0 - 0.05 * 0.1));
    }
}

TEST_CASE("non-finite gradients are refused without side effects") {
    PolicyParameters p = init_gaussian(tiny(), 1.0, 4);
    ObjectiveGradient g(tiny());
    g.values()[0] = 1.0;
    OptimizerState s(AdamWConfig{}, p.size());
    adamw_update(p, g, s);
    const PolicyParameters p_before = p;
    const OptimizerState s_before = s;
    g.values()[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        adamw_update(p, g, s);
        FAIL("expected NonFiniteGradient");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonFiniteGradient);
    }
    CHECK(p == p_before);
    CHECK(s == s_before);
    g.values()[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adamw_update(p, g, s), Error);
}

TEST_CASE("reset zeroes moments and step") {
    PolicyParameters p(tiny());
    ObjectiveGradient g(tiny());
    g.values()[2] = 1.0;
    OptimizerState s(AdamWConfig{}, p.size());
    adamw_update(p, g, s);
    CHECK_FALSE(s.is_zero());
    s.reset();
    CHECK(s.is_zero());
    CHECK(s.config == AdamWConfig{});
}

TEST_CASE("second moments stay nonnegative") {
    PolicyParameters p(tiny());
    OptimizerState s(AdamWConfig{}, p.size());
    ObjectiveGradient g(tiny());
    for (int step = 0; step < 20; ++step) {
        for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = std::sin(static_cast<double>(step * 31 + i));
        adamw_update(p, g, s);
    }
    for (double v : s.v) CHECK(v >= 0.0);
    CHECK(s.step == 20);
}

TEST_CASE("shape mismatch and config validation") {
    PolicyParameters p(tiny());
    OptimizerState s(AdamWConfig{}, p.size() + 1);
    CHECK_THROWS_AS(adamw_update(p, ObjectiveGradient(tiny()), s), Error);
    CHECK_THROWS_AS(AdamWConfig({-1.0}).validate(), Error);
    CHECK_THROWS_AS(AdamWConfig({0.1, 1.0}).validate(), Error);
    CHECK_THROWS_AS(AdamWConfig({0.1, 0.9, 0.999, 0.0}).validate(), Error);
}

}
