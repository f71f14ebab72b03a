#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "prorl/checkpoint.hpp"
#include "prorl/error.hpp"

using namespace prorl;

namespace {

std::string failing_field(std::span<const std::uint8_t> bytes) {
    try {
        (void)decode_policy(bytes);
    } catch (const CheckpointError& e) {
        return e.field();
    }
    return "";
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
}

} // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("policy round-trip is bit exact") {
    ModelDims dims;
    dims.hidden_dim = 20;
    PolicyParameters p = init_gaussian(dims, 0.37, 5);
    p.values()[0] = -0.0;
    p.values()[1] = std::numeric_limits<double>::denorm_min();
    p.values()[2] = 1e300;
    const auto bytes = encode_policy(p);
    const PolicyParameters back = decode_policy(bytes);
    CHECK(back.dims() == dims);
    CHECK(std::memcmp(back.values().data(), p.values().data(), p.size() * sizeof(double)) == 0);
    CHECK(encode_policy(back) == bytes);
}

TEST_CASE("header layout") {
    ModelDims dims;
    dims.vocab_size = 12;
    dims.embed_dim = 3;
    dims.hidden_dim = 5;
    dims.window = 2;
    PolicyParameters p(dims);
    p.values()[0] = 1.0;
    const auto b = encode_policy(p);
    CHECK(std::string(b.begin(), b.begin() + 8) == "PRORLPOL");
    CHECK(b[8] == 1);
    CHECK(b[12] == 12);
    CHECK(b[16] == 3);
    CHECK(b[20] == 5);
    CHECK(b[24] == 2);
    CHECK(b.size() == 28 + 8 * dims.parameter_count());
    // 1.0 little-endian: 00 .. 00 f0 3f
    CHECK(b[28 + 6] == 0xf0);
    CHECK(b[28 + 7] == 0x3f);
}

TEST_CASE("corruption names the failing header field") {
    const auto good = encode_policy(init_gaussian(ModelDims{}, 0.1, 1));
    auto b = good;
    b[3] = 'x';
    CHECK(failing_field(b) == "magic");
    b = good;
    put_u32(b, 8, 7);
    CHECK(failing_field(b) == "format_version");
    b = good;
    put_u32(b, 12, 4);
    CHECK(failing_field(b) == "vocab_size");
    b = good;
    put_u32(b, 16, 0);
    CHECK(failing_field(b) == "embed_dim");
    b = good;
    put_u32(b, 20, 5000);
    CHECK(failing_field(b) == "window");
    CHECK(failing_field(std::span(good).first(good.size() - 3)) == "weights");
    CHECK(failing_field(std::span(good).first(10)) == "format_version");
    b = good;
    b.push_back(1);
    CHECK(failing_field(b) == "trailing");
    b = good;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(b.data() + 28 + 8 * 3, &nan, sizeof nan);
    CHECK(failing_field(b) == "weights");
}

TEST_CASE("files") {
    const auto path = std::filesystem::temp_directory_path() / "prorl_policy_test.ckpt";
    const PolicyParameters p = init_gaussian(ModelDims{}, 0.2, 3);
    save_policy(path, p);
    CHECK(load_policy(path) == p);
    std::filesystem::remove(path);
    try {
        (void)load_policy(path);
        FAIL("expected Io");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}

TEST_CASE("byte reader primitives") {
    ByteWriter w;
    w.u8(7);
    w.u64(0x0102030405060708ULL);
    w.f64(-2.5);
    w.str("hello");
    const auto bytes = std::move(w).take();
    ByteReader r(bytes);
    CHECK(r.u8("a") == 7);
    CHECK(r.u64("b") == 0x0102030405060708ULL);
    CHECK(r.f64("c") == -2.5);
    CHECK(r.str("d") == "hello");
    CHECK(r.at_end());
    try {
        (void)r.u32("past_end");
        FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
        CHECK(e.field() == "past_end");
    }
}

}
