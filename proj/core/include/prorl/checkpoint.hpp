#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prorl/policy.hpp"

namespace prorl {

/// Little-endian binary encoder used by every checkpoint format.
class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v);
    void f64s(std::span<const double> values);
    void raw(std::span<const std::uint8_t> data);
    void magic(std::string_view tag);
    /// u64 length followed by the bytes.
    void blob(std::span<const std::uint8_t> data);
    void str(std::string_view s);

    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t> take() && { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Decoder matching ByteWriter. Every read names the field it decodes so a
/// truncated or corrupt file reports where it failed.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8(std::string_view field);
    std::uint32_t u32(std::string_view field);
    std::uint64_t u64(std::string_view field);
    std::int64_t i64(std::string_view field) { return static_cast<std::int64_t>(u64(field)); }
    double f64(std::string_view field);
    void f64s(std::string_view field, std::span<double> out);
    void expect_magic(std::string_view field, std::string_view tag);
    std::vector<std::uint8_t> blob(std::string_view field);
    std::string str(std::string_view field);

    bool at_end() const noexcept { return pos_ == data_.size(); }
    void expect_end(std::string_view field) const;

private:
    std::span<const std::uint8_t> take(std::string_view field, std::size_t n);

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline constexpr std::string_view kPolicyMagic = "PRORLPOL";
inline constexpr std::uint32_t kPolicyFormatVersion = 1;

/// Policy checkpoint: magic, format version, vocab size, d, h, w (u32 each),
/// then every weight matrix row-major as little-endian f64.
std::vector<std::uint8_t> encode_policy(const PolicyParameters& params);
PolicyParameters decode_policy(std::span<const std::uint8_t> bytes);
/// Reads one policy checkpoint from the reader's current position.
PolicyParameters read_policy(ByteReader& reader);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void save_policy(const std::filesystem::path& path, const PolicyParameters& params);
PolicyParameters load_policy(const std::filesystem::path& path);

} // namespace prorl
