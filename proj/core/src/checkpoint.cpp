#include "prorl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "prorl/error.hpp"

namespace prorl {

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64s(std::span<const double> values) {
    bytes_.reserve(bytes_.size() + 8 * values.size());
    for (double v : values) f64(v);
}

void ByteWriter::raw(std::span<const std::uint8_t> data) {
    bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void ByteWriter::magic(std::string_view tag) {
    for (char c : tag) bytes_.push_back(static_cast<std::uint8_t>(c));
}

void ByteWriter::blob(std::span<const std::uint8_t> data) {
    u64(data.size());
    raw(data);
}

void ByteWriter::str(std::string_view s) {
    u64(s.size());
    magic(s);
}

std::span<const std::uint8_t> ByteReader::take(std::string_view field, std::size_t n) {
    if (data_.size() - pos_ < n) {
        throw CheckpointError(std::string(field), "truncated: needed " + std::to_string(n) +
                                                      " bytes, " + std::to_string(data_.size() - pos_) +
                                                      " remain");
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::uint8_t ByteReader::u8(std::string_view field) { return take(field, 1)[0]; }

std::uint32_t ByteReader::u32(std::string_view field) {
    auto b = take(field, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

std::uint64_t ByteReader::u64(std::string_view field) {
    auto b = take(field, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

double ByteReader::f64(std::string_view field) { return std::bit_cast<double>(u64(field)); }

void ByteReader::f64s(std::string_view field, std::span<double> out) {
    take(field, 0);
    if ((data_.size() - pos_) / 8 < out.size()) {
        throw CheckpointError(std::string(field), "truncated array of " + std::to_string(out.size()) + " values");
    }
    for (double& v : out) v = f64(field);
}

void ByteReader::expect_magic(std::string_view field, std::string_view tag) {
    auto b = take(field, tag.size());
    if (std::memcmp(b.data(), tag.data(), tag.size()) != 0) {
        throw CheckpointError(std::string(field), "expected magic '" + std::string(tag) + "'");
    }
}

std::vector<std::uint8_t> ByteReader::blob(std::string_view field) {
    const std::uint64_t n = u64(field);
    if (n > data_.size() - pos_) {
        throw CheckpointError(std::string(field), "length " + std::to_string(n) + " exceeds remaining bytes");
    }
    auto b = take(field, static_cast<std::size_t>(n));
    return {b.begin(), b.end()};
}

std::string ByteReader::str(std::string_view field) {
    auto b = blob(field);
    return {b.begin(), b.end()};
}

void ByteReader::expect_end(std::string_view field) const {
    if (!at_end()) {
        throw CheckpointError(std::string(field),
                              std::to_string(data_.size() - pos_) + " unexpected trailing bytes");
    }
}

std::vector<std::uint8_t> encode_policy(const PolicyParameters& params) {
    ByteWriter w;
    w.magic(kPolicyMagic);
    w.u32(kPolicyFormatVersion);
    const ModelDims& dims = params.dims();
    w.u32(static_cast<std::uint32_t>(dims.vocab_size));
    w.u32(static_cast<std::uint32_t>(dims.embed_dim));
    w.u32(static_cast<std::uint32_t>(dims.hidden_dim));
    w.u32(static_cast<std::uint32_t>(dims.window));
    w.f64s(params.values());
    return std::move(w).take();
}

PolicyParameters read_policy(ByteReader& reader) {
    reader.expect_magic("magic", kPolicyMagic);
    const std::uint32_t version = reader.u32("format_version");
    if (version != kPolicyFormatVersion) {
        throw CheckpointError("format_version", "unsupported version " + std::to_string(version));
    }
    ModelDims dims;
    const auto field = [&](std::string_view name, int lo, int hi) {
        const std::uint32_t v = reader.u32(name);
        if (v < static_cast<std::uint32_t>(lo) || v > static_cast<std::uint32_t>(hi)) {
            throw CheckpointError(std::string(name), "value " + std::to_string(v) + " out of range");
        }
        return static_cast<int>(v);
    };
    dims.vocab_size = field("vocab_size", Vocabulary::kMinSize, Vocabulary::kMaxSize);
    dims.embed_dim = field("embed_dim", 1, 100'000);
    dims.hidden_dim = field("hidden_dim", 1, 100'000);
    dims.window = field("window", 1, 100'000);
    if (dims.parameter_count() > ModelDims::kMaxParameters) {
        throw CheckpointError("window", "dimensions imply more than 100000 parameters");
    }
    PolicyParameters params(dims);
    reader.f64s("weights", params.values());
    if (!params.all_finite()) throw CheckpointError("weights", "non-finite weight");
    return params;
}

PolicyParameters decode_policy(std::span<const std::uint8_t> bytes) {
    ByteReader reader(bytes);
    PolicyParameters params = read_policy(reader);
    reader.expect_end("trailing");
    return params;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void save_policy(const std::filesystem::path& path, const PolicyParameters& params) {
    write_file(path, encode_policy(params));
}

PolicyParameters load_policy(const std::filesystem::path& path) {
    return decode_policy(read_file(path));
}

} // namespace prorl
