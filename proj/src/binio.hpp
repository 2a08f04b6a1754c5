#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "bse/errors.hpp"
#include "bse/operator.hpp"

// Little-endian framing shared by the instance and tensor containers.
namespace bse::binio {

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t offset) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
    return v;
}

inline void put_array(std::string& out, const double* data, Index count) {
    for (Index i = 0; i < count; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

inline void get_array(std::string_view in, std::size_t& offset, double* data, Index count) {
    for (Index i = 0; i < count; ++i, offset += 8) data[i] = std::bit_cast<double>(get_u64(in, offset));
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatError::Kind::Io, "cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatError::Kind::Io, "write failed for '" + path.string() + "'");
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::Io, "cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace bse::binio
