#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace dsseg::io {

namespace fs = std::filesystem;

std::vector<char> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, const std::vector<char>& bytes);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

nlohmann::json read_json(const fs::path& path);
// Pretty-printed with a trailing newline; key order is sorted, so output is byte-stable.
void write_json(const fs::path& path, const nlohmann::json& j);

void ensure_dir(const fs::path& dir);

// Little-endian encode/decode of 4- and 8-byte scalars regardless of host order.
template <class T>
void append_le(std::vector<char>& out, T value) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits;
    std::memcpy(&bits, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <class T>
T load_le(const char* p) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
}

}  // namespace dsseg::io
