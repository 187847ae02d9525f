#pragma once

// Raw little-endian arrays with JSON sidecars, content hashing, and small
// filesystem helpers shared by the pipeline and the CLI.

#include "forge/field.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace forge {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

inline std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

inline void write_bytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("error while writing file: " + path.string());
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_bytes(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

template <typename T>
std::string to_little_endian_bytes(std::span<const T> values) {
  static_assert(std::is_arithmetic_v<T>);
  std::string out(values.size() * sizeof(T), '\0');
  std::memcpy(out.data(), values.data(), out.size());
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < values.size(); ++i)
      std::reverse(out.begin() + i * sizeof(T), out.begin() + (i + 1) * sizeof(T));
  }
  return out;
}

template <typename T>
std::vector<T> from_little_endian_bytes(std::string_view bytes) {
  if (bytes.size() % sizeof(T) != 0) throw Error("raw array size is not a multiple of the element size");
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* raw = reinterpret_cast<unsigned char*>(out.data());
    for (std::size_t i = 0; i < out.size(); ++i) std::reverse(raw + i * sizeof(T), raw + (i + 1) * sizeof(T));
  }
  return out;
}

/// Writes `<stem>.bin` and `<stem>.json`; the sidecar carries dtype, shape,
/// and any caller metadata. Returns the payload path.
template <typename T>
fs::path write_array(const fs::path& dir, const std::string& stem, std::span<const T> values,
                     std::vector<std::size_t> shape, nlohmann::json meta = nlohmann::json::object()) {
  std::size_t expected = 1;
  for (std::size_t s : shape) expected *= s;
  if (expected != values.size()) throw Error("array shape does not match value count for " + stem);
  const char* dtype = std::is_same_v<T, float>           ? "f32"
                      : std::is_same_v<T, std::uint32_t> ? "u32"
                      : std::is_same_v<T, std::uint8_t>  ? "u8"
                                                         : nullptr;
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, std::uint32_t> || std::is_same_v<T, std::uint8_t>);
  meta["dtype"] = dtype;
  meta["endianness"] = "little";
  meta["shape"] = shape;
  meta["payload"] = stem + ".bin";
  const fs::path payload = dir / (stem + ".bin");
  write_bytes(payload, to_little_endian_bytes(values));
  write_json(dir / (stem + ".json"), meta);
  return payload;
}

/// SdfGrid as `<stem>.bin` (f32, x-fastest) plus `<stem>.json`.
inline fs::path write_sdf_grid(const fs::path& dir, const std::string& stem, const SdfGrid& grid) {
  const fs::path payload = dir / (stem + ".bin");
  write_bytes(payload, to_little_endian_bytes(std::span<const float>(grid.values)));
  nlohmann::json meta = sdf_grid_metadata(grid);
  meta["payload"] = stem + ".bin";
  write_json(dir / (stem + ".json"), meta);
  return payload;
}

inline SdfGrid read_sdf_grid(const fs::path& dir, const std::string& stem) {
  const nlohmann::json meta = read_json(dir / (stem + ".json"));
  if (meta.at("dtype") != "f32" || meta.at("order") != "x-fastest") throw Error("unsupported SDF grid layout");
  SdfGrid grid;
  for (int a = 0; a < 3; ++a) grid.resolution[a] = meta.at("shape").at(a).get<int>();
  for (int a = 0; a < 3; ++a) {
    grid.bounds.min[a] = meta.at("bounds").at("min").at(a).get<double>();
    grid.bounds.max[a] = meta.at("bounds").at("max").at(a).get<double>();
  }
  grid.values = from_little_endian_bytes<float>(read_bytes(dir / (stem + ".bin")));
  if (grid.values.size() != static_cast<std::size_t>(grid.resolution[0]) * grid.resolution[1] * grid.resolution[2])
    throw Error("SDF grid payload size does not match its shape");
  return grid;
}

}  // namespace forge
