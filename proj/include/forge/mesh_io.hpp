#pragma once

#include "forge/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

enum class DegeneratePolicy { kDrop, kError };

struct LoadOptions {
  DegeneratePolicy degenerate = DegeneratePolicy::kDrop;
  // Zero-area faces with distinct indices are topologically valid; set false
  // to keep them (e.g. when re-checking a stored marching-cubes mesh).
  bool drop_zero_area = true;
};

struct LoadedMesh {
  Mesh mesh;
  std::size_t dropped_faces = 0;
};

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error("error while reading file: " + path.string());
  return std::move(ss).str();
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

inline bool starts_with_ci(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(text[i])) != prefix[i]) return false;
  return true;
}

// Raw polygon soup -> validated triangle mesh. Polygons are fan-triangulated.
struct MeshBuilder {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<std::vector<std::int64_t>> polygons;

  LoadedMesh finish(const LoadOptions& opts) && {
    LoadedMesh out;
    out.mesh.vertices = std::move(vertices);
    const auto n = static_cast<std::int64_t>(out.mesh.vertices.size());
    for (const auto& poly : polygons) {
      for (std::int64_t idx : poly)
        if (idx < 0 || idx >= n)
          throw Error("face index out of range: " + std::to_string(idx) + " (vertex count " + std::to_string(n) + ")");
      if (poly.size() < 3) {
        if (opts.degenerate == DegeneratePolicy::kError) throw Error("degenerate face with fewer than 3 vertices");
        ++out.dropped_faces;
        continue;
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const Face f{static_cast<std::uint32_t>(poly[0]), static_cast<std::uint32_t>(poly[k]),
                     static_cast<std::uint32_t>(poly[k + 1])};
        const bool repeated = f[0] == f[1] || f[1] == f[2] || f[0] == f[2];
        bool zero_area = false;
        if (!repeated && opts.drop_zero_area) {
          const Vec3& a = out.mesh.vertices[f[0]];
          zero_area = (out.mesh.vertices[f[1]] - a).cross(out.mesh.vertices[f[2]] - a).squaredNorm() == 0.0;
        }
        if (repeated || zero_area) {
          if (opts.degenerate == DegeneratePolicy::kError) throw Error("degenerate face");
          ++out.dropped_faces;
          continue;
        }
        out.mesh.faces.push_back(f);
      }
    }
    if (out.mesh.faces.empty()) throw Error("mesh has no valid faces");

    if (normals.size() == out.mesh.vertices.size()) {
      bool usable = true;
      for (Vec3& v : normals) {
        const double len = v.norm();
        if (!(len > 0.0) || !std::isfinite(len)) {
          usable = false;
          break;
        }
        v /= len;
      }
      if (usable) out.mesh.normals = std::move(normals);
    }
    return out;
  }
};

inline double parse_double(std::string_view token) {
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw Error("malformed number: '" + std::string(token) + "'");
  return value;
}

inline std::int64_t parse_int(std::string_view token) {
  std::int64_t value = 0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw Error("malformed integer: '" + std::string(token) + "'");
  return value;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line);
    pos = end + 1;
  }
}

inline MeshBuilder parse_obj(std::string_view text) {
  MeshBuilder b;
  for_each_line(text, [&](std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.empty()) return;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw Error("OBJ vertex record needs 3 coordinates");
      b.vertices.emplace_back(parse_double(tok[1]), parse_double(tok[2]), parse_double(tok[3]));
    } else if (tok[0] == "f") {
      std::vector<std::int64_t> poly;
      for (std::size_t k = 1; k < tok.size(); ++k) {
        const std::string_view ref = tok[k].substr(0, tok[k].find('/'));
        const std::int64_t idx = parse_int(ref);
        if (idx == 0) throw Error("OBJ face index 0 is invalid");
        // Negative indices are relative to the vertices read so far.
        poly.push_back(idx > 0 ? idx - 1 : static_cast<std::int64_t>(b.vertices.size()) + idx);
      }
      b.polygons.push_back(std::move(poly));
    }
  });
  return b;
}

struct VertexWelder {
  std::map<std::array<double, 3>, std::int64_t> index;
  std::vector<Vec3>& vertices;

  std::int64_t operator()(const Vec3& p) {
    const auto [it, inserted] = index.try_emplace({p.x(), p.y(), p.z()}, static_cast<std::int64_t>(vertices.size()));
    if (inserted) vertices.push_back(p);
    return it->second;
  }
};

template <typename T>
T load_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(&value);
    std::reverse(bytes, bytes + sizeof(T));
  }
  return value;
}

inline MeshBuilder parse_stl(const std::string& bytes) {
  MeshBuilder b;
  VertexWelder weld{{}, b.vertices};
  const bool binary_size_matches =
      bytes.size() >= 84 && bytes.size() == 84 + 50 * std::uint64_t{load_le<std::uint32_t>(bytes.data() + 80)};
  if (binary_size_matches || !starts_with_ci(bytes, "solid")) {
    if (!binary_size_matches) throw Error("binary STL size does not match its triangle count");
    const std::uint32_t count = load_le<std::uint32_t>(bytes.data() + 80);
    for (std::uint32_t t = 0; t < count; ++t) {
      const char* rec = bytes.data() + 84 + 50 * std::size_t{t} + 12;
      std::vector<std::int64_t> poly;
      for (int k = 0; k < 3; ++k) {
        const char* v = rec + 12 * k;
        poly.push_back(weld(Vec3(load_le<float>(v), load_le<float>(v + 4), load_le<float>(v + 8))));
      }
      b.polygons.push_back(std::move(poly));
    }
    return b;
  }
  std::vector<std::int64_t> poly;
  for_each_line(bytes, [&](std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.empty()) return;
    const std::string head = lower(std::string(tok[0]));
    if (head == "vertex") {
      if (tok.size() < 4) throw Error("STL vertex record needs 3 coordinates");
      poly.push_back(weld(Vec3(parse_double(tok[1]), parse_double(tok[2]), parse_double(tok[3]))));
    } else if (head == "endloop") {
      b.polygons.push_back(std::move(poly));
      poly.clear();
    }
  });
  return b;
}

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline std::size_t ply_type_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "float" || type == "int32" || type == "uint32" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw Error("unsupported PLY property type: " + type);
}

class PlyBinaryReader {
 public:
  PlyBinaryReader(std::string_view data, bool big_endian) : data_(data), big_endian_(big_endian) {}

  double read(const std::string& type) {
    const std::size_t size = ply_type_size(type);
    if (pos_ + size > data_.size()) throw Error("PLY body is truncated");
    unsigned char buf[8];
    std::memcpy(buf, data_.data() + pos_, size);
    pos_ += size;
    if (big_endian_ != (std::endian::native == std::endian::big)) std::reverse(buf, buf + size);
    auto as = [&](auto tag) {
      decltype(tag) v;
      std::memcpy(&v, buf, sizeof(v));
      return static_cast<double>(v);
    };
    if (type == "char" || type == "int8") return as(std::int8_t{});
    if (type == "uchar" || type == "uint8") return as(std::uint8_t{});
    if (type == "short" || type == "int16") return as(std::int16_t{});
    if (type == "ushort" || type == "uint16") return as(std::uint16_t{});
    if (type == "int" || type == "int32") return as(std::int32_t{});
    if (type == "uint" || type == "uint32") return as(std::uint32_t{});
    if (type == "float" || type == "float32") return as(float{});
    return as(double{});
  }

 private:
  std::string_view data_;
  bool big_endian_;
  std::size_t pos_ = 0;
};

inline MeshBuilder parse_ply(const std::string& bytes) {
  if (!bytes.starts_with("ply")) throw Error("PLY file does not start with 'ply'");
  const std::size_t header_end = bytes.find("end_header");
  if (header_end == std::string::npos) throw Error("PLY header has no end_header");
  std::size_t body = bytes.find('\n', header_end);
  if (body == std::string::npos) throw Error("PLY header is truncated");
  ++body;

  std::string format;
  std::vector<PlyElement> elements;
  for_each_line(std::string_view(bytes).substr(0, header_end), [&](std::string_view line) {
    const auto tok = split_ws(line);
    if (tok.empty()) return;
    if (tok[0] == "format") {
      if (tok.size() < 2) throw Error("PLY format line is incomplete");
      format = tok[1];
    } else if (tok[0] == "element") {
      if (tok.size() < 3) throw Error("PLY element line is incomplete");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(parse_int(tok[2])), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw Error("PLY property before any element");
      if (tok.size() >= 5 && tok[1] == "list")
        elements.back().properties.push_back({std::string(tok[4]), std::string(tok[3]), true, std::string(tok[2])});
      else if (tok.size() >= 3)
        elements.back().properties.push_back({std::string(tok[2]), std::string(tok[1]), false, {}});
      else
        throw Error("PLY property line is incomplete");
    }
  });
  if (format != "ascii" && format != "binary_little_endian" && format != "binary_big_endian")
    throw Error("unsupported PLY format: " + format);

  MeshBuilder b;
  std::vector<Vec3> normals;
  bool have_normals = false;

  auto consume = [&](auto&& next_value) {
    for (const PlyElement& el : elements) {
      const bool is_vertex = el.name == "vertex";
      const bool is_face = el.name == "face";
      if (is_vertex) {
        have_normals = std::any_of(el.properties.begin(), el.properties.end(),
                                   [](const PlyProperty& p) { return p.name == "nx"; });
      }
      for (std::size_t i = 0; i < el.count; ++i) {
        Vec3 pos = Vec3::Zero();
        Vec3 nrm = Vec3::Zero();
        for (const PlyProperty& prop : el.properties) {
          if (prop.is_list) {
            const auto count = static_cast<std::size_t>(next_value(prop.count_type));
            std::vector<std::int64_t> poly;
            poly.reserve(count);
            for (std::size_t k = 0; k < count; ++k) poly.push_back(static_cast<std::int64_t>(next_value(prop.type)));
            if (is_face && (prop.name == "vertex_indices" || prop.name == "vertex_index"))
              b.polygons.push_back(std::move(poly));
            continue;
          }
          const double v = next_value(prop.type);
          if (!is_vertex) continue;
          if (prop.name == "x") pos.x() = v;
          else if (prop.name == "y") pos.y() = v;
          else if (prop.name == "z") pos.z() = v;
          else if (prop.name == "nx") nrm.x() = v;
          else if (prop.name == "ny") nrm.y() = v;
          else if (prop.name == "nz") nrm.z() = v;
        }
        if (is_vertex) {
          b.vertices.push_back(pos);
          normals.push_back(nrm);
        }
      }
    }
  };

  if (format == "ascii") {
    const auto tokens = split_ws(std::string_view(bytes).substr(body));
    std::size_t cursor = 0;
    consume([&](const std::string&) {
      if (cursor >= tokens.size()) throw Error("PLY body is truncated");
      return parse_double(tokens[cursor++]);
    });
  } else {
    PlyBinaryReader reader(std::string_view(bytes).substr(body), format == "binary_big_endian");
    consume([&](const std::string& type) { return reader.read(type); });
  }
  if (have_normals) b.normals = std::move(normals);
  return b;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("error while writing file: " + path.string());
}

inline void append_fmt(std::string& out, const char* fmt, double a, double b, double c) {
  char buf[128];
  const int n = std::snprintf(buf, sizeof(buf), fmt, a, b, c);
  out.append(buf, static_cast<std::size_t>(n));
}

template <typename T>
void append_le(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace detail

/// Loads ASCII OBJ, ASCII/binary STL, or ASCII/binary PLY (chosen by
/// extension). Degenerate faces are dropped and counted unless the policy
/// says to fail.
inline LoadedMesh load_mesh(const std::filesystem::path& path, const LoadOptions& opts = {}) {
  const std::string ext = detail::lower(path.extension().string());
  if (ext != ".obj" && ext != ".stl" && ext != ".ply") throw Error("unsupported mesh format: '" + ext + "'");
  const std::string bytes = detail::read_file_bytes(path);
  detail::MeshBuilder builder;
  if (ext == ".obj") builder = detail::parse_obj(bytes);
  else if (ext == ".stl") builder = detail::parse_stl(bytes);
  else builder = detail::parse_ply(bytes);
  return std::move(builder).finish(opts);
}

inline void write_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
  for (const Vec3& v : mesh.vertices) detail::append_fmt(out, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
  for (const Face& f : mesh.faces) {
    out += "f " + std::to_string(f[0] + 1) + ' ' + std::to_string(f[1] + 1) + ' ' + std::to_string(f[2] + 1) + '\n';
  }
  detail::write_text_file(path, out);
}

inline void write_stl(const std::filesystem::path& path, const Mesh& mesh, bool binary = true) {
  std::string out;
  if (binary) {
    out.assign(80, '\0');
    detail::append_le(out, static_cast<std::uint32_t>(mesh.faces.size()));
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const Vec3 n = mesh.face_normal(f);
      for (int k = 0; k < 3; ++k) detail::append_le(out, static_cast<float>(n[k]));
      for (const Vec3& v : mesh.corners(f))
        for (int k = 0; k < 3; ++k) detail::append_le(out, static_cast<float>(v[k]));
      detail::append_le(out, std::uint16_t{0});
    }
  } else {
    out = "solid forge\n";
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      const Vec3 n = mesh.face_normal(f);
      detail::append_fmt(out, "facet normal %.9g %.9g %.9g\n outer loop\n", n.x(), n.y(), n.z());
      for (const Vec3& v : mesh.corners(f)) detail::append_fmt(out, "  vertex %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
      out += " endloop\nendfacet\n";
    }
    out += "endsolid forge\n";
  }
  detail::write_text_file(path, out);
}

inline void write_ply(const std::filesystem::path& path, const Mesh& mesh, bool binary = true) {
  const bool normals = mesh.has_normals();
  std::string out = "ply\nformat ";
  out += binary ? "binary_little_endian" : "ascii";
  out += " 1.0\nelement vertex " + std::to_string(mesh.vertices.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (normals) out += "property double nx\nproperty double ny\nproperty double nz\n";
  out += "element face " + std::to_string(mesh.faces.size()) + "\nproperty list uchar uint vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    if (binary) {
      for (int k = 0; k < 3; ++k) detail::append_le(out, v[k]);
      if (normals)
        for (int k = 0; k < 3; ++k) detail::append_le(out, mesh.normals[i][k]);
    } else {
      detail::append_fmt(out, "%.17g %.17g %.17g", v.x(), v.y(), v.z());
      if (normals) {
        const Vec3& n = mesh.normals[i];
        detail::append_fmt(out, " %.17g %.17g %.17g", n.x(), n.y(), n.z());
      }
      out += '\n';
    }
  }
  for (const Face& f : mesh.faces) {
    if (binary) {
      detail::append_le(out, std::uint8_t{3});
      for (std::uint32_t i : f) detail::append_le(out, i);
    } else {
      out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
    }
  }
  detail::write_text_file(path, out);
}

}  // namespace forge
