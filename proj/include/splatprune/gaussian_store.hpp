#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "splatprune/error.hpp"

namespace splatprune {

/// One byte per element; 0 = false. Preferred over std::vector<bool> because
/// workers write disjoint elements concurrently.
using KeepVector = std::vector<std::uint8_t>;

inline constexpr std::size_t kDefaultRestCount = 45;

/// Structure-of-arrays store of N Gaussians. Rows are interleaved per column
/// (positions = x0 y0 z0 x1 y1 z1 ...), so every column is one contiguous
/// buffer. Opacity, scale and rotation are carried for output only.
struct GaussianCloud {
  std::size_t rest_count = kDefaultRestCount;
  std::vector<float> positions;  // 3N
  std::vector<float> f_dc;       // 3N
  std::vector<float> f_rest;     // rest_count * N
  std::vector<float> opacity;    // N
  std::vector<float> scales;     // 3N
  std::vector<float> rotations;  // 4N
  std::vector<std::string> comments;

  std::size_t size() const noexcept { return opacity.size(); }
  bool empty() const noexcept { return opacity.empty(); }

  void resize(std::size_t n) {
    positions.resize(3 * n);
    f_dc.resize(3 * n);
    f_rest.resize(rest_count * n);
    opacity.resize(n);
    scales.resize(3 * n);
    rotations.resize(4 * n);
  }

  std::array<float, 3> position(std::size_t i) const {
    return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
  }
  std::array<float, 3> dc(std::size_t i) const {
    return {f_dc[3 * i], f_dc[3 * i + 1], f_dc[3 * i + 2]};
  }

  /// Throws LengthMismatch if any column disagrees with size().
  void check_columns() const {
    const std::size_t n = size();
    if (positions.size() != 3 * n || f_dc.size() != 3 * n || f_rest.size() != rest_count * n ||
        scales.size() != 3 * n || rotations.size() != 4 * n) {
      throw Error(ErrorKind::LengthMismatch, "gaussian columns disagree with count " + std::to_string(n));
    }
  }

  /// Floats per vertex in the written layout (normals included).
  std::size_t floats_per_vertex() const noexcept { return 3 + 3 + 3 + rest_count + 1 + 3 + 4; }
  std::size_t stride_bytes() const noexcept { return floats_per_vertex() * sizeof(float); }

  friend bool operator==(const GaussianCloud&, const GaussianCloud&) = default;
};

namespace detail {

inline std::size_t ply_type_size(std::string_view type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32") return 4;
  if (type == "float" || type == "float32") return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

inline bool is_float32(std::string_view type) { return type == "float" || type == "float32"; }

inline float read_le_float(const unsigned char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  float value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

inline void write_le_float(unsigned char* p, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  std::memcpy(p, &bits, sizeof bits);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t offset = 0;
};

struct PlyHeader {
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> properties;
  std::vector<std::string> comments;
  std::size_t stride = 0;
  std::size_t body_offset = 0;
};

inline PlyHeader parse_ply_header(std::istream& in, const std::string& where) {
  PlyHeader header;
  std::string line;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") {
    throw Error(ErrorKind::MalformedHeader, where + ": missing 'ply' magic");
  }
  bool saw_format = false;
  bool saw_end = false;
  bool in_vertex = false;
  bool saw_vertex = false;
  while (next_line()) {
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "end_header") {
      saw_end = true;
      break;
    }
    if (tok[0] == "comment" || tok[0] == "obj_info") {
      if (tok[0] == "comment") {
        auto pos = line.find("comment");
        std::string text = line.substr(pos + 7);
        if (!text.empty() && text.front() == ' ') text.erase(0, 1);
        header.comments.push_back(std::move(text));
      }
      continue;
    }
    if (tok[0] == "format") {
      if (tok.size() != 3) throw Error(ErrorKind::MalformedHeader, where + ": bad format line");
      if (tok[1] != "binary_little_endian") {
        throw Error(ErrorKind::UnsupportedEncoding,
                    where + ": format '" + std::string(tok[1]) + "' (only binary_little_endian is read)");
      }
      if (tok[2] != "1.0") throw Error(ErrorKind::UnsupportedEncoding, where + ": PLY version " + std::string(tok[2]));
      saw_format = true;
      continue;
    }
    if (tok[0] == "element") {
      if (tok.size() != 3) throw Error(ErrorKind::MalformedHeader, where + ": bad element line");
      std::size_t count = 0;
      try {
        count = std::stoull(std::string(tok[2]));
      } catch (const std::exception&) {
        throw Error(ErrorKind::MalformedHeader, where + ": bad element count");
      }
      if (tok[1] == "vertex") {
        if (saw_vertex) throw Error(ErrorKind::MalformedHeader, where + ": duplicate vertex element");
        saw_vertex = true;
        in_vertex = true;
        header.vertex_count = count;
      } else {
        in_vertex = false;
        if (count != 0) {
          throw Error(ErrorKind::MalformedHeader, where + ": unexpected non-empty element '" + std::string(tok[1]) + "'");
        }
      }
      continue;
    }
    if (tok[0] == "property") {
      if (!in_vertex) continue;
      if (tok.size() != 3) {
        throw Error(ErrorKind::MalformedHeader, where + ": unsupported property line '" + line + "'");
      }
      const std::size_t size = ply_type_size(tok[1]);
      if (size == 0) throw Error(ErrorKind::MalformedHeader, where + ": unknown property type '" + std::string(tok[1]) + "'");
      header.properties.push_back({std::string(tok[2]), std::string(tok[1]), header.stride});
      header.stride += size;
      continue;
    }
    throw Error(ErrorKind::MalformedHeader, where + ": unexpected header line '" + line + "'");
  }
  if (!saw_end) throw Error(ErrorKind::MalformedHeader, where + ": missing end_header");
  if (!saw_format) throw Error(ErrorKind::MalformedHeader, where + ": missing format line");
  if (!saw_vertex) throw Error(ErrorKind::MalformedHeader, where + ": missing vertex element");
  header.body_offset = static_cast<std::size_t>(in.tellg());
  return header;
}

}  // namespace detail

/// Reads a binary little-endian 3DGS PLY. Properties are located by name;
/// unknown extra properties and normals are skipped.
inline GaussianCloud load_ply(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + where);

  const detail::PlyHeader header = detail::parse_ply_header(in, where);

  std::unordered_map<std::string, const detail::PlyProperty*> by_name;
  for (const auto& prop : header.properties) by_name[prop.name] = &prop;

  auto require = [&](const std::string& name) -> std::size_t {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::MalformedHeader, where + ": missing property '" + name + "'");
    if (!detail::is_float32(it->second->type)) {
      throw Error(ErrorKind::MalformedHeader, where + ": property '" + name + "' must be float32");
    }
    return it->second->offset;
  };

  std::size_t rest_count = 0;
  while (by_name.count("f_rest_" + std::to_string(rest_count))) ++rest_count;
  for (const auto& prop : header.properties) {
    if (prop.name.rfind("f_rest_", 0) == 0) {
      const std::string idx = prop.name.substr(7);
      if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos || std::stoull(idx) >= rest_count) {
        throw Error(ErrorKind::MalformedHeader, where + ": non-contiguous f_rest properties");
      }
    }
  }

  // Offsets in the order the columns are stored.
  std::vector<std::size_t> pos_off, dc_off, rest_off, scale_off, rot_off;
  for (const char* n : {"x", "y", "z"}) pos_off.push_back(require(n));
  for (int c = 0; c < 3; ++c) dc_off.push_back(require("f_dc_" + std::to_string(c)));
  for (std::size_t c = 0; c < rest_count; ++c) rest_off.push_back(require("f_rest_" + std::to_string(c)));
  const std::size_t opacity_off = require("opacity");
  for (int c = 0; c < 3; ++c) scale_off.push_back(require("scale_" + std::to_string(c)));
  for (int c = 0; c < 4; ++c) rot_off.push_back(require("rot_" + std::to_string(c)));

  const std::size_t n = header.vertex_count;
  const std::size_t body_bytes = n * header.stride;
  std::vector<unsigned char> body(body_bytes);
  if (body_bytes > 0) {
    in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body_bytes));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != body_bytes) {
      throw Error(ErrorKind::TruncatedBody, where + ": body has " + std::to_string(got) + " bytes, expected " +
                                                std::to_string(body_bytes) + " (" + std::to_string(n) + " x " +
                                                std::to_string(header.stride) + ")");
    }
  }

  GaussianCloud cloud;
  cloud.rest_count = rest_count;
  cloud.comments = header.comments;
  cloud.resize(n);

  auto fetch = [&](const unsigned char* row, std::size_t offset, std::size_t i) {
    const float v = detail::read_le_float(row + offset);
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NonFiniteValue, where + ": non-finite value in vertex " + std::to_string(i));
    }
    return v;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* row = body.data() + i * header.stride;
    for (int c = 0; c < 3; ++c) cloud.positions[3 * i + c] = fetch(row, pos_off[c], i);
    for (int c = 0; c < 3; ++c) cloud.f_dc[3 * i + c] = fetch(row, dc_off[c], i);
    for (std::size_t c = 0; c < rest_count; ++c) cloud.f_rest[rest_count * i + c] = fetch(row, rest_off[c], i);
    cloud.opacity[i] = fetch(row, opacity_off, i);
    for (int c = 0; c < 3; ++c) cloud.scales[3 * i + c] = fetch(row, scale_off[c], i);
    for (int c = 0; c < 4; ++c) cloud.rotations[4 * i + c] = fetch(row, rot_off[c], i);
  }
  return cloud;
}

inline std::string ply_header_text(const GaussianCloud& cloud) {
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\n";
  for (const auto& c : cloud.comments) h << "comment " << c << "\n";
  h << "element vertex " << cloud.size() << "\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) h << "property float " << n << "\n";
  for (int c = 0; c < 3; ++c) h << "property float f_dc_" << c << "\n";
  for (std::size_t c = 0; c < cloud.rest_count; ++c) h << "property float f_rest_" << c << "\n";
  h << "property float opacity\n";
  for (int c = 0; c < 3; ++c) h << "property float scale_" << c << "\n";
  for (int c = 0; c < 4; ++c) h << "property float rot_" << c << "\n";
  h << "end_header\n";
  return h.str();
}

/// Writes the reference layout (normals as zeros). Returns total bytes written.
inline std::size_t save_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
  cloud.check_columns();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");

  const std::string header = ply_header_text(cloud);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  const std::size_t n = cloud.size();
  const std::size_t rest = cloud.rest_count;
  const std::size_t stride = cloud.stride_bytes();
  constexpr std::size_t kBlock = 4096;
  std::vector<unsigned char> buffer(std::min(n, kBlock) * stride);
  for (std::size_t begin = 0; begin < n; begin += kBlock) {
    const std::size_t end = std::min(n, begin + kBlock);
    unsigned char* p = buffer.data();
    for (std::size_t i = begin; i < end; ++i) {
      auto put = [&p](float v) {
        detail::write_le_float(p, v);
        p += sizeof(float);
      };
      for (int c = 0; c < 3; ++c) put(cloud.positions[3 * i + c]);
      for (int c = 0; c < 3; ++c) put(0.0f);
      for (int c = 0; c < 3; ++c) put(cloud.f_dc[3 * i + c]);
      for (std::size_t c = 0; c < rest; ++c) put(cloud.f_rest[rest * i + c]);
      put(cloud.opacity[i]);
      for (int c = 0; c < 3; ++c) put(cloud.scales[3 * i + c]);
      for (int c = 0; c < 4; ++c) put(cloud.rotations[4 * i + c]);
    }
    out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>((end - begin) * stride));
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
  return header.size() + n * stride;
}

/// Rows where keep is nonzero, in original order.
inline GaussianCloud subset(const GaussianCloud& cloud, std::span<const std::uint8_t> keep) {
  if (keep.size() != cloud.size()) {
    throw Error(ErrorKind::LengthMismatch,
                "keep vector has " + std::to_string(keep.size()) + " entries, cloud has " + std::to_string(cloud.size()));
  }
  std::size_t kept = 0;
  for (auto k : keep) kept += (k != 0);

  GaussianCloud out;
  out.rest_count = cloud.rest_count;
  out.comments = cloud.comments;
  out.resize(kept);
  const std::size_t rest = cloud.rest_count;
  std::size_t o = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    std::copy_n(&cloud.positions[3 * i], 3, &out.positions[3 * o]);
    std::copy_n(&cloud.f_dc[3 * i], 3, &out.f_dc[3 * o]);
    std::copy_n(cloud.f_rest.begin() + rest * i, rest, out.f_rest.begin() + rest * o);
    out.opacity[o] = cloud.opacity[i];
    std::copy_n(&cloud.scales[3 * i], 3, &out.scales[3 * o]);
    std::copy_n(&cloud.rotations[4 * i], 4, &out.rotations[4 * o]);
    ++o;
  }
  return out;
}

/// Number of nonzero entries.
inline std::size_t count_kept(std::span<const std::uint8_t> keep) {
  std::size_t n = 0;
  for (auto k : keep) n += (k != 0);
  return n;
}

}  // namespace splatprune
