#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "agmon/auxmetric.hpp"
#include "agmon/errors.hpp"
#include "agmon/pde.hpp"

// Flat little-endian field files.
//   aux / distance: "AGMF" u32 N, u32 d, f64 L, f64 h, u32 kind, u32 payload; then N^3 * d f64 node-major
//   green:          "AGMG" u32 N, f64 L, u32 d, u32 pole_i, pole_j, pole_k; then N^3 d x d row-major f64 blocks
// kind: 0 lower, 1 upper, 2 directional, 3 scalar; payload: 0 aux values, 1 distances

namespace agmon {

namespace detail {

template <class T>
void put_le(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.append(bytes.data(), sizeof(T));
}

template <class T>
T get_le(const std::string& buf, std::size_t& at) {
  if (at + sizeof(T) > buf.size()) throw ConfigError("field file: truncated");
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), buf.data() + at, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  at += sizeof(T);
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

inline void write_bytes(const std::filesystem::path& p, const std::string& buf) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("field file: cannot write " + p.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("field file: cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::string scalar_field_bytes(const Grid3& g, AuxKind kind, std::uint32_t payload, const std::vector<double>& v) {
  std::string buf = "AGMF";
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.N));
  put_le<std::uint32_t>(buf, 1);
  put_le<double>(buf, g.L);
  put_le<double>(buf, g.h());
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(kind));
  put_le<std::uint32_t>(buf, payload);
  for (double x : v) put_le<double>(buf, x);
  return buf;
}

}  // namespace detail

inline void write_field(const std::filesystem::path& p, const AuxField& f) {
  detail::write_bytes(p, detail::scalar_field_bytes(f.grid, f.kind, 0, f.values));
}

inline void write_field(const std::filesystem::path& p, const DistanceField& f) {
  detail::write_bytes(p, detail::scalar_field_bytes(f.grid, f.kind, 1, f.values));
}

inline void write_field(const std::filesystem::path& p, const GreenField& g) {
  std::string buf = "AGMG";
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.grid.N));
  detail::put_le<double>(buf, g.grid.L);
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(g.d));
  for (int c : g.grid.ijk(g.pole)) detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c));
  for (double x : g.blocks) detail::put_le<double>(buf, x);
  detail::write_bytes(p, buf);
}

struct FieldFile {
  Grid3 grid;
  int d = 1;
  AuxKind kind = AuxKind::lower;
  std::uint32_t payload = 0;
  std::size_t pole = 0;
  bool green = false;
  std::vector<double> values;
};

inline FieldFile read_field(const std::filesystem::path& p) {
  std::string buf = detail::read_bytes(p);
  if (buf.size() < 4) throw ConfigError("field file: " + p.string() + " is too short");
  std::string magic = buf.substr(0, 4);
  std::size_t at = 4;
  FieldFile out;
  if (magic == "AGMF") {
    int n = static_cast<int>(detail::get_le<std::uint32_t>(buf, at));
    out.d = static_cast<int>(detail::get_le<std::uint32_t>(buf, at));
    double L = detail::get_le<double>(buf, at);
    detail::get_le<double>(buf, at);
    out.grid = Grid3(L, n);
    out.kind = static_cast<AuxKind>(detail::get_le<std::uint32_t>(buf, at));
    out.payload = detail::get_le<std::uint32_t>(buf, at);
  } else if (magic == "AGMG") {
    out.green = true;
    int n = static_cast<int>(detail::get_le<std::uint32_t>(buf, at));
    double L = detail::get_le<double>(buf, at);
    out.grid = Grid3(L, n);
    out.d = static_cast<int>(detail::get_le<std::uint32_t>(buf, at));
    std::array<int, 3> c{};
    for (int& v : c) v = static_cast<int>(detail::get_le<std::uint32_t>(buf, at));
    out.pole = out.grid.index(c[0], c[1], c[2]);
  } else {
    throw ConfigError("field file: " + p.string() + " has an unknown header");
  }
  std::size_t count = out.grid.size() * out.d * (out.green ? out.d : 1);
  out.values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.values.push_back(detail::get_le<double>(buf, at));
  if (at != buf.size()) throw ConfigError("field file: " + p.string() + " has trailing bytes");
  return out;
}

}  // namespace agmon
