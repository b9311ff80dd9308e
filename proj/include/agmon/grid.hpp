#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "agmon/errors.hpp"
#include "agmon/symmat.hpp"

namespace agmon {

// Interior nodes of [-L, L]^3: x_i = -L + (i + 1) h, h = 2L / (N + 1).
struct Grid3 {
  double L = 1;
  int N = 9;

  Grid3() = default;
  Grid3(double half_width, int nodes) : L(half_width), N(nodes) { validate(); }

  void validate() const {
    if (N < 9) throw ConfigError("grid: N must be at least 9, got " + std::to_string(N));
    if (!(L > 0)) throw ConfigError("grid: half-width L must be positive");
  }

  double h() const { return 2 * L / (N + 1); }
  std::size_t size() const { return static_cast<std::size_t>(N) * N * N; }
  std::size_t index(int i, int j, int k) const { return static_cast<std::size_t>(i) + N * (static_cast<std::size_t>(j) + static_cast<std::size_t>(N) * k); }
  std::array<int, 3> ijk(std::size_t idx) const {
    int i = static_cast<int>(idx % N);
    int j = static_cast<int>((idx / N) % N);
    int k = static_cast<int>(idx / (static_cast<std::size_t>(N) * N));
    return {i, j, k};
  }
  double coord(int i) const { return -L + (i + 1) * h(); }
  Point node(std::size_t idx) const {
    auto [i, j, k] = ijk(idx);
    Point p(3);
    p << coord(i), coord(j), coord(k);
    return p;
  }
  // nearest node to a point (clamped to the grid)
  std::size_t nearest(const Point& x) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      int i = static_cast<int>(std::lround((x(a) + L) / h() - 1));
      c[a] = std::min(std::max(i, 0), N - 1);
    }
    return index(c[0], c[1], c[2]);
  }
  bool contains(int i, int j, int k) const { return i >= 0 && j >= 0 && k >= 0 && i < N && j < N && k < N; }
};

}  // namespace agmon
