#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "agmon/cubature.hpp"
#include "agmon/errors.hpp"
#include "agmon/grid.hpp"
#include "agmon/parallel.hpp"
#include "agmon/weights.hpp"

namespace agmon {

enum class AuxKind { lower, upper, directional, scalar };

inline const char* aux_kind_name(AuxKind k) {
  switch (k) {
    case AuxKind::lower: return "lower";
    case AuxKind::upper: return "upper";
    case AuxKind::directional: return "directional";
    case AuxKind::scalar: return "scalar";
  }
  return "?";
}

struct AuxQuery {
  Point x;
  AuxKind kind = AuxKind::lower;
  Vec e;                                // directional
  std::optional<ScalarWeight> scalar;  // scalar
  double r_lo = 1e-4;
  double r_hi = 1e4;
};

struct AuxOptions {
  int per_decade = 64;
  double rel_tol = 1e-12;
  QuadratureRule rule;
};

inline double aux_criterion(const SymMat& psi_value, AuxKind kind, const Vec& e) {
  switch (kind) {
    case AuxKind::lower: return psi_value.lambda_min();
    case AuxKind::upper:
    case AuxKind::scalar: return psi_value.lambda_max();
    case AuxKind::directional: return psi_value.quad(e);
  }
  return 0;
}

// m = 1 / sup{r : criterion(Psi(x, r)) <= 1}, located by a downward log
// scan over [r_lo, r_hi] and bisection on the last crossing.
inline double aux_value(const PsiEvaluator& psi_at, AuxKind kind, const Vec& e, const AuxOptions& opts = {},
                        double r_lo = 1e-4, double r_hi = 1e4) {
  if (!(r_lo > 0 && r_lo < r_hi)) throw ConfigError("aux_value: invalid radius bracket");
  auto crit = [&](double r) { return aux_criterion(psi_at(r), kind, e); };
  double decades = std::log10(r_hi / r_lo);
  int steps = static_cast<int>(std::ceil(opts.per_decade * decades - 1e-9));
  auto radius = [&](int k) { return k >= steps ? r_hi : r_lo * std::pow(10.0, k / static_cast<double>(opts.per_decade)); };
  auto where = [&] {
    std::string s = "(";
    for (int i = 0; i < psi_at.center().size(); ++i) s += (i ? ", " : "") + std::to_string(psi_at.center()(i));
    return s + ")";
  };
  // Quadrature weights are scanned with coarse rules; a sample is trusted
  // when its error bar keeps it on the right side of the threshold,
  // otherwise the full rule decides.
  auto exceeds = [&](double r, double threshold) {
    if (psi_at.exact()) return crit(r) > threshold;
    for (int level : {3, 5}) {
      auto [value, err] = psi_at.estimate(r, level);
      double c = aux_criterion(value, kind, e);
      double margin = 10 * err + 1e-9 * std::abs(c);
      if (c - threshold > margin) return true;
      if (threshold - c > margin) return false;
    }
    return crit(r) > threshold;
  };
  auto below = [&](double r) { return !exceeds(r, 1.0); };
  if (below(r_hi))
    throw BracketFailure(std::string("aux_value: ") + aux_kind_name(kind) + " criterion for '" + psi_at.weight().name() +
                         "' stays <= 1 up to r = " + std::to_string(r_hi) + " at x = " + where());
  // W >= 0 makes the cube integral nondecreasing in r, so
  // crit(r) >= (a / r)^{n-2} crit(a) for r >= a; one value at the lower end
  // can clear a whole run of scan radii.
  int n = psi_at.weight().n();
  int found = -1, top = steps, jump = 1;
  while (top > 0) {
    int k = std::max(0, top - jump);
    if (jump > 1) {
      double factor = std::pow(radius(top) / radius(k), n - 2);
      if (exceeds(radius(k), factor)) {
        top = k;
        jump *= 2;
        continue;
      }
      jump = std::max(1, jump / 4);
      continue;
    }
    if (below(radius(k))) {
      found = k;
      break;
    }
    top = k;
    jump = 2;
  }
  if (found < 0)
    throw BracketFailure(std::string("aux_value: ") + aux_kind_name(kind) + " criterion for '" + psi_at.weight().name() +
                         "' exceeds 1 already at r = " + std::to_string(r_lo) + " at x = " + where());
  double lo = radius(found), hi = radius(found + 1);
  // quadrature values carry ~1e-6 relative error, finer bisection is noise
  double tol = psi_at.exact() ? opts.rel_tol : std::max(opts.rel_tol, 1e-8);
  while (hi / lo - 1 > tol) {
    double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    if (below(mid))
      lo = mid;
    else
      hi = mid;
  }
  return 1.0 / std::sqrt(lo * hi);
}

inline double aux_value(const MatrixWeight& w, const AuxQuery& q, const AuxOptions& opts = {}) {
  if (q.kind == AuxKind::scalar) {
    if (!q.scalar) throw ConfigError("aux_value: scalar query without a scalar weight");
    MatrixWeight s = MatrixWeight::scalar(w.n(), *q.scalar);
    PsiEvaluator p(s, q.x, opts.rule);
    return aux_value(p, AuxKind::upper, Vec(), opts, q.r_lo, q.r_hi);
  }
  Vec e = q.e;
  if (q.kind == AuxKind::directional) {
    if (e.size() != w.d() || !(e.norm() > 0)) throw ConfigError("aux_value: directional query needs a nonzero d-vector");
    e /= e.norm();
  }
  PsiEvaluator p(w, q.x, opts.rule);
  return aux_value(p, q.kind, e, opts, q.r_lo, q.r_hi);
}

struct AuxField {
  Grid3 grid;
  AuxKind kind = AuxKind::lower;
  std::string weight;
  std::vector<double> values;

  double operator[](std::size_t i) const { return values[i]; }
  double max() const { return *std::max_element(values.begin(), values.end()); }
};

inline AuxField aux_field(const MatrixWeight& w, const Grid3& grid, AuxKind kind, const AuxOptions& opts = {},
                          const Parallelism& par = Parallelism::serial(), const Vec& e = Vec()) {
  if (w.n() != 3) throw ConfigError("aux_field: grids are three-dimensional, weight '" + w.name() + "' is not");
  if (kind == AuxKind::scalar && w.d() != 1) throw ConfigError("aux_field: scalar kind needs a 1 x 1 weight");
  AuxField f{grid, kind, w.name(), std::vector<double>(grid.size())};
  AuxKind crit = kind == AuxKind::scalar ? AuxKind::upper : kind;
  par.for_each(grid.size(), [&](std::size_t i) {
    PsiEvaluator p(w, grid.node(i), opts.rule);
    f.values[i] = aux_value(p, crit, e, opts);
  });
  return f;
}

inline AuxField scalar_aux_field(int n, const ScalarWeight& v, const Grid3& grid, const AuxOptions& opts = {},
                                 const Parallelism& par = Parallelism::serial()) {
  MatrixWeight s = MatrixWeight::scalar(n, v);
  return aux_field(s, grid, AuxKind::scalar, opts, par);
}

// ---- slow variation -------------------------------------------------------------

struct SlowVariation {
  double c_a = 1;   // comparability constant on |x - y| <= 1/m(x)
  double c_b = 1;   // growth constant (taken equal to c_a)
  double k0 = 0;    // fitted growth exponent
  double c_c = 1;   // lower decay constant
  std::size_t close_pairs = 0;
  std::size_t pairs = 0;
};

inline double linf(const Point& a, const Point& b) { return (a - b).cwiseAbs().maxCoeff(); }

inline SlowVariation slow_variation_check(const AuxField& field, std::size_t pair_count = 10000, std::uint64_t seed = 3) {
  const Grid3& g = field.grid;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> node(0, g.size() - 1);
  struct Pair {
    std::size_t a, b;
  };
  std::vector<Pair> pairs;
  pairs.reserve(pair_count);
  for (std::size_t s = 0; s < pair_count; ++s) {
    std::size_t a = node(rng);
    std::size_t b;
    if (s % 2 == 0) {
      // partner inside the comparability cube of a
      int reach = static_cast<int>(std::floor(1.0 / (field[a] * g.h())));
      auto c = g.ijk(a);
      std::uniform_int_distribution<int> off(-reach, reach);
      int i = std::clamp(c[0] + off(rng), 0, g.N - 1);
      int j = std::clamp(c[1] + off(rng), 0, g.N - 1);
      int k = std::clamp(c[2] + off(rng), 0, g.N - 1);
      b = g.index(i, j, k);
    } else {
      b = node(rng);
    }
    pairs.push_back({a, b});
  }
  SlowVariation out;
  out.pairs = pairs.size();
  std::vector<std::pair<double, double>> growth;  // (t, ratio)
  for (const auto& p : pairs) {
    double mx = field[p.a], my = field[p.b];
    double dist = linf(g.node(p.a), g.node(p.b));
    double t = dist * mx;
    if (t <= 1) {
      out.c_a = std::max(out.c_a, std::max(mx / my, my / mx));
      ++out.close_pairs;
    }
    growth.emplace_back(t, my / mx);
  }
  out.c_b = out.c_a;
  for (const auto& [t, ratio] : growth)
    if (t > 0 && ratio > out.c_b) out.k0 = std::max(out.k0, std::log(ratio / out.c_b) / std::log1p(t));
  double expo = out.k0 / (out.k0 + 1);
  for (const auto& [t, ratio] : growth) out.c_c = std::min(out.c_c, ratio * std::pow(1 + t, expo));
  return out;
}

// ---- Agmon distances ------------------------------------------------------------

enum class PathNorm { linf, l2 };

struct DistanceField {
  Grid3 grid;
  std::size_t source = 0;
  AuxKind kind = AuxKind::lower;
  PathNorm norm = PathNorm::linf;
  std::vector<double> values;

  double operator[](std::size_t i) const { return values[i]; }
};

// Dijkstra on the 26-neighbour lattice; edge cost (m(a) + m(b))/2 * |a - b|.
inline DistanceField agmon_field(const AuxField& field, std::size_t source, PathNorm norm = PathNorm::linf) {
  const Grid3& g = field.grid;
  if (source >= g.size()) throw ConfigError("agmon_field: source node outside the grid");
  DistanceField out{g, source, field.kind, norm, std::vector<double>(g.size(), INFINITY)};
  std::vector<char> done(g.size(), 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  out.values[source] = 0;
  queue.push({0.0, source});
  double h = g.h();
  const double lengths[4] = {0, h, h * std::sqrt(2.0), h * std::sqrt(3.0)};
  while (!queue.empty()) {
    auto [dist, a] = queue.top();
    queue.pop();
    if (done[a]) continue;
    done[a] = 1;
    auto c = g.ijk(a);
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (!di && !dj && !dk) continue;
          int i = c[0] + di, j = c[1] + dj, k = c[2] + dk;
          if (!g.contains(i, j, k)) continue;
          std::size_t b = g.index(i, j, k);
          if (done[b]) continue;
          double len = norm == PathNorm::linf ? h : lengths[std::abs(di) + std::abs(dj) + std::abs(dk)];
          double cand = dist + 0.5 * (field[a] + field[b]) * len;
          if (cand < out.values[b]) {
            out.values[b] = cand;
            queue.push({cand, b});
          }
        }
  }
  return out;
}

struct ClosePairReport {
  std::vector<double> c0 = {1, 2, 4};
  std::vector<double> k_hat;  // per c0
  double k_max = 0;
  std::size_t pairs = 0;
};

// K = max d(x, y) / (|x - y| m(x)) over pairs with |x - y| m(x) <= C0.
inline ClosePairReport close_pair_check(const AuxField& field, const std::vector<const DistanceField*>& dists) {
  ClosePairReport out;
  out.k_hat.assign(out.c0.size(), 0.0);
  for (const DistanceField* df : dists) {
    Point y = field.grid.node(df->source);
    for (std::size_t i = 0; i < field.grid.size(); ++i) {
      if (i == df->source) continue;
      double t = linf(field.grid.node(i), y) * field[i];
      for (std::size_t c = 0; c < out.c0.size(); ++c)
        if (t <= out.c0[c]) {
          out.k_hat[c] = std::max(out.k_hat[c], (*df)[i] / t);
          if (c == 0) ++out.pairs;
        }
    }
  }
  out.k_max = *std::max_element(out.k_hat.begin(), out.k_hat.end());
  return out;
}

}  // namespace agmon
