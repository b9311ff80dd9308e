#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agmon/errors.hpp"
#include "agmon/symmat.hpp"
#include "agmon/weights.hpp"

namespace agmon {

inline constexpr double quad_tol = 1e-6;

struct Cube {
  Point center;
  double r = 1;

  int n() const { return static_cast<int>(center.size()); }
  double volume() const { return std::pow(2 * r, n()); }
  bool contains(const Point& x) const { return ((x - center).cwiseAbs().array() <= r).all(); }
};

enum class Scheme { midpoint, gauss_legendre2 };
enum class IntegrationMethod { automatic, exact, quadrature };

struct QuadratureRule {
  int level = 7;  // maximum adaptive depth
  Scheme scheme = Scheme::gauss_legendre2;
  double tol = quad_tol;
  IntegrationMethod method = IntegrationMethod::automatic;
};

struct IntegrationResult {
  Eigen::VectorXd value;
  Eigen::VectorXd error;
  bool converged = true;
  long evaluations = 0;
};

// Options describing the integrand's behaviour at the origin.
struct IntegrandTraits {
  bool split_at_origin = false;
  // per-component homogeneity degree about the origin; empty or NaN = unknown
  std::vector<double> degrees;
  // per-component c with f(t x) = f(x) + c ln t (logarithms of homogeneous fields)
  std::vector<double> log_rates;
};

namespace detail {

template <class F>
class Integrator {
 public:
  Integrator(int n, int k, const F& f, const QuadratureRule& rule) : n_(n), k_(k), f_(f), rule_(rule), buf_(k) {}

  // sum of |f| over a coarse rule, used to scale absolute tolerances
  Eigen::VectorXd magnitude(const Point& lo, const Point& hi) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(k_);
    Point step = (hi - lo) / 2.0;
    int cells = 1 << n_;
    for (int c = 0; c < cells; ++c) {
      Point clo = lo, chi = lo;
      for (int i = 0; i < n_; ++i) {
        int b = (c >> i) & 1;
        clo(i) = lo(i) + b * step(i);
        chi(i) = clo(i) + step(i);
      }
      acc += cell(clo, chi, true);
    }
    return acc;
  }

  void set_tolerance(const Eigen::VectorXd& scale, double total_volume) {
    double top = scale.maxCoeff();
    tol_ = scale.unaryExpr([&](double s) { return std::max(s, 1e-14 * top); }) * rule_.tol;
    volume_ = total_volume;
  }

  Eigen::VectorXd integrate(const Point& lo, const Point& hi) {
    Eigen::VectorXd coarse = cell(lo, hi, false);
    return refine(lo, hi, coarse, 0);
  }

  long evaluations() const { return evals_; }
  const Eigen::VectorXd& error() const { return err_; }
  void reset_error() { err_ = Eigen::VectorXd::Zero(k_); }

 private:
  Eigen::VectorXd cell(const Point& lo, const Point& hi, bool absolute) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(k_);
    int m = rule_.scheme == Scheme::midpoint ? 1 : 2;
    static const double g = 1.0 / std::sqrt(3.0);
    double vol = 1;
    for (int i = 0; i < n_; ++i) vol *= hi(i) - lo(i);
    int total = 1;
    for (int i = 0; i < n_; ++i) total *= m;
    double w = vol / total;
    Point x(n_);
    for (int idx = 0; idx < total; ++idx) {
      int rem = idx;
      for (int i = 0; i < n_; ++i) {
        int b = rem % m;
        rem /= m;
        double mid = 0.5 * (lo(i) + hi(i));
        double half = 0.5 * (hi(i) - lo(i));
        x(i) = m == 1 ? mid : mid + (b == 0 ? -g : g) * half;
      }
      f_(x, buf_.data());
      ++evals_;
      for (int c = 0; c < k_; ++c) acc(c) += w * (absolute ? std::abs(buf_[c]) : buf_[c]);
    }
    return acc;
  }

  Eigen::VectorXd refine(const Point& lo, const Point& hi, const Eigen::VectorXd& coarse, int depth) {
    int cells = 1 << n_;
    std::vector<Point> clos(cells), chis(cells);
    std::vector<Eigen::VectorXd> parts(cells);
    Eigen::VectorXd fine = Eigen::VectorXd::Zero(k_);
    Point mid = 0.5 * (lo + hi);
    for (int c = 0; c < cells; ++c) {
      clos[c] = lo;
      chis[c] = mid;
      for (int i = 0; i < n_; ++i)
        if ((c >> i) & 1) {
          clos[c](i) = mid(i);
          chis[c](i) = hi(i);
        }
      parts[c] = cell(clos[c], chis[c], false);
      fine += parts[c];
    }
    double vol = 1;
    for (int i = 0; i < n_; ++i) vol *= hi(i) - lo(i);
    // Richardson estimate for the fine value assuming at least second order
    // local convergence; cells touching the origin keep the raw difference
    bool touches = true;
    for (int i = 0; i < n_; ++i)
      if (lo(i) > 0 || hi(i) < 0) touches = false;
    Eigen::VectorXd diff = (fine - coarse).cwiseAbs() * (touches ? 1.0 : 1.0 / 3.0);
    bool ok = depth > 0;
    for (int c = 0; c < k_ && ok; ++c)
      if (diff(c) > tol_(c) * vol / volume_) ok = false;
    if (ok || depth + 1 >= rule_.level) {
      err_ += diff;
      return fine;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(k_);
    for (int c = 0; c < cells; ++c) out += refine(clos[c], chis[c], parts[c], depth + 1);
    return out;
  }

  int n_, k_;
  const F& f_;
  const QuadratureRule& rule_;
  std::vector<double> buf_;
  Eigen::VectorXd tol_;
  Eigen::VectorXd err_;
  double volume_ = 1;
  long evals_ = 0;
};

}  // namespace detail

// Integrates a vector-valued integrand f(x, out) with k components over the
// box [lo, hi]. Boxes containing the origin are split there when requested;
// corner cubes of homogeneous components are summed via their self-similar
// structure.
template <class F>
IntegrationResult integrate_box(const Point& lo, const Point& hi, int k, const F& f, const QuadratureRule& rule,
                                const IntegrandTraits& traits = {}) {
  int n = static_cast<int>(lo.size());
  detail::Integrator<F> integ(n, k, f, rule);
  double volume = 1;
  for (int i = 0; i < n; ++i) volume *= hi(i) - lo(i);
  bool contains_origin = true;
  for (int i = 0; i < n; ++i)
    if (lo(i) > 0 || hi(i) < 0) contains_origin = false;
  bool split = contains_origin && (traits.split_at_origin || !traits.degrees.empty() || !traits.log_rates.empty());

  IntegrationResult res;
  res.value = Eigen::VectorXd::Zero(k);
  integ.reset_error();
  Eigen::VectorXd scale = integ.magnitude(lo, hi);
  integ.set_tolerance(scale, volume);

  if (!split) {
    res.value = integ.integrate(lo, hi);
  } else {
    auto complete = [&](const std::vector<double>& v) {
      if (static_cast<int>(v.size()) != k) return false;
      for (double g : v)
        if (std::isnan(g)) return false;
      return true;
    };
    bool logarithmic = !complete(traits.degrees) && complete(traits.log_rates);
    bool homogeneous = complete(traits.degrees) || logarithmic;
    int corners = 1 << n;
    for (int c = 0; c < corners; ++c) {
      Point sign(n), ext(n);
      bool empty = false;
      for (int i = 0; i < n; ++i) {
        sign(i) = ((c >> i) & 1) ? 1.0 : -1.0;
        ext(i) = sign(i) > 0 ? hi(i) : -lo(i);
        if (ext(i) <= 0) empty = true;
      }
      if (empty) continue;
      auto oriented = [&](const Point& a, const Point& b, Point& olo, Point& ohi) {
        olo.resize(n);
        ohi.resize(n);
        for (int i = 0; i < n; ++i) {
          double u = sign(i) * a(i), v = sign(i) * b(i);
          olo(i) = std::min(u, v);
          ohi(i) = std::max(u, v);
        }
      };
      Point olo, ohi;
      if (!homogeneous) {
        oriented(Point::Zero(n), ext, olo, ohi);
        res.value += integ.integrate(olo, ohi);
        continue;
      }
      double side = ext.minCoeff();
      // corner cube [0, side]^n: ring of 2^n - 1 half cubes, then geometric sum
      Eigen::VectorXd ring = Eigen::VectorXd::Zero(k);
      for (int s = 1; s < corners; ++s) {
        Point a(n), b(n);
        for (int i = 0; i < n; ++i) {
          a(i) = ((s >> i) & 1) ? 0.5 * side : 0.0;
          b(i) = a(i) + 0.5 * side;
        }
        oriented(a, b, olo, ohi);
        ring += integ.integrate(olo, ohi);
      }
      for (int j = 0; j < k; ++j) {
        if (logarithmic) {
          double q = std::pow(2.0, -n);
          res.value(j) += (ring(j) - q * std::pow(side, n) * traits.log_rates[j] * std::log(2.0)) / (1 - q);
          continue;
        }
        double e = n + traits.degrees[j];
        if (e <= 0) {
          res.value(j) = ring(j) == 0 ? 0.0 : std::copysign(INFINITY, ring(j));
          continue;
        }
        res.value(j) += ring(j) / (1.0 - std::pow(2.0, -e));
      }
      // remainder of the corner box outside the corner cube
      for (int i = 0; i < n; ++i) {
        if (ext(i) <= side) continue;
        Point a(n), b(n);
        for (int j = 0; j < n; ++j) {
          if (j < i) {
            a(j) = 0;
            b(j) = side;
          } else if (j == i) {
            a(j) = side;
            b(j) = ext(j);
          } else {
            a(j) = 0;
            b(j) = ext(j);
          }
        }
        oriented(a, b, olo, ohi);
        res.value += integ.integrate(olo, ohi);
      }
    }
  }
  res.error = integ.error();
  res.evaluations = integ.evaluations();
  res.converged = true;
  double top = scale.maxCoeff();
  for (int j = 0; j < k; ++j) {
    double allowed = rule.tol * std::max({scale(j), std::abs(res.value(j)), 1e-14 * top});
    if (res.error(j) > allowed) res.converged = false;
  }
  return res;
}

template <class F>
IntegrationResult integrate_cube(const Cube& q, int k, const F& f, const QuadratureRule& rule,
                                 const IntegrandTraits& traits = {}) {
  Point lo = q.center.array() - q.r;
  Point hi = q.center.array() + q.r;
  return integrate_box(lo, hi, k, f, rule, traits);
}

inline void require_converged(const IntegrationResult& r, const std::string& op) {
  if (!r.converged)
    throw QuadratureNonConvergence(op + ": refinements disagree beyond tolerance at maximum level (error " +
                                   std::to_string(r.error.maxCoeff()) + ")");
}

namespace detail {

inline SymMat unpack(const Eigen::VectorXd& v, int d, double scale = 1.0) {
  SymMat m(d);
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) m.set(i, j, v(idx++) * scale);
  return m;
}

inline void pack(const SymMat& m, double* out) {
  int idx = 0;
  for (int i = 0; i < m.dim(); ++i)
    for (int j = i; j < m.dim(); ++j) out[idx++] = m(i, j);
}

inline bool use_exact(const MatrixWeight& w, const QuadratureRule& rule) {
  if (rule.method == IntegrationMethod::quadrature) return false;
  bool have = w.polynomial_entries().has_value();
  if (rule.method == IntegrationMethod::exact && !have)
    throw ConfigError("exact integration requested for non-polynomial weight '" + w.name() + "'");
  return have;
}

}  // namespace detail

// integral of W over Q
inline SymMat integral(const MatrixWeight& w, const Cube& q, const QuadratureRule& rule = {}) {
  if (q.n() != w.n()) throw ConfigError("integral: cube dimension does not match weight");
  if (!(q.r > 0)) throw ConfigError("integral: cube half-side must be positive");
  int d = w.d();
  if (detail::use_exact(w, rule)) {
    auto entries = *w.polynomial_entries();
    Eigen::VectorXd v(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) v(i) = entries[i].integrate_cube(q.center, q.r);
    return detail::unpack(v, d);
  }
  auto f = [&](const Point& x, double* out) { detail::pack(w.eval(x), out); };
  IntegrandTraits traits{w.singular_at_origin(), {}};
  if (w.singular_at_origin()) traits.degrees = w.entry_degrees();
  auto res = integrate_cube(q, w.components(), f, rule, traits);
  require_converged(res, "average of '" + w.name() + "'");
  return detail::unpack(res.value, d);
}

inline SymMat average(const MatrixWeight& w, const Cube& q, const QuadratureRule& rule = {}) {
  return integral(w, q, rule) * (1.0 / q.volume());
}

inline void require_psi_dimension(const MatrixWeight& w) {
  if (w.n() < 3) throw ConfigError("psi: averaged matrix needs n >= 3, weight '" + w.name() + "' has n = " + std::to_string(w.n()));
}

// r^{2-n} * integral of W over Q(x, r)
inline SymMat psi(const MatrixWeight& w, const Point& x, double r, const QuadratureRule& rule = {}) {
  require_psi_dimension(w);
  if (!(r > 0)) throw ConfigError("psi: radius must be positive");
  return integral(w, Cube{x, r}, rule) * std::pow(r, 2 - w.n());
}

// Psi(x, .) at a fixed centre. For polynomial weights the integral is a
// polynomial in r, so each evaluation is a short Horner loop.
class PsiEvaluator {
 public:
  PsiEvaluator(const MatrixWeight& w, const Point& x, const QuadratureRule& rule = {}) : w_(w), x_(x), rule_(rule) {
    require_psi_dimension(w);
    if (detail::use_exact(w, rule)) {
      auto entries = w.polynomial_entries();
      for (const auto& p : *entries) coeffs_.push_back(p.cube_integral_in_r(x));
    }
  }

  SymMat operator()(double r) const {
    if (!(r > 0)) throw ConfigError("psi: radius must be positive");
    auto it = cache_.find(r);
    if (it != cache_.end()) return it->second;
    SymMat out;
    if (!coeffs_.empty()) {
      Eigen::VectorXd v(coeffs_.size());
      for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        double s = 0;
        const auto& a = coeffs_[i];
        for (std::size_t j = a.size(); j-- > 0;) s = s * r + a[j];
        v(i) = s;
      }
      out = detail::unpack(v, w_.d(), std::pow(r, 2 - w_.n()));
    } else {
      out = psi(w_, x_, r, rule_);
    }
    cache_.emplace(r, out);
    return out;
  }

  bool exact() const { return !coeffs_.empty(); }

  // Coarse value and a bound on its spectral error; exact weights return 0.
  std::pair<SymMat, double> estimate(double r, int level = 4) const {
    if (exact()) return {(*this)(r), 0.0};
    auto it = cache_.find(r);
    if (it != cache_.end()) return {it->second, 0.0};
    QuadratureRule coarse = rule_;
    coarse.level = std::min(level, rule_.level);
    auto f = [&](const Point& y, double* out) { detail::pack(w_.eval(y), out); };
    IntegrandTraits traits{w_.singular_at_origin(), {}, {}};
    if (w_.singular_at_origin()) traits.degrees = w_.entry_degrees();
    auto res = integrate_cube(Cube{x_, r}, w_.components(), f, coarse, traits);
    double scale = std::pow(r, 2 - w_.n());
    // spectral norm <= Frobenius norm of the componentwise error matrix
    double fro = 0;
    int idx = 0;
    for (int i = 0; i < w_.d(); ++i)
      for (int j = i; j < w_.d(); ++j) {
        double e = res.error(idx++) * scale;
        fro += (i == j ? 1 : 2) * e * e;
      }
    return {detail::unpack(res.value, w_.d(), scale), std::sqrt(fro)};
  }

  const MatrixWeight& weight() const { return w_; }
  const Point& center() const { return x_; }

 private:
  const MatrixWeight& w_;
  Point x_;
  QuadratureRule rule_;
  std::vector<std::vector<double>> coeffs_;
  mutable std::map<double, SymMat> cache_;
};

// ---- reducing matrices ------------------------------------------------------

// Unit directions: the d coordinate axes followed by seeded uniform samples.
inline std::vector<Vec> sample_directions(int d, int count, std::uint64_t seed) {
  std::vector<Vec> dirs;
  for (int i = 0; i < d && static_cast<int>(dirs.size()) < count; ++i) dirs.push_back(Vec::Unit(d, i));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  while (static_cast<int>(dirs.size()) < count) {
    Vec e(d);
    for (int i = 0; i < d; ++i) e(i) = normal(rng);
    double len = e.norm();
    if (len < 1e-12) continue;
    dirs.push_back(e / len);
  }
  return dirs;
}

// Khachiyan iteration for the minimum-volume origin-centred ellipsoid
// {z : z^T A z <= 1} containing the points +-z_i.
inline SymMat symmetric_mvee(const std::vector<Vec>& pts, double tol = 1e-6, int max_iter = 200000) {
  int d = static_cast<int>(pts[0].size());
  std::size_t m = pts.size();
  std::vector<double> u(m, 1.0 / m);
  Mat xinv;
  for (int it = 0; it < max_iter; ++it) {
    Mat x = Mat::Zero(d, d);
    for (std::size_t i = 0; i < m; ++i) x += u[i] * pts[i] * pts[i].transpose();
    xinv = x.inverse();
    std::size_t jmax = 0, jmin = 0;
    double mmax = -1, mmin = INFINITY;
    for (std::size_t i = 0; i < m; ++i) {
      double v = pts[i].dot(xinv * pts[i]);
      if (v > mmax) {
        mmax = v;
        jmax = i;
      }
      if (u[i] > 0 && v < mmin) {
        mmin = v;
        jmin = i;
      }
    }
    if (mmax <= d * (1 + tol) && mmin >= d * (1 - tol)) break;
    // Wolfe-Atwood away steps keep the iteration linearly convergent
    std::size_t j = jmax;
    double step = (mmax - d) / (d * (mmax - 1));
    if (d - mmin > mmax - d && mmin > 1) {
      j = jmin;
      step = std::max((mmin - d) / (d * (mmin - 1)), -u[jmin] / (1 - u[jmin]));
    }
    for (auto& ui : u) ui *= 1 - step;
    u[j] += step;
    if (u[j] < 0) u[j] = 0;
  }
  SymMat a = SymMat::from(xinv / d);
  double worst = 0;
  for (const auto& z : pts) worst = std::max(worst, a.quad(z));
  return a * (1.0 / worst);
}

struct ReducingMatrix {
  SymMat r;
  std::vector<Vec> directions;
  std::vector<double> norms;  // sampled (avg |W^{1/p} e|^p)^{1/p}
};

// John-ellipsoid matrix R with  nu(e) <= |R e| <= sqrt(d) nu(e)  on the
// sampled directions, where nu(e) = norms[i] of the given directions.
inline SymMat reducing_from_norms(const std::vector<Vec>& dirs, const std::vector<double>& norms) {
  double top = *std::max_element(norms.begin(), norms.end());
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (!(norms[i] > 1e-14 * top) || !(top > 0))
      throw Degenerate("reducing_matrix: norm functional vanishes in a sampled direction");
    pts.push_back(dirs[i] / norms[i]);
  }
  SymMat a = symmetric_mvee(pts);
  double c = 0;
  for (const auto& z : pts) c = std::max(c, 1.0 / std::sqrt(a.quad(z)));
  return sqrt_psd(a) * c;
}

// (avg_Q |F(x)^{1/p} e|^p)^{1/p} over a direction set, for a matrix field F.
template <class Field>
std::vector<double> directional_norms(const Field& field, int n, const Cube& q, double p, const std::vector<Vec>& dirs,
                                      const QuadratureRule& rule, const IntegrandTraits& traits, const std::string& op) {
  int k = static_cast<int>(dirs.size());
  auto f = [&](const Point& x, double* out) {
    SymMat root = pow_psd(field(x), 1.0 / p);
    for (int i = 0; i < k; ++i) out[i] = std::pow((root.matrix() * dirs[i]).norm(), p);
  };
  (void)n;
  auto res = integrate_cube(q, k, f, rule, traits);
  require_converged(res, op);
  std::vector<double> norms(k);
  for (int i = 0; i < k; ++i) norms[i] = std::pow(res.value(i) / q.volume(), 1.0 / p);
  return norms;
}

inline ReducingMatrix reducing_matrix_sampled(const MatrixWeight& w, const Cube& q, double p,
                                              const QuadratureRule& rule = {}, std::uint64_t seed = 7) {
  ReducingMatrix out;
  out.directions = sample_directions(w.d(), 64 * w.d(), seed);
  IntegrandTraits traits{w.singular_at_origin(), {}};
  if (auto h = w.homogeneity()) traits.degrees.assign(out.directions.size(), *h);
  out.norms = directional_norms([&](const Point& x) { return w.eval(x); }, w.n(), q, p, out.directions, rule, traits,
                                "reducing_matrix of '" + w.name() + "'");
  out.r = reducing_from_norms(out.directions, out.norms);
  return out;
}

inline SymMat reducing_matrix(const MatrixWeight& w, const Cube& q, double p, const QuadratureRule& rule = {}) {
  if (!(p >= 1)) throw ConfigError("reducing_matrix: exponent p must be >= 1");
  if (p == 2) {
    SymMat a = average(w, q, rule);
    Vec ev = a.eigenvalues();
    if (!(ev(0) > 1e-14 * std::max(ev(ev.size() - 1), 0.0)))
      throw Degenerate("reducing_matrix: average of '" + w.name() + "' is singular");
    return sqrt_psd(a);
  }
  return reducing_matrix_sampled(w, q, p, rule).r;
}

// ---- determinant lemmas -------------------------------------------------------

struct JensenCheck {
  double lhs = 0;
  double rhs = 0;
  bool pass = false;
};

// integral of ln det W over Q; DomainError if det W <= 0 at a node
inline double integral_logdet(const MatrixWeight& w, const Cube& q, const QuadratureRule& rule = {}) {
  auto f = [&](const Point& x, double* out) {
    SymMat v = w.eval(x);
    Vec ev = v.eigenvalues();
    double top = std::max(std::abs(ev(ev.size() - 1)), 0.0);
    if (!(ev(0) > tol_eig * top))
      throw DomainError("log-determinant of '" + w.name() + "': det W <= 0 at a quadrature node");
    double s = 0;
    for (int i = 0; i < ev.size(); ++i) s += std::log(ev(i));
    out[0] = s;
  };
  IntegrandTraits traits{w.singular_at_origin(), {}, {}};
  double rate = w.determinant_degree();
  if (!std::isnan(rate)) traits.log_rates = {rate};
  auto res = integrate_cube(q, 1, f, rule, traits);
  // exp(mean) is what callers use, so an absolute floor on the mean suffices
  // (ln det W can vanish identically up to rounding)
  if (res.error(0) <= 1e-12 * q.volume()) res.converged = true;
  require_converged(res, "log-determinant average of '" + w.name() + "'");
  return res.value(0);
}

inline JensenCheck check_matrix_jensen(const MatrixWeight& w, const Cube& q, const QuadratureRule& rule = {}) {
  JensenCheck out;
  out.rhs = std::exp(integral_logdet(w, q, rule) / q.volume());
  out.lhs = average(w, q, rule).det();
  out.pass = out.lhs >= out.rhs * (1 - rule.tol);
  return out;
}

// Same inequality for a discrete probability measure sum_i w_i delta_{M_i}.
inline JensenCheck check_matrix_jensen(const std::vector<SymMat>& mats, const std::vector<double>& weights,
                                       double slack = 1e-12) {
  if (mats.empty() || mats.size() != weights.size()) throw ConfigError("check_matrix_jensen: bad sample list");
  SymMat mean(mats[0].dim());
  double total = 0, log_mean = 0;
  for (std::size_t i = 0; i < mats.size(); ++i) total += weights[i];
  for (std::size_t i = 0; i < mats.size(); ++i) {
    double w = weights[i] / total;
    mean += mats[i] * w;
    log_mean += w * logdet(mats[i]);
  }
  JensenCheck out;
  out.lhs = mean.det();
  out.rhs = std::exp(log_mean);
  out.pass = out.lhs >= out.rhs * (1 - slack);
  return out;
}

struct HadamardCheck {
  double det = 0;
  double diag_product = 0;
  double column_product = 0;
  bool pass = false;
};

inline HadamardCheck check_hadamard(const SymMat& m, const Mat& basis) {
  int d = m.dim();
  Mat gram = basis.transpose() * basis;
  if ((gram - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("check_hadamard: basis is not orthonormal to 1e-12");
  if (!is_psd(m)) throw NotPSD("check_hadamard: matrix is not PSD: " + m.str());
  HadamardCheck out;
  out.det = m.det();
  out.diag_product = 1;
  out.column_product = 1;
  for (int j = 0; j < d; ++j) {
    Vec e = basis.col(j);
    out.diag_product *= m.quad(e);
    out.column_product *= (m.matrix() * e).norm();
  }
  double slack = 1e-12;
  auto le = [&](double a, double b) { return a <= b + slack * std::max({std::abs(a), std::abs(b), 1e-300}); };
  out.pass = le(out.det, out.diag_product) && le(out.diag_product, out.column_product);
  return out;
}

// ---- growth and doubling ------------------------------------------------------

// lambda_max(Psi(R)^{-1/2} Psi(r) Psi(R)^{-1/2}) / (r/R)^{2 - n/p}
inline double controlled_growth(const MatrixWeight& w, const Point& x, double r, double big_r, double p,
                                const QuadratureRule& rule = {}) {
  SymMat small = psi(w, x, r, rule);
  SymMat big = psi(w, x, big_r, rule);
  SymMat s = inv_sqrt(big);
  double lam = congruence(s.matrix(), small).lambda_max();
  return lam / std::pow(r / big_r, 2.0 - w.n() / p);
}

// lambda_max((int_Q W)^{-1/2} (int_2Q W) (int_Q W)^{-1/2})
inline double doubling_ratio(const MatrixWeight& w, const Cube& q, const QuadratureRule& rule = {}) {
  SymMat inner = integral(w, q, rule);
  SymMat outer = integral(w, Cube{q.center, 2 * q.r}, rule);
  SymMat s = inv_sqrt(inner);
  return congruence(s.matrix(), outer).lambda_max();
}

// ---- cube families --------------------------------------------------------------

enum class FamilyGenerator { dyadic, random, explicit_list };

struct CubeFamily {
  FamilyGenerator generator = FamilyGenerator::random;
  int n = 3;
  std::size_t count = 64;
  double r_min = 0.05;
  double r_max = 1.0;
  double box = 1.0;  // experiment box [-box, box]^n
  std::uint64_t seed = 1;
  int refinement = 0;
  std::vector<Cube> extra;  // added to every generator

  CubeFamily refined(int j) const {
    CubeFamily f = *this;
    f.refinement = refinement + j;
    return f;
  }

  // extra cubes come first so that refinements extend the list as a prefix
  std::vector<Cube> cubes() const {
    std::vector<Cube> out = extra;
    if (generator == FamilyGenerator::dyadic) {
      double lo = r_min / std::pow(2.0, refinement);
      for (int level = 0; level < 30; ++level) {
        double r = box / std::pow(2.0, level);
        if (r < lo * (1 - 1e-12)) break;
        if (r > r_max * (1 + 1e-12)) continue;
        long per_axis = 1L << level;
        long total = 1;
        for (int i = 0; i < n; ++i) total *= per_axis;
        long take = count > 0 ? std::min<long>(total, static_cast<long>(count)) : total;
        for (long s = 0; s < take; ++s) {
          long idx = take == total ? s : static_cast<long>((static_cast<double>(s) * total) / take);
          Point c(n);
          long rem = idx;
          for (int i = 0; i < n; ++i) {
            long k = rem % per_axis;
            rem /= per_axis;
            c(i) = -box + (2 * k + 1) * r;
          }
          out.push_back({c, r});
        }
      }
    } else if (generator == FamilyGenerator::random) {
      for (int b = 0; b <= refinement; ++b) {
        std::size_t draws = b == 0 ? count : count << (b - 1);
        double lo = r_min / std::pow(2.0, b);
        double hi = std::min(r_max, box);
        std::mt19937_64 rng(seed + 1000003ULL * b);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t s = 0; s < draws; ++s) {
          double r = lo * std::pow(hi / lo, unit(rng));
          Point c(n);
          for (int i = 0; i < n; ++i) c(i) = -box + r + (2 * (box - r)) * unit(rng);
          out.push_back({c, r});
        }
      }
    }
    return out;
  }
};

}  // namespace agmon
