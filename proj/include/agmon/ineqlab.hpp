#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "agmon/auxmetric.hpp"
#include "agmon/cubature.hpp"
#include "agmon/errors.hpp"
#include "agmon/grid.hpp"
#include "agmon/pde.hpp"
#include "agmon/weights.hpp"

namespace agmon {

// Gauss-Legendre nodes and weights on [a, b] split into `panels` pieces.
inline std::vector<std::pair<double, double>> gauss_legendre(double a, double b, int panels = 1) {
  using rule = boost::math::quadrature::gauss<double, 8>;
  std::vector<std::pair<double, double>> out;
  double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * w, mid = lo + 0.5 * w, half = 0.5 * w;
    for (std::size_t i = 0; i < rule::abscissa().size(); ++i) {
      double x = rule::abscissa()[i], wt = rule::weights()[i];
      out.emplace_back(mid - half * x, half * wt);
      out.emplace_back(mid + half * x, half * wt);
    }
  }
  return out;
}

// ---- Poincare -----------------------------------------------------------------------

struct TestFunction {
  int d = 1;
  std::function<Vec(const Point&)> u;
  std::function<Mat(const Point&)> grad;  // d x n
};

struct PoincareResult {
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
};

// int_Q int_Q |V(Q)^{-1/2} V^{1/2}(y) (u(x) - u(y))|^2  against  |Q|^{2/n} int_Q |Du|^2,
// evaluated with a composite Gauss-Legendre tensor rule (panels per axis).
inline PoincareResult poincare_ratio(const MatrixWeight& w, const Cube& q, const TestFunction& tf, int panels = 4,
                                     const QuadratureRule& rule = {}) {
  int n = w.n(), d = w.d();
  if (tf.d != d) throw ConfigError("poincare_ratio: test function has the wrong number of components");
  SymMat vq = integral(w, q, rule);
  SymMat vq_inv;
  try {
    vq_inv = inv(vq);
  } catch (const Degenerate&) {
    throw Degenerate("poincare_ratio: V(Q) is singular for '" + w.name() + "'");
  }
  std::vector<std::vector<std::pair<double, double>>> axes;
  for (int i = 0; i < n; ++i) axes.push_back(gauss_legendre(q.center(i) - q.r, q.center(i) + q.r, panels));
  std::size_t per = axes[0].size();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= per;
  struct Node {
    double wt;
    Vec u;
    SymMat s;
  };
  std::vector<Node> nodes(total);
  Vec m1 = Vec::Zero(d);
  Mat m2 = Mat::Zero(d, d);
  double grad_sq = 0;
  Point x(n);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    double wt = 1;
    for (int i = 0; i < n; ++i) {
      auto [xi, wi] = axes[i][rem % per];
      rem /= per;
      x(i) = xi;
      wt *= wi;
    }
    SymMat root = sqrt_psd(w.eval(x));
    nodes[idx] = {wt, tf.u(x), congruence(root.matrix(), vq_inv)};
    m1 += wt * nodes[idx].u;
    m2 += wt * nodes[idx].u * nodes[idx].u.transpose();
    grad_sq += wt * tf.grad(x).squaredNorm();
  }
  double vol = q.volume();
  PoincareResult out;
  for (const auto& nd : nodes) {
    const Mat& s = nd.s.matrix();
    double term = (s * m2).trace() - 2 * nd.u.dot(s * m1) + vol * nd.u.dot(s * nd.u);
    out.lhs += nd.wt * term;
  }
  out.lhs = std::max(0.0, out.lhs);
  out.rhs = std::pow(vol, 2.0 / n) * grad_sq;
  out.ratio = out.rhs == 0 ? 0.0 : out.lhs / out.rhs;
  return out;
}

// ---- Fefferman-Phong on grids ------------------------------------------------------------

struct TestFunctionField {
  Grid3 grid;
  int d = 1;
  std::vector<double> values;  // node * d + component

  // zero the two outermost node layers
  void clamp_support() {
    for (std::size_t p = 0; p < grid.size(); ++p) {
      auto c = grid.ijk(p);
      for (int a = 0; a < 3; ++a)
        if (c[a] < 2 || c[a] > grid.N - 3)
          for (int k = 0; k < d; ++k) values[p * d + k] = 0;
    }
  }

  static TestFunctionField sample(const Grid3& g, int d, const std::function<Vec(const Point&)>& f) {
    TestFunctionField t{g, d, std::vector<double>(g.size() * d)};
    for (std::size_t p = 0; p < g.size(); ++p) {
      Vec v = f(g.node(p));
      for (int k = 0; k < d; ++k) t.values[p * d + k] = v(k);
    }
    t.clamp_support();
    return t;
  }
};

// smooth radial bump supported in the ball of radius `radius`
inline double bump(double dist, double radius) {
  double t = dist / radius;
  if (t >= 1) return 0;
  return std::exp(1 - 1 / (1 - t * t));
}

// A library of bump and oscillating-bump fields spread over the box.
inline std::vector<TestFunctionField> test_field_library(const Grid3& g, int d, int count = 20) {
  std::vector<TestFunctionField> out;
  double L = g.L;
  for (int i = 0; i < count; ++i) {
    double radius = L * (0.25 + 0.5 * ((i * 7) % 10) / 10.0);
    Point c(3);
    c << 0.3 * L * std::sin(1.7 * i), 0.3 * L * std::cos(2.3 * i), 0.3 * L * std::sin(0.9 * i + 1);
    double freq = (i % 2) ? 0.0 : (1 + i % 5) * std::numbers::pi / L;
    out.push_back(TestFunctionField::sample(g, d, [&](const Point& x) {
      Vec v(d);
      double b = bump((x - c).norm(), radius);
      for (int k = 0; k < d; ++k) v(k) = b * std::cos(freq * x(k % 3) + k) * (k + 1);
      return v;
    }));
  }
  return out;
}

enum class FpForm { lower, norm, upper };

struct FpResult {
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
};

// lower/norm: int m^2 |u|^2  vs  int |Du|^2 + int <V u, u>
// upper:      int <V u, u>   vs  int |Du|^2 + int m^2 |u|^2
inline FpResult fp_ratio(const MatrixWeight& w, const TestFunctionField& u, const AuxField& aux, FpForm form) {
  const Grid3& g = u.grid;
  int d = u.d;
  if (w.d() != d) throw ConfigError("fp_ratio: test field and weight disagree on d");
  if (aux.grid.N != g.N || aux.grid.L != g.L) throw ConfigError("fp_ratio: aux field lives on a different grid");
  double h = g.h(), h3 = h * h * h;
  double energy = 0, potential = 0, weighted = 0;
  auto value = [&](int i, int j, int k, int comp) {
    if (!g.contains(i, j, k)) return 0.0;
    return u.values[g.index(i, j, k) * d + comp];
  };
  for (std::size_t p = 0; p < g.size(); ++p) {
    auto c = g.ijk(p);
    Vec up(d);
    for (int k = 0; k < d; ++k) up(k) = u.values[p * d + k];
    for (int k = 0; k < d; ++k) {
      double gx = (value(c[0] + 1, c[1], c[2], k) - value(c[0] - 1, c[1], c[2], k)) / (2 * h);
      double gy = (value(c[0], c[1] + 1, c[2], k) - value(c[0], c[1] - 1, c[2], k)) / (2 * h);
      double gz = (value(c[0], c[1], c[2] + 1, k) - value(c[0], c[1], c[2] - 1, k)) / (2 * h);
      energy += h3 * (gx * gx + gy * gy + gz * gz);
    }
    double u2 = up.squaredNorm();
    if (u2 == 0) continue;
    potential += h3 * w.eval(g.node(p)).quad(up);
    weighted += h3 * aux[p] * aux[p] * u2;
  }
  FpResult out;
  if (form == FpForm::upper) {
    out.lhs = potential;
    out.rhs = energy + weighted;
  } else {
    out.lhs = weighted;
    out.rhs = energy + potential;
  }
  out.ratio = out.rhs == 0 ? 0.0 : out.lhs / out.rhs;
  return out;
}

// ---- Appendix-A Fefferman-Phong failure ---------------------------------------------------

// smooth step: 0 for t <= 0, 1 for t >= 1
inline double smooth_step(double t, double* deriv = nullptr) {
  auto psi = [](double s) { return s > 0 ? std::exp(-1 / s) : 0.0; };
  auto dpsi = [](double s) { return s > 0 ? std::exp(-1 / s) / (s * s) : 0.0; };
  double a = psi(t), b = psi(1 - t);
  if (deriv) {
    double da = dpsi(t), db = -dpsi(1 - t);
    double den = a + b;
    *deriv = den == 0 ? 0.0 : (da * den - a * (da + db)) / (den * den);
  }
  return a / (a + b);
}

// cutoff equal to 1 on [R, 2R], supported in [R/2, 3R]
inline double radial_cutoff(double r, double big_r, double* deriv) {
  double d1 = 0, d2 = 0;
  double up = smooth_step((r - 0.5 * big_r) / (0.5 * big_r), &d1);
  double down = smooth_step((3 * big_r - r) / big_r, &d2);
  *deriv = d1 / (0.5 * big_r) * down - up * d2 / big_r;
  return up * down;
}

struct FpFailureRow {
  double radius = 0;
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
};

struct FpFailureTable {
  std::vector<FpFailureRow> rows;
  double slope = 0;
  bool control = false;
};

inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::size_t k = xs.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(xs[i]) / k;
    my += std::log(ys[i]) / k;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double dx = std::log(xs[i]) - mx;
    sxy += dx * (std::log(ys[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// u_R = xi_R(|x|) (-|x|^2, 1) against the Appendix-A weight (V u_R = 0), or against
// V = I when `control` is set. Radial parts are integrated exactly in 1-D; the
// angular average of m_lower^2 uses a Gauss rule on one octant (the weight and
// cubes are symmetric under coordinate reflections).
inline FpFailureTable appendix_a_fp_failure(const std::vector<double>& radii, bool control = false,
                                            const AuxOptions& aux = {}, const Parallelism& par = Parallelism::serial()) {
  const int n = 3;
  MatrixWeight w = control ? MatrixWeight::identity(n, 2) : MatrixWeight::appendix_a(n);
  auto theta = gauss_legendre(0.0, 1.0, 1);                      // cos(theta)
  auto phi = gauss_legendre(0.0, std::numbers::pi / 2, 1);        // azimuth
  FpFailureTable out;
  out.control = control;
  for (double big_r : radii) {
    std::vector<std::pair<double, double>> radial;
    for (auto [a, b] : {std::pair{0.5 * big_r, big_r}, std::pair{big_r, 2 * big_r}, std::pair{2 * big_r, 3 * big_r}}) {
      auto part = gauss_legendre(a, b, 4);
      radial.insert(radial.end(), part.begin(), part.end());
    }
    std::vector<double> mean_m2(radial.size());
    par.for_each(radial.size(), [&](std::size_t ri) {
      double r = radial[ri].first;
      double acc = 0;
      for (auto [ct, wt] : theta)
        for (auto [ph, wp] : phi) {
          double st = std::sqrt(1 - ct * ct);
          Point x(3);
          x << r * st * std::cos(ph), r * st * std::sin(ph), r * ct;
          PsiEvaluator p(w, x, aux.rule);
          double m = aux_value(p, AuxKind::lower, Vec(), aux);
          acc += wt * wp * m * m;
        }
      mean_m2[ri] = 8 * acc;  // integral over the sphere
    });
    FpFailureRow row;
    row.radius = big_r;
    for (std::size_t ri = 0; ri < radial.size(); ++ri) {
      auto [r, wr] = radial[ri];
      double dxi = 0;
      double xi = radial_cutoff(r, big_r, &dxi);
      double u2 = xi * xi * (1 + r * r * r * r);
      // components -xi r^2 and xi
      double g1 = dxi * r * r + 2 * r * xi;
      double grad2 = g1 * g1 + dxi * dxi;
      double shell = 4 * std::numbers::pi * r * r;
      row.lhs += wr * r * r * mean_m2[ri] * u2;
      row.rhs += wr * shell * grad2;
      if (control) row.rhs += wr * shell * u2;
    }
    row.ratio = row.lhs / row.rhs;
    out.rows.push_back(row);
  }
  std::vector<double> xs, ys;
  for (const auto& r : out.rows) {
    xs.push_back(r.radius);
    ys.push_back(r.ratio);
  }
  out.slope = xs.size() >= 2 ? loglog_slope(xs, ys) : 0.0;
  return out;
}

// ---- decay envelopes -------------------------------------------------------------------------

enum class Projector { norm, quadratic_form };

struct EnvelopeSample {
  double separation = 0;  // |x - y|_inf
  double distance = 0;    // Agmon distance
  double value = 0;
};

struct EnvelopeFit {
  std::vector<EnvelopeSample> samples;
  double eps_hat = 0;  // minus the fitted slope
  double c_hat = 0;    // exp(intercept)
  double r2 = 0;
  double sigma = 0;
  double below_fraction = 0;  // fraction with value >= exp(c + s d - 2 sigma)/|x-y|^{n-2}
  double min_separation = 0;
  double max_separation = 0;
};

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0, sigma = 0;
};

inline LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::size_t k = xs.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LinearFit f;
  f.slope = sxx == 0 ? 0.0 : sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double e = ys[i] - f.intercept - f.slope * xs[i];
    sse += e * e;
  }
  f.r2 = syy == 0 ? 1.0 : 1 - sse / syy;
  f.sigma = std::sqrt(sse / k);
  return f;
}

inline bool admissible(const Grid3& g, const Point& x, const Point& y) {
  double sep = linf(x, y);
  if (sep < 4 * g.h()) return false;
  return x.cwiseAbs().maxCoeff() <= g.L - g.L / 6;
}

// ln(value * |x - y|^{n-2}) against the Agmon distance over admissible nodes
inline EnvelopeFit envelope_fit(const GreenField& green, const DistanceField& dist, Projector proj, const Vec& e = Vec()) {
  const Grid3& g = green.grid;
  if (dist.grid.N != g.N || dist.source != green.pole) throw ConfigError("envelope_fit: green and distance fields disagree");
  Point y = g.node(green.pole);
  EnvelopeFit fit;
  std::vector<double> xs, ys;
  for (std::size_t p = 0; p < g.size(); ++p) {
    Point x = g.node(p);
    if (!admissible(g, x, y)) continue;
    Mat b = green.block(p);
    double v;
    if (proj == Projector::norm) {
      v = Eigen::JacobiSVD<Mat>(b).singularValues()(0);
    } else {
      v = e.dot(b * e);
    }
    if (!(v > 0)) continue;
    double sep = linf(x, y);
    fit.samples.push_back({sep, dist[p], v});
    xs.push_back(dist[p]);
    ys.push_back(std::log(v * sep));
  }
  if (fit.samples.size() < 50)
    throw InsufficientSamples("envelope_fit: only " + std::to_string(fit.samples.size()) + " admissible samples");
  LinearFit lf = fit_line(xs, ys);
  fit.eps_hat = -lf.slope;
  fit.c_hat = std::exp(lf.intercept);
  fit.r2 = lf.r2;
  fit.sigma = lf.sigma;
  std::size_t above = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (ys[i] >= lf.intercept + lf.slope * xs[i] - 2 * lf.sigma) ++above;
  fit.below_fraction = static_cast<double>(above) / xs.size();
  fit.min_separation = INFINITY;
  for (const auto& s : fit.samples) {
    fit.min_separation = std::min(fit.min_separation, s.separation);
    fit.max_separation = std::max(fit.max_separation, s.separation);
  }
  return fit;
}

struct SmallScaleFit {
  double alpha = 0;
  double q = 0;
  double slope = 0;
  double c_hat = 0;
  double bound_fraction = 0;
  std::size_t samples = 0;
};

// exponent q in alpha = 2 - n/q for n = 3
inline double small_scale_q(double p) { return std::min(p, 2.9); }

// |Gamma^V - Gamma^0| |x-y|^{n-2} <= C (|x-y| m_upper(x))^alpha for 4h <= |x-y| <= 1/m_upper(x)
inline SmallScaleFit small_scale_fit(const GreenField& gv, const GreenField& g0, const AuxField& upper, double p) {
  const Grid3& g = gv.grid;
  if (g0.pole != gv.pole || g0.grid.N != g.N) throw ConfigError("small_scale_fit: green fields disagree");
  SmallScaleFit out;
  out.q = small_scale_q(p);
  out.alpha = 2 - 3 / out.q;
  Point y = g.node(gv.pole);
  std::vector<double> lt, lv;
  for (std::size_t node = 0; node < g.size(); ++node) {
    Point x = g.node(node);
    double sep = linf(x, y);
    if (sep < 4 * g.h() || sep * upper[node] > 1) continue;
    if (x.cwiseAbs().maxCoeff() > g.L - g.L / 6) continue;
    Mat diff = gv.block(node) - g0.block(node);
    double v = Eigen::JacobiSVD<Mat>(diff).singularValues()(0) * sep;
    if (!(v > 0)) continue;
    lt.push_back(std::log(sep * upper[node]));
    lv.push_back(std::log(v));
  }
  out.samples = lt.size();
  if (out.samples < 50)
    throw InsufficientSamples("small_scale_fit: only " + std::to_string(out.samples) + " admissible samples");
  out.slope = fit_line(lt, lv).slope;
  std::vector<double> resid(lt.size());
  double mean = 0;
  for (std::size_t i = 0; i < lt.size(); ++i) {
    resid[i] = lv[i] - out.alpha * lt[i];
    mean += resid[i] / lt.size();
  }
  double var = 0;
  for (double r : resid) var += (r - mean) * (r - mean) / resid.size();
  double log_c = mean + 2 * std::sqrt(var);
  out.c_hat = std::exp(log_c);
  std::size_t ok = 0;
  for (double r : resid) ok += r <= log_c;
  out.bound_fraction = static_cast<double>(ok) / resid.size();
  return out;
}

}  // namespace agmon
