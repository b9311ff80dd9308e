#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agmon/auxmetric.hpp"
#include "agmon/errors.hpp"
#include "agmon/grid.hpp"
#include "agmon/parallel.hpp"
#include "agmon/weights.hpp"

namespace agmon {

// scalar leading coefficient a(x) with lambda <= a <= Lambda
struct LeadingCoefficient {
  std::function<double(const Point&)> a = [](const Point&) { return 1.0; };
  double lambda = 1;
  double Lambda = 1;

  static LeadingCoefficient constant(double c) { return {[c](const Point&) { return c; }, c, c}; }
};

// CSR storage with column indices sorted within each row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::vector<std::size_t> ptr;
  std::vector<std::size_t> col;
  std::vector<double> val;

  double at(std::size_t i, std::size_t j) const {
    for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p)
      if (col[p] == j) return val[p];
    return 0;
  }

  void multiply(const std::vector<double>& x, std::vector<double>& y, const Parallelism& par) const {
    y.resize(rows);
    std::size_t chunks = std::max<std::size_t>(1, par.threads());
    par.for_each(chunks, [&](std::size_t c) {
      std::size_t begin = rows * c / chunks, end = rows * (c + 1) / chunks;
      for (std::size_t i = begin; i < end; ++i) {
        double s = 0;
        for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) s += val[p] * x[col[p]];
        y[i] = s;
      }
    });
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) m(i, col[p]) = val[p];
    return m;
  }
};

struct DiscreteOperator {
  Grid3 grid;
  int d = 1;
  std::string weight;
  bool has_potential = false;
  SparseMatrix matrix;  // unknown (node, component) at node * d + component
  std::vector<SymMat> potential;

  std::size_t size() const { return matrix.rows; }
};

// Flux-form 7-point operator -div(a grad u) + V u with zero Dirichlet data.
inline DiscreteOperator assemble(const MatrixWeight& w, const Grid3& grid, const LeadingCoefficient& lead = {},
                                 const Parallelism& par = Parallelism::serial()) {
  if (w.n() != 3) throw ConfigError("assemble: operators live on 3-D grids, weight '" + w.name() + "' has n != 3");
  grid.validate();
  int d = w.d();
  std::size_t nodes = grid.size();
  DiscreteOperator op{grid, d, w.name(), false, {}, std::vector<SymMat>(nodes)};
  par.for_each(nodes, [&](std::size_t p) { op.potential[p] = w.eval(grid.node(p)); });
  for (const auto& v : op.potential)
    if (v.frobenius() != 0) op.has_potential = true;

  double h = grid.h();
  double inv_h2 = 1.0 / (h * h);
  const int offsets[6][3] = {{0, 0, -1}, {0, -1, 0}, {-1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  // face coefficients per node and direction
  std::vector<std::array<double, 6>> faces(nodes);
  std::vector<std::string> violations(nodes);
  par.for_each(nodes, [&](std::size_t p) {
    auto c = grid.ijk(p);
    Point x = grid.node(p);
    for (int f = 0; f < 6; ++f) {
      Point mid = x;
      for (int a = 0; a < 3; ++a) {
        double other = -grid.L + (c[a] + offsets[f][a] + 1) * h;
        mid(a) = 0.5 * (x(a) + other);
      }
      double a = lead.a(mid);
      if (!(a >= lead.lambda && a <= lead.Lambda))
        violations[p] = "assemble: leading coefficient " + std::to_string(a) + " leaves [" + std::to_string(lead.lambda) +
                        ", " + std::to_string(lead.Lambda) + "]";
      faces[p][f] = a * inv_h2;
    }
  });
  for (const auto& v : violations)
    if (!v.empty()) throw EllipticityViolation(v);

  SparseMatrix& m = op.matrix;
  m.rows = nodes * d;
  m.ptr.assign(m.rows + 1, 0);
  m.col.reserve(m.rows * (6 + d));
  m.val.reserve(m.rows * (6 + d));
  for (std::size_t p = 0; p < nodes; ++p) {
    auto c = grid.ijk(p);
    double diag = 0;
    for (int f = 0; f < 6; ++f) diag += faces[p][f];
    for (int comp = 0; comp < d; ++comp) {
      auto push = [&](std::size_t q, double v) {
        m.col.push_back(q);
        m.val.push_back(v);
      };
      for (int f = 0; f < 3; ++f) {
        int i = c[0] + offsets[f][0], j = c[1] + offsets[f][1], k = c[2] + offsets[f][2];
        if (grid.contains(i, j, k)) push(grid.index(i, j, k) * d + comp, -faces[p][f]);
      }
      for (int c2 = 0; c2 < d; ++c2) {
        double v = op.potential[p](comp, c2);
        if (c2 == comp)
          push(p * d + c2, diag + v);
        else if (v != 0)
          push(p * d + c2, v);
      }
      for (int f = 3; f < 6; ++f) {
        int i = c[0] + offsets[f][0], j = c[1] + offsets[f][1], k = c[2] + offsets[f][2];
        if (grid.contains(i, j, k)) push(grid.index(i, j, k) * d + comp, -faces[p][f]);
      }
      m.ptr[p * d + comp + 1] = m.col.size();
    }
  }
  return op;
}

struct SolveResult {
  std::vector<double> x;
  double residual = 0;
  int iterations = 0;
};

// Jacobi-preconditioned conjugate gradients; reductions run in index order.
inline SolveResult solve(const DiscreteOperator& op, const std::vector<double>& rhs, double tol = 1e-10, int max_iter = -1,
                         const Parallelism& par = Parallelism::serial()) {
  const SparseMatrix& a = op.matrix;
  std::size_t n = a.rows;
  if (rhs.size() != n) throw ConfigError("solve: right-hand side has the wrong length");
  if (max_iter < 0) max_iter = 20 * op.grid.N * op.d;
  SolveResult out;
  out.x.assign(n, 0.0);
  auto dot = [](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
  };
  double bnorm = std::sqrt(dot(rhs, rhs));
  if (bnorm == 0) return out;
  std::vector<double> inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) inv_diag[i] = 1.0 / a.at(i, i);
  std::vector<double> r = rhs, z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    a.multiply(p, q, par);
    double alpha = rz / dot(p, q);
    for (std::size_t i = 0; i < n; ++i) {
      out.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    double rnorm = std::sqrt(dot(r, r));
    out.iterations = it;
    out.residual = rnorm / bnorm;
    if (out.residual <= tol) {
      // report the true residual
      a.multiply(out.x, q, par);
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += (q[i] - rhs[i]) * (q[i] - rhs[i]);
      out.residual = std::sqrt(s) / bnorm;
      return out;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    double rz_new = dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NoConvergence("solve: conjugate gradients for '" + op.weight + "' stalled at relative residual " +
                      std::to_string(out.residual) + " after " + std::to_string(max_iter) + " iterations");
}

struct GreenField {
  Grid3 grid;
  int d = 1;
  std::size_t pole = 0;
  std::string weight;
  std::vector<double> blocks;  // node-major, row-major d x d: Gamma(x, pole)
  double residual = 0;

  double at(std::size_t node, int i, int j) const { return blocks[(node * d + i) * d + j]; }
  Mat block(std::size_t node) const {
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = at(node, i, j);
    return m;
  }
};

// Columns solve op g = e_k delta_pole / h^3.
inline GreenField green_field(const DiscreteOperator& op, std::size_t pole, double tol = 1e-10,
                              const Parallelism& par = Parallelism::serial()) {
  if (pole >= op.grid.size()) throw ConfigError("green_field: pole outside the grid");
  int d = op.d;
  GreenField g{op.grid, d, pole, op.weight, std::vector<double>(op.grid.size() * d * d), 0};
  double h3 = std::pow(op.grid.h(), 3);
  for (int k = 0; k < d; ++k) {
    std::vector<double> rhs(op.size(), 0.0);
    rhs[pole * d + k] = 1.0 / h3;
    SolveResult s = solve(op, rhs, tol, -1, par);
    g.residual = std::max(g.residual, s.residual);
    for (std::size_t p = 0; p < op.grid.size(); ++p)
      for (int i = 0; i < d; ++i) g.blocks[(p * d + i) * d + k] = s.x[p * d + i];
  }
  return g;
}

// ---- representation identity ------------------------------------------------------

struct ResolventCheck {
  double max_relative_error = 0;
  std::vector<double> errors;  // per x
};

// G0 - GV = G0 M_L G_L + G_L (M_V - M_L) G_V with L = |V| I, sums weighted by h^3.
inline ResolventCheck resolvent_identity_check(const MatrixWeight& w, const Grid3& grid, std::size_t pole,
                                               const std::vector<std::size_t>& xs,
                                               const Parallelism& par = Parallelism::serial()) {
  int d = w.d();
  MatrixWeight zero = MatrixWeight::zero(w.n(), d);
  MatrixWeight lam = MatrixWeight::norm_diag(w);
  double h3 = std::pow(grid.h(), 3);
  std::size_t nodes = grid.size();

  // columns of G = A^{-1} / h^3 at the pole and at every x (symmetric operators)
  std::vector<std::size_t> poles = xs;
  poles.push_back(pole);
  auto columns = [&](const MatrixWeight& v) {
    DiscreteOperator op = assemble(v, grid, {}, par);
    Eigen::LLT<Eigen::MatrixXd> llt(op.matrix.dense());
    if (llt.info() != Eigen::Success) throw NoConvergence("resolvent_identity_check: dense factorization failed");
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(op.size(), poles.size() * d);
    for (std::size_t c = 0; c < poles.size(); ++c)
      for (int k = 0; k < d; ++k) rhs(poles[c] * d + k, c * d + k) = 1.0 / h3;
    return std::make_pair(Eigen::MatrixXd(llt.solve(rhs)), op.potential);
  };
  auto [g0, m0] = columns(zero);
  auto [gl, ml] = columns(lam);
  auto [gv, mv] = columns(w);
  (void)m0;
  std::size_t yc = xs.size();

  ResolventCheck out;
  for (std::size_t c = 0; c < xs.size(); ++c) {
    std::size_t x = xs[c];
    Eigen::MatrixXd lhs(d, d), t1 = Eigen::MatrixXd::Zero(d, d), t2 = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) lhs(i, j) = g0(x * d + i, yc * d + j) - gv(x * d + i, yc * d + j);
    for (std::size_t z = 0; z < nodes; ++z) {
      // G(x, z) = G(z, x)^T read from the column block at x
      Eigen::MatrixXd g0xz(d, d), glxz(d, d), glzy(d, d), gvzy(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          g0xz(i, j) = g0(z * d + j, c * d + i);
          glxz(i, j) = gl(z * d + j, c * d + i);
          glzy(i, j) = gl(z * d + i, yc * d + j);
          gvzy(i, j) = gv(z * d + i, yc * d + j);
        }
      Eigen::MatrixXd mlz = ml[z].matrix().cast<double>();
      Eigen::MatrixXd dz = (mv[z].matrix() - ml[z].matrix()).cast<double>();
      t1 += h3 * g0xz * mlz * glzy;
      t2 += h3 * glxz * dz * gvzy;
    }
    double num = (lhs - t1 - t2).norm();
    double den = std::max(lhs.norm(), t1.norm() + t2.norm());
    double err = den == 0 ? (num == 0 ? 0.0 : INFINITY) : num / den;
    out.errors.push_back(err);
    out.max_relative_error = std::max(out.max_relative_error, err);
  }
  return out;
}

// ---- landscape and probes -----------------------------------------------------------

struct LandscapeValue {
  std::size_t node = 0;
  double u = 0;
  double lower_inv_sq = 0;  // m_lower(x0)^{-2}
  double upper_inv_sq = 0;  // m_upper(x0)^{-2}
};

// u(x0) = h^3 sum_y |Gamma(x0, y)| with |.| the operator norm.
inline double landscape_value(const GreenField& g) {
  double h3 = std::pow(g.grid.h(), 3);
  double s = 0;
  for (std::size_t p = 0; p < g.grid.size(); ++p) {
    Mat b = g.block(p);
    SymMat sym = SymMat::from(b);
    s += (b - sym.matrix()).norm() == 0 ? sym.norm() : Eigen::JacobiSVD<Mat>(b).singularValues()(0);
  }
  return h3 * s;
}

inline LandscapeValue landscape(const DiscreteOperator& op, const MatrixWeight& w, std::size_t x0,
                                const AuxOptions& aux = {}, const Parallelism& par = Parallelism::serial()) {
  GreenField g = green_field(op, x0, 1e-10, par);
  LandscapeValue out;
  out.node = x0;
  out.u = landscape_value(g);
  PsiEvaluator p(w, op.grid.node(x0), aux.rule);
  double lo = aux_value(p, AuxKind::lower, Vec(), aux);
  double hi = aux_value(p, AuxKind::upper, Vec(), aux);
  out.lower_inv_sq = 1.0 / (lo * lo);
  out.upper_inv_sq = 1.0 / (hi * hi);
  return out;
}

struct BoundednessRow {
  double radius = 0;
  double q = 1;
  double lhs = 0;
  double bracket = 0;
  double ratio = 0;
};

// ||u||_inf(B_R) against R^{-n/q} ||u||_q(B_2R) + R^{2-n/l} ||f||_l(B_2R), l = 2.
inline std::vector<BoundednessRow> local_boundedness_table(const Grid3& grid, int d, const std::vector<double>& u,
                                                           const std::vector<double>& f, const Point& center,
                                                           const std::vector<double>& radii) {
  const double n = 3, ell = 2;
  double h3 = std::pow(grid.h(), 3);
  std::vector<BoundednessRow> rows;
  for (double radius : radii)
    for (double q : {1.0, 2.0}) {
      double sup = 0, uq = 0, fl = 0;
      for (std::size_t p = 0; p < grid.size(); ++p) {
        double dist = (grid.node(p) - center).norm();
        double un = 0, fn = 0;
        for (int c = 0; c < d; ++c) {
          un += u[p * d + c] * u[p * d + c];
          fn += f[p * d + c] * f[p * d + c];
        }
        un = std::sqrt(un);
        fn = std::sqrt(fn);
        if (dist <= radius) sup = std::max(sup, un);
        if (dist <= 2 * radius) {
          uq += h3 * std::pow(un, q);
          fl += h3 * std::pow(fn, ell);
        }
      }
      BoundednessRow row{radius, q, sup, 0, 0};
      row.bracket = std::pow(radius, -n / q) * std::pow(uq, 1 / q) + std::pow(radius, 2 - n / ell) * std::pow(fl, 1 / ell);
      row.ratio = row.bracket == 0 ? 0.0 : row.lhs / row.bracket;
      rows.push_back(row);
    }
  return rows;
}

inline std::vector<BoundednessRow> local_boundedness_probe(const DiscreteOperator& op, const std::vector<double>& f,
                                                           const std::vector<double>& radii, const Point& center,
                                                           const Parallelism& par = Parallelism::serial()) {
  SolveResult s = solve(op, f, 1e-10, -1, par);
  return local_boundedness_table(op.grid, op.d, s.x, f, center, radii);
}

// sup / inf of a positive scalar field over a ball
inline double harnack_ratio(const Grid3& grid, const std::vector<double>& values, const Point& center, double radius) {
  double hi = 0, lo = INFINITY;
  for (std::size_t p = 0; p < grid.size(); ++p)
    if ((grid.node(p) - center).norm() <= radius) {
      hi = std::max(hi, values[p]);
      lo = std::min(lo, values[p]);
    }
  if (!(lo > 0)) return INFINITY;
  return hi / lo;
}

}  // namespace agmon
