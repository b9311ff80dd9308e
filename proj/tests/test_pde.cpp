#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "agmon/catalog.hpp"
#include "agmon/pde.hpp"

using namespace agmon;

namespace {

// Dirichlet Laplacian on the grid via its sine eigenbasis: A^{-1}(x, y) / h^3
double sine_green(const Grid3& g, double shift, std::size_t x, std::size_t y) {
  int n = g.N;
  double h = g.h();
  auto cx = g.ijk(x), cy = g.ijk(y);
  std::vector<double> mu(n);
  std::vector<std::vector<double>> vx(3, std::vector<double>(n)), vy(3, std::vector<double>(n));
  for (int k = 1; k <= n; ++k) {
    double s = std::sin(k * std::numbers::pi / (2.0 * (n + 1)));
    mu[k - 1] = 4 / (h * h) * s * s;
    for (int a = 0; a < 3; ++a) {
      vx[a][k - 1] = std::sqrt(2.0 / (n + 1)) * std::sin(k * (cx[a] + 1) * std::numbers::pi / (n + 1));
      vy[a][k - 1] = std::sqrt(2.0 / (n + 1)) * std::sin(k * (cy[a] + 1) * std::numbers::pi / (n + 1));
    }
  }
  double s = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        s += vx[0][i] * vy[0][i] * vx[1][j] * vy[1][j] * vx[2][k] * vy[2][k] / (mu[i] + mu[j] + mu[k] + shift);
  return s / std::pow(h, 3);
}

Eigen::MatrixXd dense(const DiscreteOperator& op) { return op.matrix.dense(); }

}  // namespace

TEST(Assemble, LaplacianRowSumsAndStencil) {
  Grid3 g(1, 9);
  auto op = assemble(MatrixWeight::zero(3, 1), g);
  Eigen::MatrixXd a = dense(op);
  double h2 = g.h() * g.h();
  for (std::size_t p = 0; p < g.size(); ++p) {
    auto c = g.ijk(p);
    bool interior = true;
    for (int v : c) interior = interior && v > 0 && v < g.N - 1;
    double sum = a.row(p).sum();
    if (interior)
      EXPECT_NEAR(sum, 0, 1e-9 / h2);
    else
      EXPECT_GT(sum, 0);
    EXPECT_DOUBLE_EQ(a(p, p), 6 / h2);
  }
  EXPECT_DOUBLE_EQ(a(g.index(4, 4, 4), g.index(5, 4, 4)), -1 / h2);
}

TEST(Assemble, ExactSymmetry) {
  Grid3 g(2, 9);
  LeadingCoefficient lead{[](const Point& x) { return 1.5 + 0.5 * std::sin(x(0) + 2 * x(1)); }, 1, 2};
  auto op = assemble(catalog::appendix_a(), g, lead);
  Eigen::MatrixXd a = dense(op);
  EXPECT_EQ((a - a.transpose()).cwiseAbs().maxCoeff(), 0.0);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Assemble, IdentityShiftAndWeakCoupling) {
  Grid3 g(1, 9);
  Eigen::MatrixXd a0 = dense(assemble(MatrixWeight::zero(3, 2), g));
  Eigen::MatrixXd a1 = dense(assemble(MatrixWeight::identity(3, 2), g));
  Eigen::MatrixXd diff = a1 - a0;
  EXPECT_NEAR((diff - Eigen::MatrixXd::Identity(a0.rows(), a0.cols())).cwiseAbs().maxCoeff(), 0, 1e-12 * a0.maxCoeff());

  Eigen::MatrixXd ad = dense(assemble(catalog::diag_x2_x4(), g));
  for (Eigen::Index i = 0; i < ad.rows(); ++i)
    for (Eigen::Index j = 0; j < ad.cols(); ++j)
      if (i % 2 != j % 2) EXPECT_EQ(ad(i, j), 0.0);
}

TEST(Assemble, EllipticityViolation) {
  Grid3 g(1, 9);
  LeadingCoefficient lead{[](const Point& x) { return x(0) > 0.5 ? 3.0 : 1.0; }, 1, 2};
  EXPECT_THROW(assemble(MatrixWeight::zero(3, 1), g, lead), EllipticityViolation);
}

TEST(Solve, ZeroRhsAndForwardOracle) {
  Grid3 g(1, 11);
  auto op = assemble(MatrixWeight::identity(3, 2), g);
  auto z = solve(op, std::vector<double>(op.size(), 0.0));
  for (double v : z.x) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  std::vector<double> w(op.size()), rhs(op.size());
  for (auto& v : w) v = nd(rng);
  op.matrix.multiply(w, rhs, Parallelism::serial());
  auto s = solve(op, rhs, 1e-12);
  double err = 0, top = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    err = std::max(err, std::abs(s.x[i] - w[i]));
    top = std::max(top, std::abs(w[i]));
  }
  EXPECT_LE(err, 1e-9 * top);
}

TEST(Solve, MatchesDenseFactorization) {
  Grid3 g(2, 9);
  auto op = assemble(catalog::appendix_a(), g);
  std::vector<double> rhs(op.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = std::cos(0.37 * i);
  auto s = solve(op, rhs);
  Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(rhs.data(), rhs.size());
  Eigen::VectorXd ref = dense(op).llt().solve(b);
  for (std::size_t i = 0; i < rhs.size(); ++i) EXPECT_NEAR(s.x[i], ref(i), 1e-8 * ref.cwiseAbs().maxCoeff());
}

TEST(Solve, NoConvergenceRaised) {
  Grid3 g(1, 11);
  auto op = assemble(MatrixWeight::zero(3, 1), g);
  std::vector<double> rhs(op.size(), 1.0);
  EXPECT_THROW(solve(op, rhs, 1e-10, 2), NoConvergence);
}

TEST(Green, LaplacianMatchesSineExpansion) {
  Grid3 g(1, 15);
  std::size_t y = g.index(7, 7, 7);
  auto gf = green_field(assemble(MatrixWeight::zero(3, 1), g), y, 1e-12);
  for (std::size_t x : {y, g.index(8, 7, 7), g.index(10, 4, 9), g.index(0, 0, 0)}) {
    double ref = sine_green(g, 0, x, y);
    EXPECT_NEAR(gf.at(x, 0, 0), ref, 1e-8 * ref);
  }
  auto gs = green_field(assemble(MatrixWeight::identity(3, 1), g), y, 1e-12);
  double ref = sine_green(g, 1, g.index(9, 7, 6), y);
  EXPECT_NEAR(gs.at(g.index(9, 7, 6), 0, 0), ref, 1e-8 * ref);
}

TEST(Green, DiagonalFormAndMaximumPrinciple) {
  Grid3 g(2, 11);
  std::size_t y = g.index(3, 6, 5);
  auto gv = green_field(assemble(catalog::diag_x2_x4(), g), y);
  auto g0 = green_field(assemble(MatrixWeight::zero(3, 2), g), y);
  double top = 0;
  for (std::size_t p = 0; p < g.size(); ++p) top = std::max({top, gv.at(p, 0, 0), gv.at(p, 1, 1)});
  for (std::size_t p = 0; p < g.size(); ++p) {
    EXPECT_LE(std::abs(gv.at(p, 0, 1)), 1e-8 * top);
    EXPECT_LE(std::abs(gv.at(p, 1, 0)), 1e-8 * top);
    for (int i = 0; i < 2; ++i) {
      EXPECT_GE(gv.at(p, i, i), -1e-9 * top);
      EXPECT_LE(gv.at(p, i, i), g0.at(p, i, i) * (1 + 1e-8) + 1e-9 * top);
    }
  }
}

TEST(Green, Symmetry) {
  Grid3 g(2, 11);
  auto op = assemble(catalog::appendix_a(), g);
  std::size_t a = g.index(2, 5, 7), b = g.index(8, 3, 4);
  double tol = 1e-10;
  auto ga = green_field(op, a, tol), gb = green_field(op, b, tol);
  Mat gab = gb.block(a), gba = ga.block(b);
  double scale = std::max(gab.norm(), ga.block(a).norm());
  EXPECT_LE((gab - gba.transpose()).norm(), 10 * tol * scale);
}

TEST(Green, BoundaryTruncationControl) {
  // same h on [-1, 1]^3 and [-1.5, 1.5]^3; V = 25 I decays on scale 1/5
  Grid3 small(1, 15), large(1.5, 23);
  MatrixWeight w = MatrixWeight::constant(3, SymMat::identity(1) * 25.0);
  auto gs = green_field(assemble(w, small), small.index(7, 7, 7));
  auto gl = green_field(assemble(w, large), large.index(11, 11, 11));
  double worst = 0;
  for (std::size_t p = 0; p < small.size(); ++p) {
    Point x = small.node(p);
    if (x.cwiseAbs().maxCoeff() > small.L / 3 + 1e-12) continue;
    double a = gs.at(p, 0, 0), b = gl.at(large.nearest(x), 0, 0);
    worst = std::max(worst, std::abs(a - b) / b);
  }
  EXPECT_LE(worst, 0.03);
}

TEST(Resolvent, ZeroAndConstantWeights) {
  Grid3 g(1, 9);
  std::vector<std::size_t> xs{g.index(1, 2, 3), g.index(4, 4, 4), g.index(7, 1, 5)};
  auto z = resolvent_identity_check(MatrixWeight::zero(3, 2), g, g.index(4, 5, 4), xs);
  EXPECT_EQ(z.max_relative_error, 0);
  MatrixWeight c = MatrixWeight::constant(3, SymMat::identity(2) * 3.0);
  EXPECT_LE(resolvent_identity_check(c, g, g.index(4, 5, 4), xs).max_relative_error, 1e-8);
}

TEST(Resolvent, CatalogWeights) {
  Grid3 g(2, 9);
  std::vector<std::size_t> xs{g.index(0, 2, 3), g.index(4, 4, 4), g.index(8, 8, 1)};
  for (const auto& w : catalog::all())
    EXPECT_LE(resolvent_identity_check(w, g, g.index(3, 5, 4), xs).max_relative_error, 1e-7) << w.name();
}

TEST(Landscape, ConstantWeight) {
  Grid3 g(1, 11);
  MatrixWeight w = MatrixWeight::constant(3, SymMat::identity(2) * 4.0);
  auto op = assemble(w, g);
  std::size_t x0 = g.index(5, 4, 6);
  auto lv = landscape(op, w, x0);
  // scalar oracle: h^3 sum_y G(x0, y) = (A^{-1} 1)(x0) for the one-component operator
  auto scalar = assemble(MatrixWeight::constant(3, SymMat::identity(1) * 4.0), g);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(scalar.size());
  Eigen::VectorXd u = dense(scalar).llt().solve(ones);
  EXPECT_NEAR(lv.u, u(x0), 1e-8 * u(x0));
  EXPECT_NEAR(lv.lower_inv_sq, lv.upper_inv_sq, 1e-12 * lv.upper_inv_sq);
}

TEST(Landscape, FreeOperatorGrowsWithBox) {
  // without a potential u scales like L^2 on similar grids
  MatrixWeight z = MatrixWeight::zero(3, 1);
  Grid3 a(1, 11), b(2, 11);
  double ua = landscape_value(green_field(assemble(z, a), a.index(5, 5, 5), 1e-12));
  double ub = landscape_value(green_field(assemble(z, b), b.index(5, 5, 5), 1e-12));
  EXPECT_NEAR(ub / ua, 4, 1e-8);
}

TEST(Boundedness, ZeroAndStableRatios) {
  Point c = Point::Zero(3);
  {
    Grid3 g(1, 11);
    auto op = assemble(MatrixWeight::identity(3, 1), g);
    for (const auto& row : local_boundedness_probe(op, std::vector<double>(op.size(), 0.0), {0.2, 0.3}, c))
      EXPECT_EQ(row.ratio, 0);
  }
  auto max_ratio = [&](const MatrixWeight& w, int n) {
    Grid3 g(1, n);
    auto op = assemble(w, g);
    std::vector<double> f(op.size(), 0.0);
    for (std::size_t p = 0; p < g.size(); ++p)
      if (g.node(p).norm() <= 0.15)
        for (int k = 0; k < w.d(); ++k) f[p * w.d() + k] = 1;
    double top = 0;
    for (const auto& row : local_boundedness_probe(op, f, {0.2, 0.3, 0.4}, c)) {
      EXPECT_TRUE(std::isfinite(row.ratio));
      top = std::max(top, row.ratio);
    }
    return top;
  };
  for (const auto& w : {MatrixWeight::identity(3, 1), catalog::diag_x2_x4()}) {
    double coarse = max_ratio(w, 15), fine = max_ratio(w, 23);
    EXPECT_NEAR(fine / coarse, 1, 0.2) << w.name();
  }
}

TEST(Harnack, ConstantField) {
  Grid3 g(1, 9);
  EXPECT_EQ(harnack_ratio(g, std::vector<double>(g.size(), 2.0), Point::Zero(3), 0.5), 1);
}
