#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "agmon/catalog.hpp"
#include "agmon/ineqlab.hpp"
#include "oracles.hpp"

using namespace agmon;

namespace {

TestFunction coordinates(int d) {
  return {d,
          [d](const Point& x) {
            Vec v(d);
            for (int k = 0; k < d; ++k) v(k) = x(k);
            return v;
          },
          [d](const Point& x) {
            Mat g = Mat::Zero(d, x.size());
            for (int k = 0; k < d; ++k) g(k, k) = 1;
            return g;
          }};
}

double sum_sq(const TestFunctionField& u) {
  double h = u.grid.h(), s = 0;
  for (double v : u.values) s += v * v;
  return s * h * h * h;
}

// (1 - (r / R)^2)^3 on the ball of radius R, and its derivative in r
double cap_profile(double r, double big_r, double* deriv = nullptr) {
  double t = r / big_r;
  if (t >= 1) {
    if (deriv) *deriv = 0;
    return 0;
  }
  double s = 1 - t * t;
  if (deriv) *deriv = -6 * t * s * s / big_r;
  return s * s * s;
}

MatrixWeight constant_scalar(double c) { return MatrixWeight::constant(3, SymMat::identity(1) * c); }

std::size_t centre(const Grid3& g) { return g.nearest(Point::Zero(3)); }

}  // namespace

TEST(Poincare, IdentityCoordinateMatchesClosedForm) {
  // int int (x1 - y1)^2 = 2 |Q|^2 r^2 / 3 and V(Q) = |Q| I, so
  // LHS = 2 |Q| r^2 / 3, RHS = |Q|^{2/3} |Q|, ratio = 1/6 on every cube
  TestFunction u{2, [](const Point& x) { return Vec((Vec(2) << x(0), 0).finished()); },
                 [](const Point& x) {
                   Mat g = Mat::Zero(2, x.size());
                   g(0, 0) = 1;
                   return g;
                 }};
  auto w = catalog::identity();
  auto res = poincare_ratio(w, {Point::Zero(3), 1}, u);
  EXPECT_NEAR(res.lhs, 16.0 / 3, 1e-10);
  EXPECT_NEAR(res.rhs, 32, 1e-10);
  EXPECT_NEAR(res.ratio, 1.0 / 6, 1e-12);
  auto moved = poincare_ratio(w, {make_point({1, 2, -1}), 0.3}, u);
  EXPECT_NEAR(moved.ratio, 1.0 / 6, 1e-12);
}

TEST(Poincare, ConstantFunctionGivesZero) {
  TestFunction u{2, [](const Point&) { return Vec(Vec::Ones(2)); }, [](const Point& x) { return Mat(Mat::Zero(2, x.size())); }};
  auto res = poincare_ratio(catalog::power(), {make_point({0.5, 0, 0}), 1}, u);
  EXPECT_EQ(res.rhs, 0);
  EXPECT_EQ(res.ratio, 0);
  EXPECT_NEAR(res.lhs, 0, 1e-10);
}

TEST(Poincare, DiagonalWeightMatchesMomentOracle) {
  // V diagonal: LHS = sum_k (int v_k int u_k^2 - 2 int u_k int v_k u_k + |Q| int v_k u_k^2) / int v_k
  auto w = catalog::diag_x2_x4();
  Cube q{make_point({0.2, -0.1, 0.3}), 0.7};
  std::array<double, 3> lo{}, hi{};
  for (int i = 0; i < 3; ++i) {
    lo[i] = q.center(i) - q.r;
    hi[i] = q.center(i) + q.r;
  }
  double vol = q.volume(), lhs = 0;
  for (int k = 0; k < 2; ++k) {
    int pw = k + 1;
    auto v = [pw](double x, double y, double z) { return std::pow(x * x + y * y + z * z, pw); };
    auto uk = [k](double x, double y) { return k == 0 ? x : y; };
    double iv = oracle::integrate3(v, lo, hi, 8);
    double iu = oracle::integrate3([&](double x, double y, double) { return uk(x, y); }, lo, hi, 8);
    double iu2 = oracle::integrate3([&](double x, double y, double) { return uk(x, y) * uk(x, y); }, lo, hi, 8);
    double ivu = oracle::integrate3([&](double x, double y, double z) { return v(x, y, z) * uk(x, y); }, lo, hi, 8);
    double ivu2 =
        oracle::integrate3([&](double x, double y, double z) { return v(x, y, z) * uk(x, y) * uk(x, y); }, lo, hi, 8);
    lhs += (iv * iu2 - 2 * iu * ivu + vol * ivu2) / iv;
  }
  double rhs = std::pow(vol, 2.0 / 3) * 2 * vol;
  auto res = poincare_ratio(w, q, coordinates(2), 2);
  EXPECT_NEAR(res.lhs, lhs, 1e-9 * lhs);
  EXPECT_NEAR(res.rhs, rhs, 1e-12 * rhs);
  auto fine = poincare_ratio(w, q, coordinates(2), 6);
  EXPECT_NEAR(fine.ratio, res.ratio, 1e-10 * res.ratio);
}

TEST(Poincare, PowerWeightStableUnderRefinement) {
  auto w = catalog::power();
  Cube q{Point::Zero(3), 1};
  auto a = poincare_ratio(w, q, coordinates(2), 2);
  auto b = poincare_ratio(w, q, coordinates(2), 6);
  EXPECT_TRUE(std::isfinite(a.ratio));
  EXPECT_GT(a.ratio, 0);
  EXPECT_NEAR(a.ratio, b.ratio, 1e-3 * b.ratio);
}

TEST(Poincare, SingularAverageRaises) {
  EXPECT_THROW(poincare_ratio(MatrixWeight::zero(3, 2), {Point::Zero(3), 1}, coordinates(2)), Degenerate);
  EXPECT_THROW(poincare_ratio(catalog::identity(), {Point::Zero(3), 1}, coordinates(1)), ConfigError);
}

TEST(Fp, FieldSupportAndLibrary) {
  Grid3 g(1, 13);
  auto lib = test_field_library(g, 2);
  ASSERT_EQ(lib.size(), 20u);
  for (const auto& u : lib) {
    EXPECT_GT(sum_sq(u), 0);
    for (std::size_t p = 0; p < g.size(); ++p) {
      auto c = g.ijk(p);
      bool shell = false;
      for (int a : c) shell = shell || a < 2 || a > g.N - 3;
      if (shell) EXPECT_EQ(u.values[p * 2] * u.values[p * 2] + u.values[p * 2 + 1] * u.values[p * 2 + 1], 0);
    }
  }
}

TEST(Fp, IdentityFormsAgainstConstantAux) {
  Grid3 g(1, 13);
  auto w = catalog::identity();
  auto aux = aux_field(w, g, AuxKind::lower);
  for (double m : aux.values) ASSERT_NEAR(m, std::sqrt(8.0), 1e-9);
  for (const auto& u : test_field_library(g, 2)) {
    double mass = sum_sq(u);
    auto lower = fp_ratio(w, u, aux, FpForm::lower);
    EXPECT_NEAR(lower.lhs, 8 * mass, 1e-8 * mass);
    EXPECT_GE(lower.rhs, mass * (1 - 1e-12));
    EXPECT_LE(lower.ratio, 8);
    EXPECT_GE(lower.ratio, 0);
    auto upper = fp_ratio(w, u, aux, FpForm::upper);
    EXPECT_NEAR(upper.lhs, mass, 1e-12 * mass);
    EXPECT_LE(upper.ratio, 1.0 / 8);
    auto norm = fp_ratio(w, u, aux, FpForm::norm);
    EXPECT_NEAR(norm.ratio, lower.ratio, 1e-12);
  }
}

TEST(Fp, IdentityRatioConvergesToRadialOracle) {
  // u = b(|x|) e_1: ratio 8 int b^2 / (int |b'|^2 + int b^2) from 1-D radial integrals
  double big_r = 0.8;
  double mass = 0, energy = 0;
  for (auto [r, wr] : oracle::gl(60, 0, big_r)) {
    double db = 0;
    double b = cap_profile(r, big_r, &db);
    mass += wr * 4 * std::numbers::pi * r * r * b * b;
    energy += wr * 4 * std::numbers::pi * r * r * db * db;
  }
  double exact = 8 * mass / (energy + mass);
  auto w = catalog::identity();
  std::vector<double> errors;
  for (int n : {41, 61}) {
    Grid3 g(1, n);
    auto aux = aux_field(w, g, AuxKind::lower);
    auto u = TestFunctionField::sample(g, 2, [&](const Point& x) {
      Vec v = Vec::Zero(2);
      v(0) = cap_profile(x.norm(), big_r);
      return v;
    });
    errors.push_back(std::abs(fp_ratio(w, u, aux, FpForm::lower).ratio / exact - 1));
  }
  EXPECT_LT(errors[1], errors[0]);
  EXPECT_LE(errors[1], 0.01);
}

TEST(Fp, DiagonalWeightRatiosBounded) {
  auto w = catalog::diag_ordered();
  std::vector<double> worst;
  for (int n : {13, 21}) {
    Grid3 g(1.5, n);
    auto aux = aux_field(w, g, AuxKind::lower);
    double top = 0;
    for (const auto& u : test_field_library(g, 2)) {
      auto res = fp_ratio(w, u, aux, FpForm::lower);
      EXPECT_GT(res.rhs, 0);
      EXPECT_GE(res.ratio, 0);
      top = std::max(top, res.ratio);
    }
    worst.push_back(top);
  }
  EXPECT_LT(worst[0], 8);
  EXPECT_LT(worst[1], 8);
  EXPECT_NEAR(worst[1], worst[0], 0.25 * worst[0]);
}

TEST(Fp, RejectsMismatchedInputs) {
  Grid3 g(1, 13), other(1, 15);
  auto aux = aux_field(catalog::identity(), other, AuxKind::lower);
  auto u = test_field_library(g, 2, 1)[0];
  EXPECT_THROW(fp_ratio(catalog::identity(), u, aux, FpForm::lower), ConfigError);
  auto u1 = test_field_library(other, 1, 1)[0];
  EXPECT_THROW(fp_ratio(catalog::identity(), u1, aux, FpForm::lower), ConfigError);
}

TEST(AppendixA, CutoffShape) {
  double big_r = 10;
  for (double r = 0; r < 40; r += 0.05) {
    double d = 0;
    double xi = radial_cutoff(r, big_r, &d);
    if (r <= 0.5 * big_r || r >= 3 * big_r) EXPECT_EQ(xi, 0) << r;
    if (r >= big_r && r <= 2 * big_r) EXPECT_NEAR(xi, 1, 1e-15) << r;
    EXPECT_GE(xi, 0);
    EXPECT_LE(xi, 1);
    EXPECT_LE(std::abs(d), 10 / big_r);
    double dp = 0, dm = 0, step = 1e-5;
    double fd = (radial_cutoff(r + step, big_r, &dp) - radial_cutoff(r - step, big_r, &dm)) / (2 * step);
    EXPECT_NEAR(d, fd, 1e-6) << r;
  }
}

TEST(AppendixA, TestFieldIsInKernel) {
  auto w = catalog::appendix_a();
  for (double r : {0.3, 5.0, 17.0}) {
    Point x = make_point({r, 0.5 * r, -0.2 * r});
    double s = x.squaredNorm();
    Vec u(2);
    u << -s, 1;
    EXPECT_NEAR(w.eval(x).quad(u), 0, 1e-12 * (1 + s * s));
  }
}

TEST(AppendixA, FailureSlopeAndControl) {
  auto tab = appendix_a_fp_failure({10, 20, 40, 80});
  ASSERT_EQ(tab.rows.size(), 4u);
  EXPECT_TRUE(std::isfinite(tab.rows[0].ratio));
  EXPECT_GT(tab.rows[0].ratio, 0);
  for (std::size_t i = 1; i < tab.rows.size(); ++i) {
    double growth = tab.rows[i].ratio / tab.rows[i - 1].ratio;
    EXPECT_GT(growth, 1.6);
    EXPECT_LT(growth, 2.4);
  }
  EXPECT_GE(tab.slope, 0.7);
  EXPECT_LE(tab.slope, 1.3);
  std::vector<double> rs, lhs, rhs;
  for (const auto& r : tab.rows) {
    rs.push_back(r.radius);
    lhs.push_back(r.lhs);
    rhs.push_back(r.rhs);
  }
  // LHS grows like R^{n+3}, RHS like R^{n+2}
  EXPECT_NEAR(loglog_slope(rs, lhs), 6, 0.2);
  EXPECT_NEAR(loglog_slope(rs, rhs), 5, 0.2);

  auto control = appendix_a_fp_failure({10, 20, 40, 80}, true);
  EXPECT_TRUE(control.control);
  EXPECT_GE(control.slope, -0.1);
  EXPECT_LE(control.slope, 0.1);
  for (const auto& r : control.rows) EXPECT_LE(r.ratio, 8);
}

TEST(AppendixA, GradientTermMatchesDirectQuadrature) {
  // RHS = int |D u_R|^2 over the shell, u_R = xi(|x|) (-|x|^2, 1), by a finer 1-D rule
  double big_r = 10;
  double rhs = 0;
  for (auto [a, b] : {std::pair{5.0, 10.0}, std::pair{20.0, 30.0}})
    for (auto [r, wr] : oracle::gl(200, a, b)) {
      double d = 0;
      double xi = radial_cutoff(r, big_r, &d);
      double g1 = d * r * r + 2 * r * xi;
      rhs += wr * 4 * std::numbers::pi * r * r * (g1 * g1 + d * d);
    }
  // plateau [R, 2R]: xi = 1, |D u|^2 = 4 r^2
  rhs += 4 * std::numbers::pi * 4 * (std::pow(20.0, 5) - std::pow(10.0, 5)) / 5;
  auto tab = appendix_a_fp_failure({big_r});
  EXPECT_NEAR(tab.rows[0].rhs, rhs, 1e-6 * rhs);
}

TEST(Envelope, LineFitRecoversExactLine) {
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(0.1 * i);
    ys.push_back(2 - 0.75 * xs.back());
  }
  auto f = fit_line(xs, ys);
  EXPECT_NEAR(f.slope, -0.75, 1e-13);
  EXPECT_NEAR(f.intercept, 2, 1e-13);
  EXPECT_NEAR(f.r2, 1, 1e-13);
  EXPECT_NEAR(f.sigma, 0, 1e-12);
  EXPECT_NEAR(loglog_slope({1, 2, 4}, {3, 12, 48}), 2, 1e-13);
}

TEST(Envelope, ZeroPotentialIsFlat) {
  Grid3 g(1, 25);
  std::size_t pole = centre(g);
  auto green = green_field(assemble(MatrixWeight::zero(3, 1), g), pole);
  // no potential: the Agmon metric vanishes identically
  AuxField zero{g, AuxKind::lower, "zero", std::vector<double>(g.size(), 0.0)};
  auto fit = envelope_fit(green, agmon_field(zero, pole), Projector::norm);
  EXPECT_GE(fit.samples.size(), 50u);
  EXPECT_NEAR(fit.eps_hat, 0, 0.02);
  // the box Green function stays below the free one, 1 / (4 pi |x - y|_2) <= 1 / (4 pi |x - y|_inf)
  for (const auto& s : fit.samples) EXPECT_LT(s.value * s.separation, 1.02 / (4 * std::numbers::pi));
  EXPECT_LT(fit.c_hat, 1 / (4 * std::numbers::pi));
}

TEST(Envelope, ConstantPotentialRate) {
  // Gamma ~ exp(-sqrt(c) |x - y|) / (4 pi |x - y|) and the aux distance is sqrt(8 c) |x - y|,
  // so the fitted rate tends to 2^{-3/2}
  Grid3 g(1, 33);
  std::size_t pole = centre(g);
  auto w = constant_scalar(25);
  auto green = green_field(assemble(w, g), pole);
  auto aux = aux_field(w, g, AuxKind::lower);
  auto fit = envelope_fit(green, agmon_field(aux, pole, PathNorm::l2), Projector::norm);
  EXPECT_GT(fit.eps_hat, 0);
  EXPECT_NEAR(fit.eps_hat, std::pow(2.0, -1.5), 0.15 * std::pow(2.0, -1.5));
  EXPECT_GE(fit.r2, 0.9);
  EXPECT_GE(fit.below_fraction, 0.95);
}

TEST(Envelope, DeterministicAndGuarded) {
  Grid3 g(1, 21);
  std::size_t pole = centre(g);
  auto w = constant_scalar(4);
  auto green = green_field(assemble(w, g), pole);
  auto dist = agmon_field(aux_field(w, g, AuxKind::lower), pole, PathNorm::l2);
  auto a = envelope_fit(green, dist, Projector::norm);
  auto b = envelope_fit(green, dist, Projector::norm);
  EXPECT_EQ(a.eps_hat, b.eps_hat);
  EXPECT_EQ(a.c_hat, b.c_hat);
  EXPECT_EQ(a.samples.size(), b.samples.size());
  for (const auto& s : a.samples) {
    EXPECT_GE(s.separation, 4 * g.h() - 1e-12);
    EXPECT_GT(s.value, 0);
  }

  GreenField vanishing = green;
  std::fill(vanishing.blocks.begin(), vanishing.blocks.end(), 0.0);
  EXPECT_THROW(envelope_fit(vanishing, dist, Projector::norm), InsufficientSamples);
  auto off = agmon_field(aux_field(w, g, AuxKind::lower), pole + 1);
  EXPECT_THROW(envelope_fit(green, off, Projector::norm), ConfigError);
}

TEST(Envelope, DiagonalMatchesScalarFits) {
  Grid3 g(1.5, 25);
  std::size_t pole = centre(g);
  auto w = catalog::diag_x2_x4();
  auto green = green_field(assemble(w, g), pole);
  auto lower = agmon_field(aux_field(w, g, AuxKind::lower), pole, PathNorm::l2);
  auto upper = agmon_field(aux_field(w, g, AuxKind::upper), pole, PathNorm::l2);
  auto up_fit = envelope_fit(green, lower, Projector::norm);
  Vec e2(2);
  e2 << 0, 1;
  auto low_fit = envelope_fit(green, upper, Projector::quadratic_form, e2);
  EXPECT_GT(up_fit.eps_hat, 0);
  EXPECT_GE(low_fit.below_fraction, 0.95);

  std::vector<double> scalar_eps;
  for (ScalarWeight v : {ScalarWeight{PolynomialScalar{{0, 1}}}, ScalarWeight{PolynomialScalar{{0, 0, 1}}}}) {
    auto ws = MatrixWeight::scalar(3, v);
    auto gs = green_field(assemble(ws, g), pole);
    auto ds = agmon_field(scalar_aux_field(3, v, g), pole, PathNorm::l2);
    scalar_eps.push_back(envelope_fit(gs, ds, Projector::norm).eps_hat);
  }
  EXPECT_NEAR(up_fit.eps_hat, scalar_eps[0], 0.2 * scalar_eps[0]);
  EXPECT_NEAR(low_fit.eps_hat, scalar_eps[1], 0.2 * scalar_eps[1]);
}

TEST(Envelope, DiagonalUpperFit) {
  Grid3 g(1, 33);
  std::size_t pole = centre(g);
  auto w = catalog::diag_x2_x4();
  auto green = green_field(assemble(w, g), pole);
  auto upper = aux_field(w, g, AuxKind::upper);
  auto fit = envelope_fit(green, agmon_field(aux_field(w, g, AuxKind::lower), pole, PathNorm::l2), Projector::norm);
  EXPECT_GT(fit.eps_hat, 0);
  EXPECT_GE(fit.r2, 0.9);

  auto free = green_field(assemble(MatrixWeight::zero(3, 2), g), pole);
  auto small = small_scale_fit(green, free, upper, 2);
  EXPECT_EQ(small.q, 2);
  EXPECT_NEAR(small.alpha, 0.5, 1e-15);
  EXPECT_GE(small.samples, 50u);
  EXPECT_GE(small.bound_fraction, 0.95);
  EXPECT_GE(small.slope, small.alpha - 0.3);
}

TEST(Envelope, SmallScaleExponentChoice) {
  EXPECT_EQ(small_scale_q(2), 2);
  EXPECT_EQ(small_scale_q(2.9), 2.9);
  EXPECT_EQ(small_scale_q(7), 2.9);
}
