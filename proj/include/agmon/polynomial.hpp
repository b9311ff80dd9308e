#pragma once

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "agmon/errors.hpp"
#include "agmon/symmat.hpp"

namespace agmon {

struct Monomial {
  double c = 0;
  std::array<int, kMaxAmbient> e{};
};

// Real polynomial in n variables, stored as a list of monomials.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(int n) : n_(n) {
    if (n < 1 || n > kMaxAmbient) throw ConfigError("Polynomial: unsupported dimension " + std::to_string(n));
  }

  static Polynomial constant(int n, double c) {
    Polynomial p(n);
    p.add_term(c, {});
    return p;
  }
  static Polynomial variable(int n, int i) {
    Polynomial p(n);
    std::array<int, kMaxAmbient> e{};
    e[i] = 1;
    p.add_term(1.0, e);
    return p;
  }
  // |x|_2^{2k}
  static Polynomial radial(int n, int k) {
    Polynomial sq(n);
    for (int i = 0; i < n; ++i) {
      std::array<int, kMaxAmbient> e{};
      e[i] = 2;
      sq.add_term(1.0, e);
    }
    Polynomial out = constant(n, 1.0);
    for (int j = 0; j < k; ++j) out = out * sq;
    return out;
  }

  int n() const { return n_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add_term(double c, const std::array<int, kMaxAmbient>& e) {
    if (c == 0.0) return;
    for (auto& t : terms_)
      if (t.e == e) {
        t.c += c;
        prune();
        return;
      }
    terms_.push_back({c, e});
  }

  int degree() const {
    int deg = 0;
    for (const auto& t : terms_) deg = std::max(deg, total(t.e));
    return deg;
  }

  // total degree if every monomial has the same degree, else -1
  int homogeneous_degree() const {
    if (terms_.empty()) return 0;
    int deg = total(terms_[0].e);
    for (const auto& t : terms_)
      if (total(t.e) != deg) return -1;
    return deg;
  }

  double eval(const Point& x) const {
    double s = 0;
    for (const auto& t : terms_) {
      double v = t.c;
      for (int i = 0; i < n_; ++i)
        for (int k = 0; k < t.e[i]; ++k) v *= x(i);
      s += v;
    }
    return s;
  }

  Polynomial operator+(const Polynomial& o) const {
    Polynomial out = *this;
    if (out.n_ == 0) out.n_ = o.n_;
    for (const auto& t : o.terms_) out.add_term(t.c, t.e);
    return out;
  }
  Polynomial operator*(const Polynomial& o) const {
    std::map<std::array<int, kMaxAmbient>, double> acc;
    for (const auto& a : terms_)
      for (const auto& b : o.terms_) {
        std::array<int, kMaxAmbient> e{};
        for (int i = 0; i < kMaxAmbient; ++i) e[i] = a.e[i] + b.e[i];
        acc[e] += a.c * b.c;
      }
    Polynomial out(n_ ? n_ : o.n_);
    for (const auto& [e, c] : acc) out.add_term(c, e);
    return out;
  }
  Polynomial operator*(double s) const {
    Polynomial out(n_);
    for (const auto& t : terms_) out.add_term(t.c * s, t.e);
    return out;
  }

  // Coefficients a_j with  integral over Q(x,r) of P = sum_j a_j r^j.
  std::vector<double> cube_integral_in_r(const Point& x) const {
    std::vector<double> total_coeffs(1, 0.0);
    for (const auto& t : terms_) {
      std::vector<double> prod{t.c};
      for (int i = 0; i < n_; ++i) {
        int e = t.e[i];
        // integral of y^e over [x-r, x+r] = sum_{k even} C(e,k) x^{e-k} 2 r^{k+1}/(k+1)
        std::vector<double> f(e + 2, 0.0);
        double binom = 1.0;
        for (int k = 0; k <= e; ++k) {
          if (k > 0) binom = binom * (e - k + 1) / k;
          if (k % 2 == 0) f[k + 1] = binom * std::pow(x(i), e - k) * 2.0 / (k + 1);
        }
        std::vector<double> next(prod.size() + f.size() - 1, 0.0);
        for (std::size_t a = 0; a < prod.size(); ++a)
          if (prod[a] != 0.0)
            for (std::size_t b = 0; b < f.size(); ++b) next[a + b] += prod[a] * f[b];
        prod.swap(next);
      }
      if (prod.size() > total_coeffs.size()) total_coeffs.resize(prod.size(), 0.0);
      for (std::size_t j = 0; j < prod.size(); ++j) total_coeffs[j] += prod[j];
    }
    return total_coeffs;
  }

  double integrate_cube(const Point& x, double r) const {
    auto a = cube_integral_in_r(x);
    double s = 0;
    for (std::size_t j = a.size(); j-- > 0;) s = s * r + a[j];
    return s;
  }

 private:
  static int total(const std::array<int, kMaxAmbient>& e) {
    int s = 0;
    for (int v : e) s += v;
    return s;
  }
  void prune() {
    std::erase_if(terms_, [](const Monomial& t) { return t.c == 0.0; });
  }

  int n_ = 0;
  std::vector<Monomial> terms_;
};

}  // namespace agmon
