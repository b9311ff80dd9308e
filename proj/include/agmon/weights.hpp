#pragma once

#include <cmath>
#include <initializer_list>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "agmon/errors.hpp"
#include "agmon/polynomial.hpp"
#include "agmon/symmat.hpp"

namespace agmon {

inline Point make_point(std::initializer_list<double> xs) {
  Point p(static_cast<int>(xs.size()));
  int i = 0;
  for (double v : xs) p(i++) = v;
  return p;
}

inline constexpr double kNoDegree = std::numeric_limits<double>::quiet_NaN();

// ---- scalar weights -------------------------------------------------------

struct ConstantScalar {
  double c = 1;
};
struct PowerScalar {
  double a = 1;
  double gamma = 0;
};
// sum_k coeffs[k] |x|^{2k}
struct PolynomialScalar {
  std::vector<double> coeffs;
};

using ScalarWeight = std::variant<ConstantScalar, PowerScalar, PolynomialScalar>;

inline void validate_scalar(const ScalarWeight& w, int n) {
  if (auto* c = std::get_if<ConstantScalar>(&w)) {
    if (!(c->c >= 0)) throw ConfigError("scalar weight: constant must be >= 0");
  } else if (auto* p = std::get_if<PowerScalar>(&w)) {
    if (!(p->a > 0)) throw ConfigError("scalar weight: power coefficient must be > 0");
    if (!(p->gamma > -n)) throw ConfigError("scalar weight: power exponent must exceed -n");
  } else {
    for (double c : std::get<PolynomialScalar>(w).coeffs)
      if (!(c >= 0)) throw ConfigError("scalar weight: polynomial coefficients must be >= 0");
  }
}

inline double eval_scalar(const ScalarWeight& w, const Point& x) {
  if (auto* c = std::get_if<ConstantScalar>(&w)) return c->c;
  double r2 = x.squaredNorm();
  if (auto* p = std::get_if<PowerScalar>(&w)) {
    if (r2 == 0.0) {
      if (p->gamma < 0) throw DomainError("eval: negative-exponent power weight evaluated at the origin");
      return p->gamma == 0 ? p->a : 0.0;
    }
    return p->a * std::pow(r2, 0.5 * p->gamma);
  }
  const auto& cs = std::get<PolynomialScalar>(w).coeffs;
  double s = 0;
  for (std::size_t k = cs.size(); k-- > 0;) s = s * r2 + cs[k];
  return s;
}

inline std::optional<Polynomial> scalar_polynomial(const ScalarWeight& w, int n) {
  if (auto* c = std::get_if<ConstantScalar>(&w)) return Polynomial::constant(n, c->c);
  if (auto* p = std::get_if<PowerScalar>(&w)) {
    double half = 0.5 * p->gamma;
    if (half >= 0 && half == std::floor(half) && half <= 8) return Polynomial::radial(n, static_cast<int>(half)) * p->a;
    return std::nullopt;
  }
  Polynomial out(n);
  const auto& cs = std::get<PolynomialScalar>(w).coeffs;
  for (std::size_t k = 0; k < cs.size(); ++k)
    if (cs[k] != 0) out = out + Polynomial::radial(n, static_cast<int>(k)) * cs[k];
  return out;
}

// homogeneity degree about the origin, NaN if not homogeneous
inline double scalar_degree(const ScalarWeight& w) {
  if (std::holds_alternative<ConstantScalar>(w)) return 0;
  if (auto* p = std::get_if<PowerScalar>(&w)) return p->gamma;
  const auto& cs = std::get<PolynomialScalar>(w).coeffs;
  int found = -1;
  for (std::size_t k = 0; k < cs.size(); ++k)
    if (cs[k] != 0) {
      if (found >= 0) return kNoDegree;
      found = static_cast<int>(k);
    }
  return found < 0 ? 0 : 2.0 * found;
}

inline bool scalar_singular_at_origin(const ScalarWeight& w) {
  auto* p = std::get_if<PowerScalar>(&w);
  return p && p->gamma < 0;
}

// ---- matrix weights -------------------------------------------------------

class MatrixWeight;

struct ConstantWeight {
  SymMat value;
};
struct ScalarDiagWeight {
  std::vector<ScalarWeight> entries;
};
// a_ij |x|^{(g_i + g_j)/2}
struct PowerWeight {
  SymMat a;
  Vec gamma;
};
// V = P^T P with P a k x d polynomial matrix (row-major)
struct PolynomialPSDWeight {
  int rows = 0;
  std::vector<Polynomial> factor;
};
// [[1, |x|^2], [|x|^2, |x|^4]]
struct AppendixAWeight {};
// |V(x)| I
struct NormDiagWeight {
  std::shared_ptr<const MatrixWeight> base;
};
enum class SpectralFn { min, max, det_root };
// 1x1 weight lambda_min(V), lambda_max(V) or det(V)^{1/d}
struct SpectralWeight {
  std::shared_ptr<const MatrixWeight> base;
  SpectralFn fn = SpectralFn::max;
};

using WeightDescriptor = std::variant<ConstantWeight, ScalarDiagWeight, PowerWeight, PolynomialPSDWeight,
                                      AppendixAWeight, NormDiagWeight, SpectralWeight>;

class MatrixWeight {
 public:
  MatrixWeight(int n, int d, WeightDescriptor desc, std::string name = {})
      : n_(n), d_(d), desc_(std::move(desc)), name_(std::move(name)) {
    validate();
    if (name_.empty()) name_ = kind();
  }

  static MatrixWeight constant(int n, const SymMat& m) { return {n, m.dim(), ConstantWeight{m}}; }
  static MatrixWeight identity(int n, int d) { return constant(n, SymMat::identity(d)); }
  static MatrixWeight zero(int n, int d) { return constant(n, SymMat(d)); }
  static MatrixWeight scalar_diag(int n, std::vector<ScalarWeight> entries) {
    int d = static_cast<int>(entries.size());
    return {n, d, ScalarDiagWeight{std::move(entries)}};
  }
  static MatrixWeight scalar(int n, const ScalarWeight& w) { return scalar_diag(n, {w}); }
  static MatrixWeight power(int n, const SymMat& a, const Vec& gamma) { return {n, a.dim(), PowerWeight{a, gamma}}; }
  static MatrixWeight polynomial_psd(int n, int d, int rows, std::vector<Polynomial> factor) {
    return {n, d, PolynomialPSDWeight{rows, std::move(factor)}};
  }
  static MatrixWeight appendix_a(int n) { return {n, 2, AppendixAWeight{}}; }
  static MatrixWeight norm_diag(const MatrixWeight& base) {
    return {base.n(), base.d(), NormDiagWeight{std::make_shared<const MatrixWeight>(base)}};
  }
  static MatrixWeight spectral(const MatrixWeight& base, SpectralFn fn) {
    return {base.n(), 1, SpectralWeight{std::make_shared<const MatrixWeight>(base), fn}};
  }

  int n() const { return n_; }
  int d() const { return d_; }
  const WeightDescriptor& descriptor() const { return desc_; }
  const std::string& name() const { return name_; }
  MatrixWeight named(std::string name) const {
    MatrixWeight w = *this;
    w.name_ = std::move(name);
    return w;
  }

  std::string kind() const {
    static const char* names[] = {"constant", "scalar_diag", "power", "polynomial_psd",
                                  "appendix_a", "norm_diag", "spectral"};
    return names[desc_.index()];
  }

  SymMat eval(const Point& x) const {
    if (x.size() != n_) throw DomainError("eval: point dimension does not match weight dimension");
    return std::visit([&](const auto& w) { return eval_impl(w, x); }, desc_);
  }

  bool singular_at_origin() const {
    if (auto* s = std::get_if<ScalarDiagWeight>(&desc_)) {
      for (const auto& e : s->entries)
        if (scalar_singular_at_origin(e)) return true;
      return false;
    }
    if (auto* p = std::get_if<PowerWeight>(&desc_)) return p->gamma.minCoeff() < 0;
    if (auto* nd = std::get_if<NormDiagWeight>(&desc_)) return nd->base->singular_at_origin();
    if (auto* sp = std::get_if<SpectralWeight>(&desc_)) return sp->base->singular_at_origin();
    return false;
  }

  int components() const { return d_ * (d_ + 1) / 2; }

  // Entries (upper triangle, row-major) as exact polynomials when available.
  std::optional<std::vector<Polynomial>> polynomial_entries() const {
    std::vector<Polynomial> out;
    if (auto* c = std::get_if<ConstantWeight>(&desc_)) {
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) out.push_back(Polynomial::constant(n_, c->value(i, j)));
      return out;
    }
    if (auto* s = std::get_if<ScalarDiagWeight>(&desc_)) {
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) {
          if (i != j) {
            out.push_back(Polynomial(n_));
            continue;
          }
          auto p = scalar_polynomial(s->entries[i], n_);
          if (!p) return std::nullopt;
          out.push_back(*p);
        }
      return out;
    }
    if (auto* p = std::get_if<PowerWeight>(&desc_)) {
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) {
          auto q = scalar_polynomial(PowerScalar{1.0, 0.5 * (p->gamma(i) + p->gamma(j))}, n_);
          if (!q) return std::nullopt;
          out.push_back(*q * p->a(i, j));
        }
      return out;
    }
    if (auto* pp = std::get_if<PolynomialPSDWeight>(&desc_)) {
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) {
          Polynomial acc(n_);
          for (int k = 0; k < pp->rows; ++k) acc = acc + pp->factor[k * d_ + i] * pp->factor[k * d_ + j];
          out.push_back(acc);
        }
      return out;
    }
    if (std::holds_alternative<AppendixAWeight>(desc_)) {
      return std::vector<Polynomial>{Polynomial::constant(n_, 1.0), Polynomial::radial(n_, 1),
                                     Polynomial::radial(n_, 2)};
    }
    return std::nullopt;
  }

  // Homogeneity degree of each packed entry about the origin (NaN if none).
  std::vector<double> entry_degrees() const {
    std::vector<double> out;
    if (std::holds_alternative<ConstantWeight>(desc_)) return std::vector<double>(components(), 0.0);
    if (auto* s = std::get_if<ScalarDiagWeight>(&desc_)) {
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) out.push_back(i == j ? scalar_degree(s->entries[i]) : 0.0);
      return out;
    }
    if (auto* p = std::get_if<PowerWeight>(&desc_)) {
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) out.push_back(0.5 * (p->gamma(i) + p->gamma(j)));
      return out;
    }
    if (std::holds_alternative<PolynomialPSDWeight>(desc_)) {
      auto entries = polynomial_entries();
      for (const auto& e : *entries) {
        int deg = e.homogeneous_degree();
        out.push_back(deg < 0 ? kNoDegree : deg);
      }
      return out;
    }
    if (std::holds_alternative<AppendixAWeight>(desc_)) return {0.0, 2.0, 4.0};
    const MatrixWeight* base = nullptr;
    if (auto* nd = std::get_if<NormDiagWeight>(&desc_)) base = nd->base.get();
    if (auto* sp = std::get_if<SpectralWeight>(&desc_)) base = sp->base.get();
    auto h = base->homogeneity();
    return std::vector<double>(components(), h ? *h : kNoDegree);
  }

  // degree of det W(x) as a homogeneous function (NaN if unknown)
  double determinant_degree() const {
    if (auto h = homogeneity()) return d_ * *h;
    if (auto* s = std::get_if<ScalarDiagWeight>(&desc_)) {
      double sum = 0;
      for (const auto& e : s->entries) sum += scalar_degree(e);
      return sum;
    }
    if (auto* p = std::get_if<PowerWeight>(&desc_)) return p->gamma.sum();
    if (auto* s = std::get_if<SpectralWeight>(&desc_); s && s->fn == SpectralFn::det_root)
      return s->base->determinant_degree() / s->base->d();
    return kNoDegree;
  }

  // common homogeneity degree of all entries
  std::optional<double> homogeneity() const {
    auto deg = entry_degrees();
    for (double v : deg)
      if (std::isnan(v) || v != deg[0]) return std::nullopt;
    return deg[0];
  }

 private:
  void validate() const {
    if (n_ < 1 || n_ > kMaxAmbient) throw ConfigError("weight: ambient dimension n must be in [1, 8]");
    if (d_ < 1 || d_ > kMaxSystem) throw ConfigError("weight: system size d must be in [1, 8]");
    if (auto* c = std::get_if<ConstantWeight>(&desc_)) {
      if (c->value.dim() != d_) throw ConfigError("weight: constant matrix has wrong size");
      if (!is_psd(c->value)) throw ConfigError("weight: constant matrix is not PSD");
    } else if (auto* s = std::get_if<ScalarDiagWeight>(&desc_)) {
      if (static_cast<int>(s->entries.size()) != d_) throw ConfigError("weight: scalar_diag needs d entries");
      for (const auto& e : s->entries) validate_scalar(e, n_);
    } else if (auto* p = std::get_if<PowerWeight>(&desc_)) {
      if (p->a.dim() != d_ || p->gamma.size() != d_) throw ConfigError("weight: power weight sizes disagree");
      if (!(p->a.lambda_min() > 0)) throw ConfigError("weight: power weight matrix A must be positive definite");
      for (int i = 0; i < d_; ++i)
        if (!(p->gamma(i) > -n_)) throw ConfigError("weight: power exponents must exceed -n");
    } else if (auto* pp = std::get_if<PolynomialPSDWeight>(&desc_)) {
      if (pp->rows < 1 || static_cast<int>(pp->factor.size()) != pp->rows * d_)
        throw ConfigError("weight: polynomial factor must be rows x d");
      for (const auto& q : pp->factor)
        if (q.n() != n_ && !q.is_zero()) throw ConfigError("weight: polynomial dimension mismatch");
    } else if (std::holds_alternative<AppendixAWeight>(desc_)) {
      if (d_ != 2) throw ConfigError("weight: appendix_a has d = 2");
    } else if (auto* nd = std::get_if<NormDiagWeight>(&desc_)) {
      if (!nd->base || nd->base->n() != n_ || nd->base->d() != d_) throw ConfigError("weight: norm_diag base mismatch");
    } else if (auto* sp = std::get_if<SpectralWeight>(&desc_)) {
      if (!sp->base || sp->base->n() != n_ || d_ != 1) throw ConfigError("weight: spectral weight is 1 x 1");
    }
  }

  SymMat eval_impl(const ConstantWeight& w, const Point&) const { return w.value; }

  SymMat eval_impl(const ScalarDiagWeight& w, const Point& x) const {
    SymMat m(d_);
    for (int i = 0; i < d_; ++i) m.set(i, i, eval_scalar(w.entries[i], x));
    return m;
  }

  SymMat eval_impl(const PowerWeight& w, const Point& x) const {
    double r = x.norm();
    if (r == 0.0 && w.gamma.minCoeff() < 0)
      throw DomainError("eval: power weight with negative exponent evaluated at the origin");
    SymMat m(d_);
    for (int i = 0; i < d_; ++i)
      for (int j = i; j < d_; ++j) {
        double g = 0.5 * (w.gamma(i) + w.gamma(j));
        double f = g == 0.0 ? 1.0 : (r == 0.0 ? 0.0 : std::pow(r, g));
        m.set(i, j, w.a(i, j) * f);
      }
    return m;
  }

  SymMat eval_impl(const PolynomialPSDWeight& w, const Point& x) const {
    Mat p(w.rows, d_);
    for (int k = 0; k < w.rows; ++k)
      for (int i = 0; i < d_; ++i) p(k, i) = w.factor[k * d_ + i].eval(x);
    return SymMat::from(p.transpose() * p);
  }

  SymMat eval_impl(const AppendixAWeight&, const Point& x) const {
    double r2 = x.squaredNorm();
    SymMat m(2);
    m.set(0, 0, 1.0);
    m.set(0, 1, r2);
    m.set(1, 1, r2 * r2);
    return m;
  }

  SymMat eval_impl(const NormDiagWeight& w, const Point& x) const {
    return SymMat::identity(d_) * w.base->eval(x).lambda_max();
  }

  SymMat eval_impl(const SpectralWeight& w, const Point& x) const {
    SymMat v = w.base->eval(x);
    SymMat m(1);
    if (w.fn == SpectralFn::min) {
      m.set(0, 0, std::max(0.0, v.lambda_min()));
    } else if (w.fn == SpectralFn::max) {
      m.set(0, 0, v.lambda_max());
    } else {
      double det = std::max(0.0, v.det());
      m.set(0, 0, std::pow(det, 1.0 / v.dim()));
    }
    return m;
  }

  int n_;
  int d_;
  WeightDescriptor desc_;
  std::string name_;
};

// V(x)^{-1} = (a^{ij} |x|^{-gamma_ij}) for power weights
inline SymMat inv_power_weight(const MatrixWeight& w, const Point& x) {
  auto* p = std::get_if<PowerWeight>(&w.descriptor());
  if (!p) throw ConfigError("inv_power_weight: weight '" + w.name() + "' is not a power weight");
  double r = x.norm();
  if (r == 0.0) throw DomainError("inv_power_weight: evaluated at the origin");
  SymMat ainv = inv(p->a);
  int d = w.d();
  SymMat m(d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) m.set(i, j, ainv(i, j) * std::pow(r, -0.5 * (p->gamma(i) + p->gamma(j))));
  return m;
}

}  // namespace agmon
