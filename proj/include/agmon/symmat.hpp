#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "agmon/errors.hpp"

namespace agmon {

inline constexpr int kMaxSystem = 8;
inline constexpr int kMaxAmbient = 8;
inline constexpr double tol_eig = 1e-10;

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSystem, kMaxSystem>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxSystem, 1>;
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;

struct EigenPairs {
  Vec values;   // ascending
  Mat vectors;  // columns
};

// Symmetric d x d value. Entries (i,j) and (j,i) are always the same double.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(int d) : m_(Mat::Zero(d, d)) {}

  static SymMat from(const Mat& a) {
    SymMat s(static_cast<int>(a.rows()));
    for (int i = 0; i < a.rows(); ++i)
      for (int j = i; j < a.cols(); ++j) {
        double v = i == j ? a(i, i) : 0.5 * (a(i, j) + a(j, i));
        s.m_(i, j) = v;
        s.m_(j, i) = v;
      }
    return s;
  }
  static SymMat identity(int d) {
    SymMat s(d);
    s.m_.setIdentity();
    return s;
  }
  static SymMat diagonal(const Vec& v) {
    SymMat s(static_cast<int>(v.size()));
    for (int i = 0; i < v.size(); ++i) s.m_(i, i) = v(i);
    return s;
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Mat& matrix() const { return m_; }

  void set(int i, int j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  bool is_diagonal() const {
    for (int i = 0; i < dim(); ++i)
      for (int j = i + 1; j < dim(); ++j)
        if (m_(i, j) != 0.0) return false;
    return true;
  }

  EigenPairs eig() const {
    EigenPairs out;
    int d = dim();
    if (is_diagonal()) {
      // exact for diagonal input; the sort keeps ascending order
      out.values.resize(d);
      out.vectors = Mat::Identity(d, d);
      for (int i = 0; i < d; ++i) out.values(i) = m_(i, i);
      for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
          if (out.values(j) < out.values(i)) {
            std::swap(out.values(i), out.values(j));
            out.vectors.col(i).swap(out.vectors.col(j));
          }
      return out;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(m_);
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
    return out;
  }

  Vec eigenvalues() const { return eig().values; }
  double lambda_min() const { return eigenvalues()(0); }
  double lambda_max() const { return eigenvalues()(dim() - 1); }
  double trace() const { return m_.trace(); }
  double quad(const Vec& e) const { return e.dot(m_ * e); }
  double frobenius() const { return m_.norm(); }
  // operator 2-norm
  double norm() const {
    Vec ev = eigenvalues();
    return std::max(std::abs(ev(0)), std::abs(ev(dim() - 1)));
  }
  double det() const {
    if (dim() == 1) return m_(0, 0);
    if (dim() == 2) return m_(0, 0) * m_(1, 1) - m_(0, 1) * m_(1, 0);
    return m_.determinant();
  }

  SymMat operator+(const SymMat& o) const { return from(m_ + o.m_); }
  SymMat operator-(const SymMat& o) const { return from(m_ - o.m_); }
  SymMat operator*(double s) const { return from(m_ * s); }
  SymMat& operator+=(const SymMat& o) {
    *this = *this + o;
    return *this;
  }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (int i = 0; i < dim(); ++i) {
      os << (i ? ", [" : "[");
      for (int j = 0; j < dim(); ++j) os << (j ? ", " : "") << m_(i, j);
      os << ']';
    }
    os << ']';
    return os.str();
  }

 private:
  Mat m_;
};

inline SymMat operator*(double s, const SymMat& m) { return m * s; }

// B M B^T
inline SymMat congruence(const Mat& b, const SymMat& m) { return SymMat::from(b * m.matrix() * b.transpose()); }

namespace detail {

inline Vec clamped_eigenvalues(const EigenPairs& ep, const char* op, const SymMat& m) {
  int d = static_cast<int>(ep.values.size());
  double top = std::max(std::abs(ep.values(0)), std::abs(ep.values(d - 1)));
  if (ep.values(0) < -tol_eig * top) throw NotPSD(std::string(op) + ": matrix is not PSD: " + m.str());
  Vec v = ep.values;
  for (int i = 0; i < d; ++i)
    if (v(i) < 0) v(i) = 0;
  return v;
}

inline SymMat spectral(const EigenPairs& ep, const Vec& f) {
  Mat out = ep.vectors * f.asDiagonal() * ep.vectors.transpose();
  return SymMat::from(out);
}

}  // namespace detail

inline bool is_psd(const SymMat& m) {
  Vec ev = m.eigenvalues();
  double top = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return ev(0) >= -tol_eig * top;
}

// M^t for PSD M, t > 0
inline SymMat pow_psd(const SymMat& m, double t) {
  EigenPairs ep = m.eig();
  Vec v = detail::clamped_eigenvalues(ep, "pow_psd", m);
  for (int i = 0; i < v.size(); ++i) v(i) = std::pow(v(i), t);
  return detail::spectral(ep, v);
}

inline SymMat sqrt_psd(const SymMat& m) {
  EigenPairs ep = m.eig();
  Vec v = detail::clamped_eigenvalues(ep, "sqrt_psd", m);
  for (int i = 0; i < v.size(); ++i) v(i) = std::sqrt(v(i));
  return detail::spectral(ep, v);
}

inline SymMat inv(const SymMat& m) {
  EigenPairs ep = m.eig();
  Vec v = detail::clamped_eigenvalues(ep, "inv", m);
  double top = v(v.size() - 1);
  for (int i = 0; i < v.size(); ++i) {
    if (!(v(i) > tol_eig * top) || top == 0) throw Degenerate("inv: matrix is singular: " + m.str());
    v(i) = 1.0 / v(i);
  }
  return detail::spectral(ep, v);
}

inline SymMat inv_sqrt(const SymMat& m) {
  EigenPairs ep = m.eig();
  Vec v = detail::clamped_eigenvalues(ep, "inv_sqrt", m);
  double top = v(v.size() - 1);
  for (int i = 0; i < v.size(); ++i) {
    if (!(v(i) > tol_eig * top) || top == 0) throw Degenerate("inv_sqrt: matrix is singular: " + m.str());
    v(i) = 1.0 / std::sqrt(v(i));
  }
  return detail::spectral(ep, v);
}

inline double logdet(const SymMat& m) {
  EigenPairs ep = m.eig();
  Vec v = detail::clamped_eigenvalues(ep, "logdet", m);
  double s = 0;
  for (int i = 0; i < v.size(); ++i) {
    if (!(v(i) > 0)) throw DomainError("logdet: determinant is zero for " + m.str());
    s += std::log(v(i));
  }
  return s;
}

}  // namespace agmon
