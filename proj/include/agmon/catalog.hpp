#pragma once

#include <string>
#include <vector>

#include "agmon/errors.hpp"
#include "agmon/weights.hpp"

namespace agmon::catalog {

inline MatrixWeight identity(int n = 3) { return MatrixWeight::identity(n, 2).named("identity"); }

// A = [[2, 1], [1, 2]], gamma = (1, 3)
inline MatrixWeight power(int n = 3) {
  SymMat a(2);
  a.set(0, 0, 2);
  a.set(0, 1, 1);
  a.set(1, 1, 2);
  Vec g(2);
  g << 1, 3;
  return MatrixWeight::power(n, a, g).named("power");
}

// diag(|x|^2, |x|^4)
inline MatrixWeight diag_x2_x4(int n = 3) {
  return MatrixWeight::scalar_diag(n, {PolynomialScalar{{0, 1}}, PolynomialScalar{{0, 0, 1}}}).named("diag_x2_x4");
}

// diag(|x|^2, |x|^2 + |x|^4): pointwise ordered diagonal entries
inline MatrixWeight diag_ordered(int n = 3) {
  return MatrixWeight::scalar_diag(n, {PolynomialScalar{{0, 1}}, PolynomialScalar{{0, 1, 1}}}).named("diag_ordered");
}

inline MatrixWeight appendix_a(int n = 3) { return MatrixWeight::appendix_a(n).named("appendix_a"); }

inline std::vector<MatrixWeight> all(int n = 3) { return {identity(n), power(n), diag_x2_x4(n), appendix_a(n)}; }

inline MatrixWeight by_name(const std::string& name, int n = 3) {
  if (name == "identity") return identity(n);
  if (name == "power") return power(n);
  if (name == "diag_x2_x4") return diag_x2_x4(n);
  if (name == "diag_ordered") return diag_ordered(n);
  if (name == "appendix_a") return appendix_a(n);
  throw ConfigError("catalog: unknown weight '" + name + "'");
}

}  // namespace agmon::catalog
