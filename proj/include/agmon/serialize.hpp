#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "agmon/classes.hpp"
#include "agmon/cubature.hpp"
#include "agmon/errors.hpp"
#include "agmon/weights.hpp"

namespace agmon {

using json = nlohmann::json;

inline json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const SymMat& m) {
  json rows = json::array();
  for (int i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Vec vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected an array of numbers");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + ": expected numbers");
    v(static_cast<int>(i)) = j[i].get<double>();
  }
  return v;
}

inline Point point_from_json(const json& j, const std::string& what) {
  Vec v = vec_from_json(j, what);
  Point p(v.size());
  for (int i = 0; i < v.size(); ++i) p(i) = v(i);
  return p;
}

inline SymMat symmat_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a square matrix");
  int d = static_cast<int>(j.size());
  Mat m(d, d);
  for (int i = 0; i < d; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != d) throw ConfigError(what + ": matrix is not square");
    for (int k = 0; k < d; ++k) m(i, k) = j[i][k].get<double>();
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw ConfigError(what + ": matrix is not symmetric");
  return SymMat::from(m);
}

// ---- scalar weights ----

inline json to_json(const ScalarWeight& w) {
  if (auto* c = std::get_if<ConstantScalar>(&w)) return {{"type", "constant"}, {"c", c->c}};
  if (auto* p = std::get_if<PowerScalar>(&w)) return {{"type", "power"}, {"a", p->a}, {"gamma", p->gamma}};
  return {{"type", "polynomial"}, {"coeffs", std::get<PolynomialScalar>(w).coeffs}};
}

inline ScalarWeight scalar_from_json(const json& j) {
  std::string type = j.value("type", "");
  if (type == "constant") return ConstantScalar{j.at("c").get<double>()};
  if (type == "power") return PowerScalar{j.value("a", 1.0), j.at("gamma").get<double>()};
  if (type == "polynomial") return PolynomialScalar{j.at("coeffs").get<std::vector<double>>()};
  throw ConfigError("scalar weight: unknown type '" + type + "'");
}

// ---- polynomials ----

inline json to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& t : p.terms()) {
    std::vector<int> e(t.e.begin(), t.e.begin() + p.n());
    terms.push_back({{"c", t.c}, {"e", e}});
  }
  return terms;
}

inline Polynomial polynomial_from_json(const json& j, int n) {
  Polynomial p(n);
  if (j.is_number()) return Polynomial::constant(n, j.get<double>());
  for (const auto& t : j) {
    std::array<int, kMaxAmbient> e{};
    auto ev = t.at("e").get<std::vector<int>>();
    if (static_cast<int>(ev.size()) != n) throw ConfigError("polynomial: exponent vector must have n entries");
    for (int i = 0; i < n; ++i) e[i] = ev[i];
    p.add_term(t.at("c").get<double>(), e);
  }
  return p;
}

// ---- matrix weights ----

inline json to_json(const MatrixWeight& w) {
  json params = json::object();
  const auto& desc = w.descriptor();
  if (auto* c = std::get_if<ConstantWeight>(&desc)) {
    params["matrix"] = to_json(c->value);
  } else if (auto* s = std::get_if<ScalarDiagWeight>(&desc)) {
    json entries = json::array();
    for (const auto& e : s->entries) entries.push_back(to_json(e));
    params["entries"] = entries;
  } else if (auto* p = std::get_if<PowerWeight>(&desc)) {
    params["A"] = to_json(p->a);
    params["gamma"] = to_json(p->gamma);
  } else if (auto* pp = std::get_if<PolynomialPSDWeight>(&desc)) {
    json rows = json::array();
    for (int k = 0; k < pp->rows; ++k) {
      json row = json::array();
      for (int i = 0; i < w.d(); ++i) row.push_back(to_json(pp->factor[k * w.d() + i]));
      rows.push_back(row);
    }
    params["factor"] = rows;
  } else if (auto* nd = std::get_if<NormDiagWeight>(&desc)) {
    params["base"] = to_json(*nd->base);
  } else if (auto* sp = std::get_if<SpectralWeight>(&desc)) {
    params["base"] = to_json(*sp->base);
    params["fn"] = sp->fn == SpectralFn::min ? "min" : sp->fn == SpectralFn::max ? "max" : "det_root";
  }
  return {{"kind", w.kind()}, {"name", w.name()}, {"n", w.n()}, {"d", w.d()}, {"parameters", params}};
}

inline MatrixWeight weight_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("weight: expected a JSON object");
  if (!j.contains("kind")) throw ConfigError("weight: missing field 'kind'");
  std::string kind = j.at("kind").get<std::string>();
  int n = j.value("n", 3);
  json params = j.value("parameters", json::object());
  std::string name = j.value("name", "");
  try {
    if (kind == "identity") {
      int d = j.value("d", 2);
      return MatrixWeight::identity(n, d).named(name.empty() ? "identity" : name);
    }
    std::optional<MatrixWeight> w;
    if (kind == "constant") {
      w = MatrixWeight::constant(n, symmat_from_json(params.at("matrix"), "constant weight"));
    } else if (kind == "scalar_diag") {
      std::vector<ScalarWeight> entries;
      for (const auto& e : params.at("entries")) entries.push_back(scalar_from_json(e));
      w = MatrixWeight::scalar_diag(n, entries);
    } else if (kind == "power") {
      w = MatrixWeight::power(n, symmat_from_json(params.at("A"), "power weight A"), vec_from_json(params.at("gamma"), "power weight gamma"));
    } else if (kind == "polynomial_psd") {
      const json& rows = params.at("factor");
      int d = j.value("d", rows.empty() ? 0 : static_cast<int>(rows[0].size()));
      std::vector<Polynomial> factor;
      for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != d) throw ConfigError("polynomial_psd: factor rows must have d entries");
        for (const auto& cell : row) factor.push_back(polynomial_from_json(cell, n));
      }
      w = MatrixWeight::polynomial_psd(n, d, static_cast<int>(rows.size()), factor);
    } else if (kind == "appendix_a") {
      w = MatrixWeight::appendix_a(n);
    } else if (kind == "norm_diag") {
      w = MatrixWeight::norm_diag(weight_from_json(params.at("base")));
    } else if (kind == "spectral") {
      std::string fn = params.value("fn", "max");
      SpectralFn f = fn == "min" ? SpectralFn::min : fn == "max" ? SpectralFn::max : SpectralFn::det_root;
      if (fn != "min" && fn != "max" && fn != "det_root") throw ConfigError("spectral weight: unknown fn '" + fn + "'");
      w = MatrixWeight::spectral(weight_from_json(params.at("base")), f);
    } else {
      throw ConfigError("weight: unknown kind '" + kind + "'");
    }
    if (j.contains("d") && j.at("d").get<int>() != w->d())
      throw ConfigError("weight: declared d does not match the parameters of kind '" + kind + "'");
    return name.empty() ? *w : w->named(name);
  } catch (const json::exception& e) {
    throw ConfigError("weight '" + kind + "': malformed parameters (" + std::string(e.what()) + ")");
  }
}

// ---- cubes and families ----

inline json to_json(const Cube& q) { return {{"center", to_json(Vec(q.center))}, {"r", q.r}}; }

inline Cube cube_from_json(const json& j) { return {point_from_json(j.at("center"), "cube center"), j.at("r").get<double>()}; }

inline json to_json(const CubeFamily& f) {
  static const char* names[] = {"dyadic", "random", "explicit"};
  json extra = json::array();
  for (const auto& c : f.extra) extra.push_back(to_json(c));
  return {{"generator", names[static_cast<int>(f.generator)]},
          {"n", f.n},
          {"count", f.count},
          {"r_min", f.r_min},
          {"r_max", f.r_max},
          {"box", f.box},
          {"seed", f.seed},
          {"refinement", f.refinement},
          {"cubes", extra}};
}

inline CubeFamily family_from_json(const json& j) {
  CubeFamily f;
  try {
    std::string g = j.value("generator", "random");
    if (g == "dyadic")
      f.generator = FamilyGenerator::dyadic;
    else if (g == "random")
      f.generator = FamilyGenerator::random;
    else if (g == "explicit")
      f.generator = FamilyGenerator::explicit_list;
    else
      throw ConfigError("cube family: unknown generator '" + g + "'");
    f.n = j.value("n", 3);
    f.count = j.value("count", f.count);
    f.r_min = j.value("r_min", f.r_min);
    f.r_max = j.value("r_max", f.r_max);
    f.box = j.value("box", f.box);
    f.seed = j.value("seed", f.seed);
    f.refinement = j.value("refinement", 0);
    if (j.contains("cubes"))
      for (const auto& c : j.at("cubes")) f.extra.push_back(cube_from_json(c));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cube family: malformed descriptor (") + e.what() + ")");
  }
  if (!(f.r_min > 0 && f.r_min <= f.r_max)) throw ConfigError("cube family: need 0 < r_min <= r_max");
  if (!(f.box > 0)) throw ConfigError("cube family: box half-width must be positive");
  for (const auto& c : f.extra)
    if (c.n() != f.n || !(c.r > 0)) throw ConfigError("cube family: explicit cube has wrong dimension or radius");
  return f;
}

inline json to_json(const QuadratureRule& q) {
  return {{"level", q.level},
          {"scheme", q.scheme == Scheme::midpoint ? "midpoint" : "gauss_legendre2"},
          {"tol", q.tol},
          {"method", q.method == IntegrationMethod::automatic ? "automatic"
                     : q.method == IntegrationMethod::exact   ? "exact"
                                                              : "quadrature"}};
}

inline QuadratureRule quadrature_from_json(const json& j) {
  QuadratureRule q;
  q.level = j.value("level", q.level);
  q.tol = j.value("tol", q.tol);
  std::string s = j.value("scheme", "gauss_legendre2");
  if (s == "midpoint")
    q.scheme = Scheme::midpoint;
  else if (s == "gauss_legendre2")
    q.scheme = Scheme::gauss_legendre2;
  else
    throw ConfigError("quadrature: unknown scheme '" + s + "'");
  std::string m = j.value("method", "automatic");
  if (m == "automatic")
    q.method = IntegrationMethod::automatic;
  else if (m == "exact")
    q.method = IntegrationMethod::exact;
  else if (m == "quadrature")
    q.method = IntegrationMethod::quadrature;
  else
    throw ConfigError("quadrature: unknown method '" + m + "'");
  if (q.level < 1 || q.level > 12) throw ConfigError("quadrature: level must be in [1, 12]");
  return q;
}

// ---- reports ----

inline json to_json(const CertReport& r) {
  json out = {{"class", r.class_name},
              {"weight", r.weight},
              {"constant_estimate", r.constant_estimate},
              {"family", to_json(r.family)},
              {"pass", r.pass},
              {"threshold", r.threshold},
              {"refinement_estimates", r.refinement_estimates},
              {"table", r.table},
              {"notes", r.notes}};
  if (r.witness) {
    out["witness"] = {{"cube", to_json(r.witness->cube)},
                      {"direction", to_json(r.witness->direction)},
                      {"value", r.witness->value}};
  } else {
    out["witness"] = nullptr;
  }
  return out;
}

inline json to_json(const CrossCheckReport& r) {
  json items = json::array();
  for (const auto& i : r.items) items.push_back({{"name", i.name}, {"holds", i.holds}, {"detail", i.detail}});
  json est = json::object();
  for (const auto& [k, v] : r.estimates) est[k] = std::isfinite(v) ? json(v) : json(nullptr);
  return {{"weight", r.weight}, {"items", items}, {"membership", r.membership}, {"estimates", est},
          {"disagreements", r.disagreements()}, {"notes", r.notes}};
}

}  // namespace agmon
