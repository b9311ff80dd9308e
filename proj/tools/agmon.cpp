#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "agmon/agmon.hpp"

namespace fs = std::filesystem;
using namespace agmon;

namespace {

using Clock = std::chrono::steady_clock;

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// ---- configuration -----------------------------------------------------------------

json defaults(const std::string& size) {
  bool small = size == "small";
  return {
      {"size", size},
      {"seed", 1},
      {"threads", 0},
      {"budget", nullptr},
      {"weight", "appendix_a"},
      {"class", "bp"},
      {"p", 2.0},
      {"family", {{"generator", "dyadic"}, {"count", 8}, {"r_min", small ? 0.25 : 0.125}, {"r_max", 1.0}, {"box", 1.0}}},
      {"quadrature", json::object()},
      {"refinements", small ? 1 : 2},
      {"directions", small ? 8 : 16},
      {"nc_mode", "critical"},
      {"grid", {small ? 17 : 48, 2.0}},
      {"kind", "lower"},
      {"norm", "l2"},
      {"pole", nullptr},
      {"e", nullptr},
      {"form", "lower"},
      {"decay_p", 3.0},
      {"R", {10, 20, 40, 80}},
      {"ms", {4, 9, 16, 25}},
      {"probes", 10},
      {"fp", true},
      {"nc", true},
  };
}

std::vector<double> split_numbers(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream f(path);
  if (!f) throw ConfigError(what + ": cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": '" + path + "' is not valid JSON (" + e.what() + ")");
  }
}

// Flag text -> config value. Files are inlined so the resolved config is self-contained.
void apply_flag(json& cfg, const std::string& key, const std::string& raw) {
  static const std::vector<std::string> lists = {"grid", "pole", "e", "R", "ms"};
  static const std::vector<std::string> numbers = {"p", "seed", "threads", "budget", "refinements",
                                                   "directions", "decay_p", "probes"};
  if (key == "weight") {
    cfg[key] = fs::exists(raw) ? read_json_file(raw, "--weight") : json(raw);
  } else if (key == "family" || key == "quadrature") {
    cfg[key] = read_json_file(raw, "--" + key);
  } else if (std::find(lists.begin(), lists.end(), key) != lists.end()) {
    cfg[key] = split_numbers(raw, "--" + key);
  } else if (std::find(numbers.begin(), numbers.end(), key) != numbers.end()) {
    cfg[key] = split_numbers(raw, "--" + key).at(0);
  } else if (key == "fp" || key == "nc") {
    cfg[key] = raw == "true";
  } else {
    cfg[key] = raw;
  }
}

template <class T>
T get(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) throw ConfigError("config: missing '" + key + "'");
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + key + "' has the wrong type");
  }
}

MatrixWeight resolve_weight(const json& j) {
  if (j.is_string()) return catalog::by_name(j.get<std::string>());
  return weight_from_json(j);
}

Grid3 resolve_grid(const json& cfg) {
  auto g = get<std::vector<double>>(cfg, "grid");
  if (g.size() != 2 || g[0] != std::floor(g[0])) throw ConfigError("--grid: expected N,L with integer N");
  return Grid3(g[1], static_cast<int>(g[0]));
}

std::size_t resolve_node(const json& cfg, const std::string& key, const Grid3& g) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return g.nearest(Point::Zero(3));
  auto c = get<std::vector<double>>(cfg, key);
  if (c.size() != 3) throw ConfigError("--" + key + ": expected i,j,k");
  for (double v : c)
    if (v < 0 || v >= g.N || v != std::floor(v)) throw ConfigError("--" + key + ": index outside 0.." + std::to_string(g.N - 1));
  return g.index(static_cast<int>(c[0]), static_cast<int>(c[1]), static_cast<int>(c[2]));
}

AuxKind resolve_kind(const std::string& s) {
  if (s == "lower") return AuxKind::lower;
  if (s == "upper") return AuxKind::upper;
  if (s == "directional") return AuxKind::directional;
  if (s == "scalar") return AuxKind::scalar;
  throw ConfigError("--kind: unknown kind '" + s + "'");
}

// ---- run context -------------------------------------------------------------------

struct Context {
  json cfg;
  fs::path out;
  Parallelism par;
  bool quiet = false;
  std::vector<fs::path> files;
  std::map<std::string, double> timings;

  std::string stage;
  Clock::time_point stage_start;
  double stage_budget = INFINITY;

  void log(const std::string& msg) const {
    if (!quiet) std::cerr << "[agmon] " << msg << std::endl;
  }

  void begin(const std::string& name, double default_budget) {
    stage = name;
    stage_start = Clock::now();
    stage_budget = cfg.at("budget").is_null() ? default_budget : cfg.at("budget").get<double>();
    log("stage " + name);
  }

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - stage_start).count(); }

  // checked between units of work; a running solve is never interrupted
  void tick() const {
    if (elapsed() > stage_budget)
      throw BudgetExceeded("stage '" + stage + "' exceeded its budget of " + format_double(stage_budget) + " s");
  }

  void end() {
    timings[stage] = elapsed();
    tick();
  }

  void save(const RunReport& rep, const std::string& stem) {
    for (auto& p : rep.write(out, stem)) files.push_back(p);
  }

  template <class F>
  void save_field(const std::string& name, const F& field) {
    fs::create_directories(out);
    write_field(out / name, field);
    files.push_back(out / name);
  }

  CertOptions cert_options() const {
    CertOptions o;
    o.rule = quadrature_from_json(cfg.at("quadrature"));
    o.refinements = get<int>(cfg, "refinements");
    o.random_directions = get<int>(cfg, "directions");
    o.seed = get<std::uint64_t>(cfg, "seed");
    o.par = par;
    return o;
  }

  AuxOptions aux_options() const {
    AuxOptions a;
    a.rule = quadrature_from_json(cfg.at("quadrature"));
    return a;
  }

  CubeFamily family(int n) const {
    CubeFamily f = family_from_json(cfg.at("family"));
    if (f.n != n) throw ConfigError("--family: cube dimension " + std::to_string(f.n) + " does not match the weight");
    if (!cfg.at("family").contains("seed")) f.seed = get<std::uint64_t>(cfg, "seed");
    return f;
  }
};

std::string sha256_hex(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("manifest: cannot read " + p.string());
  EVP_MD_CTX* md = EVP_MD_CTX_new();
  EVP_DigestInit_ex(md, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(md, buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md, digest, &len);
  EVP_MD_CTX_free(md);
  std::string hex;
  char tmp[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(tmp, sizeof tmp, "%02x", digest[i]);
    hex += tmp;
  }
  return hex;
}

void write_manifest(Context& ctx) {
  std::vector<std::string> names;
  for (const auto& p : ctx.files) names.push_back(fs::relative(p, ctx.out).generic_string());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::string text;
  for (const auto& n : names) text += sha256_hex(ctx.out / n) + "  " + n + "\n";
  RunReport::write_text(ctx.out / "MANIFEST.sha256", text);
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---- subcommands ---------------------------------------------------------------------

json run_certify(Context& ctx, RunReport& rep) {
  MatrixWeight w = resolve_weight(ctx.cfg.at("weight"));
  std::string cls = get<std::string>(ctx.cfg, "class");
  double p = get<double>(ctx.cfg, "p");
  CubeFamily fam = ctx.family(w.n());
  CertOptions o = ctx.cert_options();
  ctx.log("certify " + cls + " for '" + w.name() + "'");
  if (cls == "cross") {
    CrossCheckReport cr = cross_checks(w, p, fam, o);
    for (const auto& [k, v] : cr.membership) rep.add("certify", w.name(), "member:" + k, "", v ? 1.0 : 0.0);
    for (const auto& [k, v] : cr.estimates) rep.add("certify", w.name(), "estimate:" + k, "", v);
    for (const auto& it : cr.items) rep.add("certify", w.name(), "implication", it.name, it.holds ? 1.0 : 0.0);
    rep.summary()["cross_checks"].push_back(to_json(cr));
    return {{"weight", w.name()}, {"disagreements", cr.disagreements()}, {"membership", cr.membership}};
  }
  CertReport r;
  if (cls == "bp") {
    r = bp_constant(w, p, fam, o);
  } else if (cls == "bp-det") {
    r = bp_det_check(w, p, fam, o);
  } else if (cls == "nd") {
    r = nd_check(w, fam, o);
  } else if (cls == "ainf") {
    r = ainf_profile(w, fam, {}, o);
  } else if (cls == "a2inf") {
    r = a2inf_constant(w, fam, o);
  } else if (cls == "apinf") {
    r = apinf_constant(w, p, fam, o);
  } else if (cls == "rbm") {
    r = rbm_constant(w, fam, o);
  } else if (cls == "nc") {
    std::string mode = get<std::string>(ctx.cfg, "nc_mode");
    if (mode == "critical") {
      std::vector<Point> centers;
      for (const auto& q : fam.cubes()) centers.push_back(q.center);
      r = nc_constant(w, centers, o, ctx.aux_options());
    } else if (mode == "all") {
      r = nc_constant(w, fam, o);
    } else {
      throw ConfigError("--nc-mode: expected critical or all, got '" + mode + "'");
    }
  } else {
    throw ConfigError("--class: unknown class '" + cls + "'");
  }
  rep.add_cert("certify", r);
  return {{"weight", w.name()}, {"class", cls}, {"pass", r.pass}, {"constant_estimate", nullable(r.constant_estimate)}};
}

json run_aux(Context& ctx, RunReport& rep, bool distances) {
  MatrixWeight w = resolve_weight(ctx.cfg.at("weight"));
  Grid3 g = resolve_grid(ctx.cfg);
  AuxKind kind = resolve_kind(get<std::string>(ctx.cfg, "kind"));
  Vec e;
  if (kind == AuxKind::directional) {
    auto ev = get<std::vector<double>>(ctx.cfg, "e");
    e = Vec::Map(ev.data(), static_cast<int>(ev.size()));
  }
  ctx.log(std::string("aux field ") + aux_kind_name(kind) + " for '" + w.name() + "' on N = " + std::to_string(g.N));
  AuxField f = aux_field(w, g, kind, ctx.aux_options(), ctx.par, e);
  std::string tag = aux_kind_name(kind);
  json summary = {{"weight", w.name()}, {"kind", tag}, {"N", g.N}, {"L", g.L}};
  if (!distances) {
    ctx.save_field("aux_" + tag + ".bin", f);
    for (std::size_t p = 0; p < g.size(); ++p) rep.add("aux", w.name(), "m_" + tag, format_point(g.node(p)), f[p]);
    auto sv = slow_variation_check(f, 10000, get<std::uint64_t>(ctx.cfg, "seed"));
    summary["min"] = *std::min_element(f.values.begin(), f.values.end());
    summary["max"] = f.max();
    summary["slow_variation"] = {{"c_a", sv.c_a}, {"k0", sv.k0}, {"c_c", sv.c_c}, {"pairs", sv.pairs}};
    return summary;
  }
  std::size_t source = resolve_node(ctx.cfg, "pole", g);
  std::string norm = get<std::string>(ctx.cfg, "norm");
  if (norm != "l2" && norm != "linf") throw ConfigError("--norm: expected l2 or linf");
  DistanceField d = agmon_field(f, source, norm == "l2" ? PathNorm::l2 : PathNorm::linf);
  ctx.save_field("agmon_" + tag + ".bin", d);
  for (std::size_t p = 0; p < g.size(); ++p) rep.add("agmon", w.name(), "d_" + tag, format_point(g.node(p)), d[p]);
  summary["source"] = format_point(g.node(source));
  summary["norm"] = norm;
  summary["max"] = *std::max_element(d.values.begin(), d.values.end());
  return summary;
}

json run_green(Context& ctx, RunReport& rep) {
  MatrixWeight w = resolve_weight(ctx.cfg.at("weight"));
  Grid3 g = resolve_grid(ctx.cfg);
  std::size_t pole = resolve_node(ctx.cfg, "pole", g);
  ctx.log("green field for '" + w.name() + "' on N = " + std::to_string(g.N));
  auto op = assemble(w, g, {}, ctx.par);
  GreenField gf = green_field(op, pole, 1e-10, ctx.par);
  ctx.save_field("green.bin", gf);
  // slice: the plane through the pole orthogonal to the third axis
  int k0 = g.ijk(pole)[2];
  for (int j = 0; j < g.N; ++j)
    for (int i = 0; i < g.N; ++i) {
      std::size_t p = g.index(i, j, k0);
      for (int a = 0; a < gf.d; ++a)
        for (int b = 0; b < gf.d; ++b)
          rep.add("green", w.name(), "G" + std::to_string(a) + std::to_string(b), format_point(g.node(p)), gf.at(p, a, b));
    }
  return {{"weight", w.name()}, {"N", g.N}, {"L", g.L}, {"pole", format_point(g.node(pole))}, {"residual", gf.residual}};
}

json fit_json(const EnvelopeFit& f) {
  return {{"eps_hat", f.eps_hat}, {"c_hat", f.c_hat}, {"r2", f.r2}, {"sigma", f.sigma},
          {"below_fraction", f.below_fraction}, {"samples", f.samples.size()},
          {"min_separation", f.min_separation}, {"max_separation", f.max_separation}};
}

json run_decay(Context& ctx, RunReport& rep) {
  MatrixWeight w = resolve_weight(ctx.cfg.at("weight"));
  Grid3 g = resolve_grid(ctx.cfg);
  std::size_t pole = resolve_node(ctx.cfg, "pole", g);
  double p = get<double>(ctx.cfg, "decay_p");
  PathNorm norm = get<std::string>(ctx.cfg, "norm") == "linf" ? PathNorm::linf : PathNorm::l2;
  AuxOptions aux = ctx.aux_options();
  ctx.log("decay envelopes for '" + w.name() + "' on N = " + std::to_string(g.N));
  AuxField lower = aux_field(w, g, AuxKind::lower, aux, ctx.par);
  ctx.tick();
  AuxField upper = aux_field(w, g, AuxKind::upper, aux, ctx.par);
  ctx.tick();
  GreenField gv = green_field(assemble(w, g, {}, ctx.par), pole, 1e-10, ctx.par);
  ctx.tick();
  GreenField g0 = green_field(assemble(MatrixWeight::zero(w.n(), w.d()), g, {}, ctx.par), pole, 1e-10, ctx.par);
  ctx.tick();
  EnvelopeFit up = envelope_fit(gv, agmon_field(lower, pole, norm), Projector::norm);
  Vec e = Vec::Zero(w.d());
  if (ctx.cfg.at("e").is_null()) {
    e(w.d() - 1) = 1;
  } else {
    auto ev = get<std::vector<double>>(ctx.cfg, "e");
    if (static_cast<int>(ev.size()) != w.d()) throw ConfigError("--e: expected " + std::to_string(w.d()) + " components");
    e = Vec::Map(ev.data(), w.d());
  }
  EnvelopeFit low = envelope_fit(gv, agmon_field(upper, pole, norm), Projector::quadratic_form, e);
  json small_json = {{"p", p}, {"q", small_scale_q(p)}, {"alpha", 2 - 3 / small_scale_q(p)}};
  try {
    SmallScaleFit small = small_scale_fit(gv, g0, upper, p);
    small_json.update({{"slope", small.slope}, {"c_hat", small.c_hat}, {"bound_fraction", small.bound_fraction},
                       {"samples", small.samples}});
    rep.add("decay", w.name(), "small:slope", "", small.slope);
    rep.add("decay", w.name(), "small:alpha", "", small.alpha);
    rep.add("decay", w.name(), "small:bound_fraction", "", small.bound_fraction);
  } catch (const InsufficientSamples& e) {
    small_json["error"] = e.what();
  }
  for (const auto& [name, fit] : {std::pair{"upper", &up}, std::pair{"lower", &low}}) {
    for (const auto& s : fit->samples)
      rep.add("decay", w.name(), std::string(name) + ":sample", format_double(s.separation) + " " + format_double(s.distance),
              s.value);
    rep.add("decay", w.name(), std::string(name) + ":eps_hat", "", fit->eps_hat);
    rep.add("decay", w.name(), std::string(name) + ":r2", "", fit->r2);
  }
  return {{"weight", w.name()}, {"N", g.N},           {"L", g.L},
          {"upper", fit_json(up)}, {"lower", fit_json(low)}, {"small_scale", small_json}};
}

json run_fp(Context& ctx, RunReport& rep) {
  MatrixWeight w = resolve_weight(ctx.cfg.at("weight"));
  Grid3 g = resolve_grid(ctx.cfg);
  std::string form_name = get<std::string>(ctx.cfg, "form");
  FpForm form;
  AuxField aux;
  if (form_name == "lower") {
    form = FpForm::lower;
    aux = aux_field(w, g, AuxKind::lower, ctx.aux_options(), ctx.par);
  } else if (form_name == "norm") {
    form = FpForm::norm;
    aux = aux_field(MatrixWeight::norm_diag(w), g, AuxKind::lower, ctx.aux_options(), ctx.par);
  } else if (form_name == "upper") {
    form = FpForm::upper;
    aux = aux_field(w, g, AuxKind::upper, ctx.aux_options(), ctx.par);
  } else {
    throw ConfigError("--form: expected lower, norm or upper, got '" + form_name + "'");
  }
  ctx.log("Fefferman-Phong " + form_name + " form for '" + w.name() + "'");
  auto lib = test_field_library(g, w.d());
  std::vector<FpResult> res(lib.size());
  ctx.par.for_each(lib.size(), [&](std::size_t i) { res[i] = fp_ratio(w, lib[i], aux, form); });
  double worst = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    std::string id = "field " + std::to_string(i);
    rep.add("fp", w.name(), form_name + ":lhs", id, res[i].lhs);
    rep.add("fp", w.name(), form_name + ":rhs", id, res[i].rhs);
    rep.add("fp", w.name(), form_name + ":ratio", id, res[i].ratio);
    worst = std::max(worst, res[i].ratio);
  }
  return {{"weight", w.name()}, {"form", form_name}, {"N", g.N}, {"L", g.L}, {"fields", lib.size()}, {"max_ratio", worst}};
}

json run_poincare(Context& ctx, RunReport& rep) {
  MatrixWeight w = resolve_weight(ctx.cfg.at("weight"));
  CubeFamily fam = ctx.family(w.n());
  QuadratureRule rule = quadrature_from_json(ctx.cfg.at("quadrature"));
  int d = w.d(), n = w.n();
  std::vector<std::pair<std::string, TestFunction>> fns;
  fns.push_back({"coordinates", {d,
                                 [d](const Point& x) {
                                   Vec v(d);
                                   for (int k = 0; k < d; ++k) v(k) = x(k % x.size());
                                   return v;
                                 },
                                 [d, n](const Point&) {
                                   Mat g = Mat::Zero(d, n);
                                   for (int k = 0; k < d; ++k) g(k, k % n) = 1;
                                   return g;
                                 }}});
  fns.push_back({"waves", {d,
                           [d](const Point& x) {
                             Vec v(d);
                             for (int k = 0; k < d; ++k) v(k) = std::sin((k + 1) * x(0) + x(x.size() - 1));
                             return v;
                           },
                           [d, n](const Point& x) {
                             Mat g = Mat::Zero(d, n);
                             for (int k = 0; k < d; ++k) {
                               double c = std::cos((k + 1) * x(0) + x(n - 1));
                               g(k, 0) += (k + 1) * c;
                               g(k, n - 1) += c;
                             }
                             return g;
                           }}});
  auto cubes = fam.cubes();
  ctx.log("Poincare ratios for '" + w.name() + "' on " + std::to_string(cubes.size()) + " cubes");
  std::vector<PoincareResult> res(cubes.size() * fns.size());
  ctx.par.for_each(res.size(), [&](std::size_t i) {
    res[i] = poincare_ratio(w, cubes[i / fns.size()], fns[i % fns.size()].second, 4, rule);
  });
  double worst = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const Cube& q = cubes[i / fns.size()];
    rep.add("poincare", w.name(), fns[i % fns.size()].first, format_point(q.center) + " r=" + format_double(q.r), res[i].ratio);
    worst = std::max(worst, res[i].ratio);
  }
  return {{"weight", w.name()}, {"cubes", cubes.size()}, {"max_ratio", worst}};
}

json run_counterexample(Context& ctx, RunReport& rep) {
  json out = json::object();
  AuxOptions aux = ctx.aux_options();
  if (get<bool>(ctx.cfg, "fp")) {
    auto radii = get<std::vector<double>>(ctx.cfg, "R");
    ctx.log("Appendix-A Fefferman-Phong failure");
    for (bool control : {false, true}) {
      auto tab = appendix_a_fp_failure(radii, control, aux, ctx.par);
      std::string tag = control ? "fp_control" : "fp";
      for (const auto& r : tab.rows) {
        std::string x = format_double(r.radius);
        rep.add("counterexample", control ? "identity" : "appendix_a", tag + ":lhs", x, r.lhs);
        rep.add("counterexample", control ? "identity" : "appendix_a", tag + ":rhs", x, r.rhs);
        rep.add("counterexample", control ? "identity" : "appendix_a", tag + ":ratio", x, r.ratio);
      }
      rep.add("counterexample", control ? "identity" : "appendix_a", tag + ":slope", "", tab.slope);
      out[tag] = {{"radii", radii}, {"slope", tab.slope}};
      ctx.tick();
    }
  }
  if (get<bool>(ctx.cfg, "nc")) {
    auto ms = get<std::vector<double>>(ctx.cfg, "ms");
    ctx.log("Appendix-A NC decay");
    MatrixWeight w = catalog::appendix_a();
    CertOptions o = ctx.cert_options();
    auto cubes = appendix_a_sequence(w.n(), ms, aux);
    std::vector<double> values;
    for (std::size_t i = 0; i < cubes.size(); ++i) {
      double v = nc_cube(w, cubes[i], o).value;
      values.push_back(v);
      rep.add("counterexample", w.name(), "nc_witness", format_double(ms[i]), v);
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < values.size(); ++i) decreasing = decreasing && values[i] < values[i - 1];
    out["nc"] = {{"m", ms}, {"witness", values}, {"strictly_decreasing", decreasing}};
  }
  return out;
}

std::vector<std::size_t> probe_nodes(const Grid3& g, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5 * g.L, 0.5 * g.L);
  std::vector<std::size_t> out;
  while (static_cast<int>(out.size()) < count) {
    Point x(3);
    for (int a = 0; a < 3; ++a) x(a) = u(rng);
    std::size_t node = g.nearest(x);
    if (std::find(out.begin(), out.end(), node) == out.end()) out.push_back(node);
  }
  return out;
}

json run_landscape(Context& ctx, RunReport& rep) {
  MatrixWeight w = resolve_weight(ctx.cfg.at("weight"));
  Grid3 g = resolve_grid(ctx.cfg);
  auto probes = probe_nodes(g, get<int>(ctx.cfg, "probes"), get<std::uint64_t>(ctx.cfg, "seed"));
  ctx.log("landscape for '" + w.name() + "' at " + std::to_string(probes.size()) + " probes");
  auto op = assemble(w, g, {}, ctx.par);
  double c1 = INFINITY, c2 = 0;
  for (std::size_t x0 : probes) {
    LandscapeValue v = landscape(op, w, x0, ctx.aux_options(), ctx.par);
    std::string x = format_point(g.node(x0));
    rep.add("landscape", w.name(), "u", x, v.u);
    rep.add("landscape", w.name(), "m_upper^-2", x, v.upper_inv_sq);
    rep.add("landscape", w.name(), "m_lower^-2", x, v.lower_inv_sq);
    c1 = std::min(c1, v.u / v.upper_inv_sq);
    c2 = std::max(c2, v.u / v.lower_inv_sq);
    ctx.tick();
  }
  return {{"weight", w.name()}, {"N", g.N}, {"L", g.L}, {"c1", c1}, {"c2", c2}};
}

json run_resolvent(Context& ctx, RunReport& rep, const MatrixWeight& w, const Grid3& g) {
  std::size_t pole = g.nearest(Point::Zero(3));
  std::vector<std::size_t> xs;
  for (std::size_t p = 0; p < g.size(); p += g.size() / 7) xs.push_back(p);
  auto chk = resolvent_identity_check(w, g, pole, xs, ctx.par);
  for (std::size_t i = 0; i < xs.size(); ++i)
    rep.add("resolvent", w.name(), "relative_error", format_point(g.node(xs[i])), chk.errors[i]);
  return {{"weight", w.name()}, {"N", g.N}, {"max_relative_error", chk.max_relative_error}};
}

json run_jensen(Context& ctx, RunReport& rep, int instances) {
  std::mt19937_64 rng(get<std::uint64_t>(ctx.cfg, "seed"));
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.1, 1);
  int jensen_bad = 0, hadamard_bad = 0;
  for (int t = 0; t < instances; ++t) {
    int d = 2 + t % 3;
    auto random_psd = [&] {
      Mat b(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) b(i, j) = gauss(rng);
      return SymMat::from(b * b.transpose() + 1e-3 * Mat::Identity(d, d));
    };
    std::vector<SymMat> mats;
    std::vector<double> wts;
    for (int k = 0; k < 4; ++k) {
      mats.push_back(random_psd());
      wts.push_back(unif(rng));
    }
    jensen_bad += !check_matrix_jensen(mats, wts, 1e-12).pass;
    Mat g(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g(i, j) = gauss(rng);
    Mat basis = Eigen::HouseholderQR<Mat>(g).householderQ();
    hadamard_bad += !check_hadamard(mats[0], basis).pass;
  }
  rep.add("jensen", "random_psd", "jensen_violations", "", jensen_bad);
  rep.add("jensen", "random_psd", "hadamard_violations", "", hadamard_bad);
  return {{"instances", instances}, {"jensen_violations", jensen_bad}, {"hadamard_violations", hadamard_bad}};
}

// The acceptance catalog end-to-end; each stage writes its own CSV/JSON pair.
json run_all(Context& ctx) {
  bool small = get<std::string>(ctx.cfg, "size") == "small";
  json base = ctx.cfg;
  json summary = json::object();
  auto stage = [&](const std::string& name, double budget, json overrides, auto&& body) {
    ctx.cfg = base;
    for (auto& [k, v] : overrides.items()) ctx.cfg[k] = v;
    ctx.begin(name, budget);
    RunReport rep(ctx.cfg);
    json s = body(rep);
    rep.set("summary", s);
    ctx.save(rep, name);
    ctx.end();
    summary[name] = s;
  };
  int grid_n = small ? 17 : 48;
  stage("certify", small ? 300 : 1800, json::object(), [&](RunReport& rep) {
    json s = json::array();
    for (const auto& w : catalog::all()) {
      ctx.cfg["weight"] = w.name();
      ctx.cfg["class"] = "cross";
      s.push_back(run_certify(ctx, rep));
      ctx.cfg["class"] = "nc";
      s.push_back(run_certify(ctx, rep));
      ctx.tick();
    }
    return s;
  });
  stage("counterexample", 300, json::object(), [&](RunReport& rep) { return run_counterexample(ctx, rep); });
  stage("aux", 600, {{"weight", "diag_x2_x4"}, {"grid", {grid_n, 2.0}}}, [&](RunReport& rep) {
    json s = json::array();
    for (const char* k : {"lower", "upper"}) {
      ctx.cfg["kind"] = k;
      s.push_back(run_aux(ctx, rep, false));
    }
    return s;
  });
  stage("agmon", 600, {{"weight", "diag_x2_x4"}, {"grid", {grid_n, 2.0}}}, [&](RunReport& rep) {
    json s = json::array();
    for (const char* k : {"lower", "upper"}) {
      ctx.cfg["kind"] = k;
      s.push_back(run_aux(ctx, rep, true));
    }
    return s;
  });
  stage("green", 600, {{"weight", json{{"kind", "constant"}, {"parameters", {{"matrix", {{0.0}}}}}}}, {"grid", {grid_n, 2.0}}},
        [&](RunReport& rep) { return run_green(ctx, rep); });
  stage("decay", 900, {{"weight", "diag_x2_x4"}, {"grid", {small ? 25 : 48, small ? 1.0 : 2.0}}},
        [&](RunReport& rep) { return run_decay(ctx, rep); });
  stage("fp", 600, {{"weight", "diag_ordered"}, {"grid", {small ? 13 : 25, 1.5}}}, [&](RunReport& rep) {
    json s = json::array();
    // the norm form runs adaptive quadrature of |V| at every node; it stays a separate subcommand
    for (const char* f : {"lower", "upper"}) {
      ctx.cfg["form"] = f;
      s.push_back(run_fp(ctx, rep));
    }
    return s;
  });
  stage("poincare", 600, json::object(), [&](RunReport& rep) {
    json s = json::array();
    for (const auto& w : catalog::all()) {
      ctx.cfg["weight"] = w.name();
      s.push_back(run_poincare(ctx, rep));
    }
    return s;
  });
  stage("landscape", 900, {{"weight", "diag_x2_x4"}, {"grid", {small ? 17 : 32, 3.0}}},
        [&](RunReport& rep) { return run_landscape(ctx, rep); });
  stage("resolvent", 600, json::object(), [&](RunReport& rep) {
    json s = json::array();
    Grid3 g(1, small ? 9 : 13);
    for (const auto& w : catalog::all()) {
      s.push_back(run_resolvent(ctx, rep, w, g));
      ctx.tick();
    }
    return s;
  });
  stage("jensen", 120, json::object(), [&](RunReport& rep) { return run_jensen(ctx, rep, small ? 1000 : 10000); });
  ctx.cfg = base;
  return summary;
}

// ---- command line ------------------------------------------------------------------------

struct FlagTable {
  std::map<std::string, std::string> raw;

  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    return app->add_option_function<std::string>(flag, [this, key](const std::string& v) { raw[key] = v; }, help);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agmon: matrix-weight classes, auxiliary functions, Agmon distances and Green-function experiments"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  FlagTable flags;
  std::string config_path, out_dir = "agmon_out";
  bool quiet = false;
  app.add_option("--config", config_path, "JSON experiment config (flags override it)");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--quiet", quiet, "suppress progress messages");
  flags.add(&app, "--threads", "threads", "worker threads (0: logical cores)");
  flags.add(&app, "--seed", "seed", "seed for families, directions and probes");
  flags.add(&app, "--budget", "budget", "per-stage time budget in seconds");
  flags.add(&app, "--size", "size", "small or default");

  auto weight_flag = [&](CLI::App* s) { flags.add(s, "--weight", "weight", "catalog name or weight JSON file"); };
  auto grid_flag = [&](CLI::App* s) { flags.add(s, "--grid", "grid", "N,L: nodes per axis and box half-width"); };

  auto* certify = app.add_subcommand("certify", "per-cube class certificates");
  weight_flag(certify);
  flags.add(certify, "--class", "class", "bp, bp-det, nd, ainf, a2inf, apinf, nc, rbm or cross");
  flags.add(certify, "--p", "p", "exponent p");
  flags.add(certify, "--family", "family", "cube family JSON file");
  flags.add(certify, "--quadrature", "quadrature", "quadrature JSON file");
  flags.add(certify, "--refinements", "refinements", "family refinements");
  flags.add(certify, "--directions", "directions", "random directions per cube");
  flags.add(certify, "--nc-mode", "nc_mode", "critical or all");

  auto* aux = app.add_subcommand("aux", "auxiliary-function field");
  weight_flag(aux);
  grid_flag(aux);
  flags.add(aux, "--kind", "kind", "lower, upper, directional or scalar");
  flags.add(aux, "--e", "e", "direction for the directional kind");

  auto* agmon_cmd = app.add_subcommand("agmon", "Agmon distance field");
  weight_flag(agmon_cmd);
  grid_flag(agmon_cmd);
  flags.add(agmon_cmd, "--kind", "kind", "lower or upper");
  flags.add(agmon_cmd, "--source", "pole", "source node i,j,k");
  flags.add(agmon_cmd, "--norm", "norm", "l2 or linf step lengths");

  auto* green = app.add_subcommand("green", "discrete fundamental matrix");
  weight_flag(green);
  grid_flag(green);
  flags.add(green, "--pole", "pole", "pole node i,j,k");

  auto* decay = app.add_subcommand("decay", "decay-envelope fits");
  weight_flag(decay);
  grid_flag(decay);
  flags.add(decay, "--pole", "pole", "pole node i,j,k");
  flags.add(decay, "--p", "decay_p", "B_p exponent for the small-scale bound");
  flags.add(decay, "--e", "e", "direction for the lower envelope");
  flags.add(decay, "--norm", "norm", "l2 or linf step lengths");

  auto* fp = app.add_subcommand("fp", "Fefferman-Phong ratios");
  weight_flag(fp);
  grid_flag(fp);
  flags.add(fp, "--form", "form", "lower, norm or upper");

  auto* poincare = app.add_subcommand("poincare", "matrix Poincare ratios");
  weight_flag(poincare);
  flags.add(poincare, "--family", "family", "cube family JSON file");

  auto* counter = app.add_subcommand("counterexample", "Appendix-A experiments");
  bool only_fp = false, only_nc = false;
  counter->add_flag("--fp", only_fp, "Fefferman-Phong failure only");
  counter->add_flag("--nc", only_nc, "NC decay only");
  flags.add(counter, "--R", "R", "radii for the Fefferman-Phong failure");
  flags.add(counter, "--m", "ms", "sequence indices for the NC decay");

  auto* land = app.add_subcommand("landscape", "landscape function at probe points");
  weight_flag(land);
  grid_flag(land);
  flags.add(land, "--probes", "probes", "number of probe points");

  auto* all = app.add_subcommand("all", "acceptance catalog end-to-end");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  auto chosen = app.get_subcommands();
  if (chosen.empty()) {
    std::cerr << app.help();
    return 2;
  }
  CLI::App* cmd = chosen[0];
  std::string name = cmd->get_name();

  try {
    json file = config_path.empty() ? json::object() : read_json_file(config_path, "--config");
    if (!file.is_object()) throw ConfigError("--config: expected a JSON object");
    std::string size = flags.raw.count("size") ? flags.raw["size"] : file.value("size", std::string("default"));
    if (size != "small" && size != "default") throw ConfigError("--size: expected small or default, got '" + size + "'");
    json cfg = defaults(size);
    for (auto& [k, v] : file.items()) cfg[k] = v;
    if (cmd == all || cmd == counter) {
      if (only_fp || only_nc) {
        cfg["fp"] = only_fp;
        cfg["nc"] = only_nc;
      }
    }
    if (name == "decay" || name == "landscape" || name == "aux" || name == "agmon")
      if (!file.contains("weight") && !flags.raw.count("weight")) cfg["weight"] = "diag_x2_x4";
    if (name == "fp" && !file.contains("weight") && !flags.raw.count("weight")) cfg["weight"] = "diag_ordered";
    for (const auto& [k, v] : flags.raw) apply_flag(cfg, k, v);
    cfg["command"] = name;

    Context ctx;
    ctx.cfg = cfg;
    ctx.out = out_dir;
    ctx.quiet = quiet;
    ctx.par = Parallelism(static_cast<unsigned>(get<int>(cfg, "threads")));
    fs::create_directories(ctx.out);

    json summary;
    if (cmd == all) {
      summary = run_all(ctx);
      RunReport rep(cfg);
      rep.set("stages", summary);
      json t = json::object();
      for (const auto& [k, v] : ctx.timings) t[k] = v;
      rep.set("timings", t);
      ctx.save(rep, "all");
    } else {
      ctx.begin(name, INFINITY);
      RunReport rep(cfg);
      if (cmd == certify) summary = run_certify(ctx, rep);
      if (cmd == aux) summary = run_aux(ctx, rep, false);
      if (cmd == agmon_cmd) summary = run_aux(ctx, rep, true);
      if (cmd == green) summary = run_green(ctx, rep);
      if (cmd == decay) summary = run_decay(ctx, rep);
      if (cmd == fp) summary = run_fp(ctx, rep);
      if (cmd == poincare) summary = run_poincare(ctx, rep);
      if (cmd == counter) summary = run_counterexample(ctx, rep);
      if (cmd == land) summary = run_landscape(ctx, rep);
      rep.set("summary", summary);
      ctx.save(rep, name);
      ctx.end();
    }
    write_manifest(ctx);
    if (!quiet) std::cout << summary.dump(2) << std::endl;
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "agmon " << name << ": configuration error: " << e.what() << std::endl;
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "agmon " << name << ": configuration error: " << e.what() << std::endl;
    return 2;
  } catch (const Error& e) {
    std::cerr << "agmon " << name << ": numerical failure: " << e.what() << std::endl;
    return 3;
  }
}
