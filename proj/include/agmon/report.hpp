#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "agmon/errors.hpp"
#include "agmon/serialize.hpp"

namespace agmon {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_point(const Point& x) {
  std::string s;
  for (int i = 0; i < x.size(); ++i) s += (i ? " " : "") + format_double(x(i));
  return s;
}

struct CsvRow {
  std::string experiment;
  std::string weight;
  std::string quantity;
  std::string x;
  double value = 0;
};

// One run's results: long-format CSV rows plus a JSON summary with the
// resolved configuration embedded.
class RunReport {
 public:
  explicit RunReport(json config = json::object()) : config_(std::move(config)) {}

  void add(const std::string& experiment, const std::string& weight, const std::string& quantity, const std::string& x,
           double value) {
    rows_.push_back({experiment, weight, quantity, x, value});
  }

  void add_cert(const std::string& experiment, const CertReport& r) {
    for (const auto& c : r.cubes)
      add(experiment, r.weight, r.class_name + ":cube", format_point(c.cube.center) + " r=" + format_double(c.cube.r),
          c.value);
    add(experiment, r.weight, r.class_name + ":estimate", "", r.constant_estimate);
    add(experiment, r.weight, r.class_name + ":pass", "", r.pass ? 1.0 : 0.0);
    summary_["certificates"].push_back(to_json(r));
  }

  void set(const std::string& key, json value) { summary_[key] = std::move(value); }
  json& summary() { return summary_; }
  const std::vector<CsvRow>& rows() const { return rows_; }

  std::string csv() const {
    std::string out = "experiment,weight,quantity,x,value\n";
    for (const auto& r : rows_)
      out += quote(r.experiment) + "," + quote(r.weight) + "," + quote(r.quantity) + "," + quote(r.x) + "," +
             format_double(r.value) + "\n";
    return out;
  }

  json document() const {
    json doc = {{"schema", "agmon-report/1"}, {"config", config_}, {"results", summary_}};
    if (!doc["results"].is_object()) doc["results"] = json::object();
    return doc;
  }

  // writes <stem>.csv and <stem>.json, returns the written paths
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir, const std::string& stem) const {
    std::filesystem::create_directories(dir);
    auto csv_path = dir / (stem + ".csv");
    auto json_path = dir / (stem + ".json");
    write_text(csv_path, csv());
    write_text(json_path, document().dump(2) + "\n");
    return {csv_path, json_path};
  }

  static void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("report: cannot write " + p.string());
    f << text;
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  json config_;
  json summary_ = json::object();
  std::vector<CsvRow> rows_;
};

}  // namespace agmon
