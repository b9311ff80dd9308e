#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "agmon/agmon.hpp"

using namespace agmon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("agmon_test_report_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST(Report, CsvQuotesFieldsWithSeparators) {
  RunReport r;
  r.add("exp", "w,1", "say \"hi\"", "0 1 2", 0.5);
  r.add("exp", "plain", "q", "", 0.1);
  std::string csv = r.csv();
  std::istringstream lines(csv);
  std::string header, a, b;
  std::getline(lines, header);
  std::getline(lines, a);
  std::getline(lines, b);
  EXPECT_EQ(header, "experiment,weight,quantity,x,value");
  EXPECT_EQ(a, "exp,\"w,1\",\"say \"\"hi\"\"\",0 1 2,0.5");
  EXPECT_EQ(b, "exp,plain,q,,0.10000000000000001");
}

TEST(Report, DoublesRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Report, EmptyDocumentEchoesConfig) {
  json cfg = {{"seed", 7}, {"weight", "identity"}};
  RunReport r(cfg);
  json doc = r.document();
  EXPECT_EQ(doc["schema"], "agmon-report/1");
  EXPECT_EQ(doc["config"], cfg);
  EXPECT_TRUE(doc["results"].is_object());
  EXPECT_TRUE(doc["results"].empty());
}

TEST(Report, WriteProducesParsableFiles) {
  auto dir = scratch("write");
  RunReport r(json{{"seed", 1}});
  r.add("e", "w", "q", "x", 2.0);
  r.set("answer", 42);
  auto paths = r.write(dir / "nested", "run");
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(slurp(paths[0]), r.csv());
  json back = json::parse(slurp(paths[1]));
  EXPECT_EQ(back["results"]["answer"], 42);
  EXPECT_EQ(back["config"]["seed"], 1);
}

TEST(Report, CertificateRowsAndSummary) {
  CubeFamily fam;
  fam.generator = FamilyGenerator::dyadic;
  fam.r_min = 0.5;
  fam.count = 4;
  CertOptions o;
  o.refinements = 1;
  auto cert = bp_constant(catalog::identity(), 2, fam, o);
  RunReport r;
  r.add_cert("certify", cert);
  ASSERT_EQ(r.rows().size(), cert.cubes.size() + 2);
  EXPECT_EQ(r.rows().back().quantity, cert.class_name + ":pass");
  EXPECT_EQ(r.rows().back().value, 1.0);
  EXPECT_EQ(r.summary()["certificates"].size(), 1u);
}

TEST(Serialize, CatalogWeightsRoundTrip) {
  for (const auto& w : catalog::all()) {
    MatrixWeight back = weight_from_json(to_json(w));
    EXPECT_EQ(back.name(), w.name());
    EXPECT_EQ(back.d(), w.d());
    for (const Point& x : {make_point({0.3, -0.7, 1.1}), make_point({2.0, 0.5, -0.25})})
      EXPECT_LT((back.eval(x).matrix() - w.eval(x).matrix()).norm(), 1e-15 * (1 + w.eval(x).norm()));
  }
}

TEST(Serialize, RejectsMalformedWeights) {
  EXPECT_THROW(weight_from_json(json::array()), ConfigError);
  EXPECT_THROW(weight_from_json(json{{"name", "x"}}), ConfigError);
}

TEST(FieldIo, AuxAndDistanceRoundTrip) {
  auto dir = scratch("aux");
  Grid3 g(1.5, 9);
  AuxField f = aux_field(catalog::diag_ordered(), g, AuxKind::upper);
  DistanceField d = agmon_field(f, g.nearest(Point::Zero(3)), PathNorm::l2);
  write_field(dir / "aux.bin", f);
  write_field(dir / "dist.bin", d);

  FieldFile a = read_field(dir / "aux.bin");
  EXPECT_FALSE(a.green);
  EXPECT_EQ(a.grid.N, 9);
  EXPECT_EQ(a.grid.L, 1.5);
  EXPECT_EQ(a.kind, AuxKind::upper);
  EXPECT_EQ(a.payload, 0u);
  EXPECT_EQ(a.values, f.values);

  FieldFile b = read_field(dir / "dist.bin");
  EXPECT_EQ(b.payload, 1u);
  EXPECT_EQ(b.values, d.values);
  // header: magic, N, d, L, h, kind, payload
  EXPECT_EQ(fs::file_size(dir / "aux.bin"), 4 + 4 + 4 + 8 + 8 + 4 + 4 + 8 * g.size());
}

TEST(FieldIo, GreenRoundTrip) {
  auto dir = scratch("green");
  Grid3 g(1.0, 9);
  std::size_t pole = g.index(1, 2, 3);
  GreenField gf = green_field(assemble(catalog::diag_x2_x4(), g), pole);
  write_field(dir / "g.bin", gf);
  FieldFile r = read_field(dir / "g.bin");
  EXPECT_TRUE(r.green);
  EXPECT_EQ(r.d, 2);
  EXPECT_EQ(r.pole, pole);
  EXPECT_EQ(r.values, gf.blocks);
}

TEST(FieldIo, RejectsDamagedFiles) {
  auto dir = scratch("bad");
  Grid3 g(1.0, 9);
  AuxField f = aux_field(catalog::identity(), g, AuxKind::lower);
  write_field(dir / "ok.bin", f);
  std::string bytes = slurp(dir / "ok.bin");
  RunReport::write_text(dir / "short.bin", bytes.substr(0, bytes.size() - 3));
  RunReport::write_text(dir / "long.bin", bytes + "x");
  RunReport::write_text(dir / "magic.bin", "XXXX" + bytes.substr(4));
  EXPECT_THROW(read_field(dir / "short.bin"), ConfigError);
  EXPECT_THROW(read_field(dir / "long.bin"), ConfigError);
  EXPECT_THROW(read_field(dir / "magic.bin"), ConfigError);
  EXPECT_THROW(read_field(dir / "missing.bin"), ConfigError);
}

TEST(Determinism, ThreadCountDoesNotChangeFields) {
  Grid3 g(2.0, 9);
  auto one = aux_field(catalog::appendix_a(), g, AuxKind::lower, {}, Parallelism(1));
  auto four = aux_field(catalog::appendix_a(), g, AuxKind::lower, {}, Parallelism(4));
  EXPECT_EQ(one.values, four.values);
  auto op1 = assemble(catalog::diag_x2_x4(), g, {}, Parallelism(1));
  auto op4 = assemble(catalog::diag_x2_x4(), g, {}, Parallelism(4));
  auto g1 = green_field(op1, g.nearest(Point::Zero(3)), 1e-10, Parallelism(1));
  auto g4 = green_field(op4, g.nearest(Point::Zero(3)), 1e-10, Parallelism(4));
  EXPECT_EQ(g1.blocks, g4.blocks);
}
