#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "fixtures.hpp"
#include "metasurf/error.hpp"
#include "metasurf/io.hpp"

using namespace metasurf;
using metasurf::testing::nm;

namespace {

const char* kMinimal = R"(# minimal scene
[simulation]
lambda0_nm = 660

[atoms]
shape = circle
radius_nm = 150
atom = 0 1 1 0 0

[exit_line]
endpoints_nm = 1000 -500 1000 500

[cost]
kind = point_intensity
point_nm = 20000 0
)";

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Io, MinimalConfigDefaults) {
  const SceneConfig c = parse_config(kMinimal);
  EXPECT_EQ(c.scene.lambda0, 660 * nm);
  ASSERT_EQ(c.scene.atoms.size(), 1u);
  EXPECT_DOUBLE_EQ(std::get<Circle>(c.scene.atoms[0].shape).radius, 150 * nm);
  EXPECT_EQ(c.cost, CostKind::PointIntensity);
  ASSERT_TRUE(c.point.has_value());
  EXPECT_DOUBLE_EQ(c.point->x(), 20000 * nm);
  EXPECT_EQ(c.active.size(), 1u);
  EXPECT_EQ(c.active.entries[0].second, Param::Theta);
  EXPECT_EQ(c.cost_spec().point, *c.point);
}

TEST(Io, StrictParsingReportsLines) {
  const std::string base = kMinimal;
  EXPECT_EQ(error_line(base + "[bogus]\n"), 16);
  EXPECT_EQ(error_line(base + "extra = 1\n"), 16);
  EXPECT_EQ(error_line(base + "kind = scalar_product_mag\n"), 16);
  EXPECT_EQ(error_line(base + "just text\n"), 16);
  std::string bad = base;
  bad.replace(bad.find("radius_nm = 150"), 15, "radius_nm = abc");
  EXPECT_EQ(error_line(bad), 7);
  bad = base;
  bad.replace(bad.find("atom = 0 1 1 0 0"), 16, "atom = 0 1 1 0");
  EXPECT_EQ(error_line(bad), 8);
  EXPECT_THROW(parse_config("[simulation]\nlambda0_nm = 660\n"), ConfigError);
}

TEST(Io, LatticeAndActiveSubsets) {
  const std::string text = R"([simulation]
lambda0_nm = 660
[atoms]
shape = rounded_rectangle
lx_nm = 660
ly_nm = 200
corner_radius_nm = 82.5
lattice_count = 4
lattice_pitch_nm = 726
lattice_start_nm = 0 -1089
lattice_theta = 0.5
[exit_line]
endpoints_nm = 1320 -2000 1320 2000
[cost]
kind = angle_between_fields
focal_point_nm = 24420 0
normalize_target = true
[active]
theta = true
yc = true
atoms = 1 3
)";
  const SceneConfig c = parse_config(text);
  ASSERT_EQ(c.scene.atoms.size(), 4u);
  EXPECT_NEAR(c.scene.atoms[3].params.yc, (-1089 + 3 * 726) * nm, 1e-18);
  EXPECT_EQ(c.scene.atoms[2].params.theta, 0.5);
  ASSERT_EQ(c.active.size(), 4u);
  EXPECT_EQ(c.active.entries[2], std::make_pair(3, Param::Theta));
  const CostSpec spec = c.cost_spec();
  EXPECT_NEAR(spec.target.norm2(), c.scene.exit_line.length(), 1e-9 * c.scene.exit_line.length());
}

TEST(Io, ShippedConfigsLoad) {
  const SceneConfig three = load_config(metasurf::testing::config_path("three_atom.cfg"));
  EXPECT_EQ(three.scene.atoms.size(), 3u);
  const SceneConfig focus = load_config(metasurf::testing::config_path("focus16.cfg"));
  EXPECT_EQ(focus.scene.atoms.size(), 16u);
  EXPECT_EQ(focus.active.size(), 16u);
  ASSERT_TRUE(focus.field_map.has_value());
  EXPECT_EQ(focus.field_map->nx, 170u);
  EXPECT_THROW(load_config("/nonexistent/scene.cfg"), Error);
}

TEST(Io, FieldMapBinaryRoundTrip) {
  FieldMap m;
  m.grid = {Vec2(-1e-6, 2e-7), Vec2(5e-8, 6e-8), 3, 2};
  m.lambda0 = 660 * nm;
  for (int i = 0; i < 6; ++i) m.values.push_back(CVec2(cplx(i, -0.5 * i), cplx(1e-300 * i, 3.25)));
  m.values[4].x() = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
  const std::string bytes = encode_field_map(m);
  EXPECT_EQ(bytes.substr(0, 4), "TEZF");
  EXPECT_EQ(bytes.size(), 4 + 4 + 32 + 8 + 8 + 6 * 32u);
  const FieldMap back = decode_field_map(bytes);
  EXPECT_EQ(encode_field_map(back), bytes);
  EXPECT_TRUE(back == m);

  const auto path = std::filesystem::temp_directory_path() / "metasurf_io_test.tezf";
  write_field_map_binary(path, m);
  EXPECT_EQ(encode_field_map(read_field_map_binary(path)), bytes);
  std::filesystem::remove(path);

  EXPECT_THROW(decode_field_map(bytes.substr(0, 20)), Error);
  std::string wrong = bytes;
  wrong[0] = 'X';
  EXPECT_THROW(decode_field_map(wrong), Error);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, -2.5e-300, 1.0 / 3.0, 6.02214076e23}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Io, WriteAtomicReplacesContents) {
  const auto path = std::filesystem::temp_directory_path() / "metasurf_atomic.txt";
  write_atomic(path, "first");
  write_atomic(path, "second");
  std::ifstream in(path);
  std::string s;
  std::getline(in, s);
  EXPECT_EQ(s, "second");
  std::filesystem::remove(path);
}

TEST(Io, DefaultGridCoversSceneWithMargin) {
  const SceneConfig c = metasurf::testing::three_atom_config(8);
  const FieldGrid g = default_grid(c.scene);
  EXPECT_LE(g.nx, 202u);
  EXPECT_LE(g.ny, 202u);
  EXPECT_LT(g.origin.x(), -330 * nm - 0.9 * c.scene.lambda0);
  EXPECT_GT(g.origin.x() + (g.nx - 1) * g.spacing.x(), 1320 * nm + 0.9 * c.scene.lambda0);
  EXPECT_EQ(g.points().size(), std::size_t(g.nx) * g.ny);
}

TEST(Io, CsvWritersHaveHeaders) {
  const SceneConfig c = metasurf::testing::three_atom_config(8);
  const std::string d = design_csv(c.scene);
  EXPECT_EQ(d.substr(0, d.find('\n')).find("theta") != std::string::npos, true);
  EXPECT_EQ(std::count(d.begin(), d.end(), '\n'), 4);
  DesignTrajectory t;
  IterationRecord r;
  r.cost = 0.25;
  r.gradient = {1.5};
  r.params = {c.scene.atoms[0].params, c.scene.atoms[1].params, c.scene.atoms[2].params};
  t.records.push_back(r);
  const std::string g = gradient_csv(t, c.active);
  EXPECT_EQ(std::count(g.begin(), g.end(), '\n'), 2);
  EXPECT_NE(trajectory_csv(t).find("0.25"), std::string::npos);
}
