#include <gtest/gtest.h>

#include <cmath>

#include "metasurf/error.hpp"
#include "metasurf/io.hpp"
#include "metasurf/optimize.hpp"
#include "metasurf/verify.hpp"

using namespace metasurf;

namespace {

constexpr double nm = 1e-9;

Scene toy_scene() {
  Scene s;
  s.panels_per_wavelength = 8;
  const RoundedRectangle r{660 * nm, 200 * nm, 82.5 * nm};
  s.atoms.push_back({r, {0.1, 1.0, 1.0, 0.0, -400 * nm}});
  s.atoms.push_back({r, {-0.2, 1.0, 1.0, 0.0, 400 * nm}});
  s.exit_line = ExitLine::make(Vec2(1320 * nm, -900 * nm), Vec2(1320 * nm, 900 * nm), 0, s.lambda0);
  return s;
}

CostSpec focus_spec(const Scene& s, CostKind kind = CostKind::AngleBetweenFields) {
  CostSpec c{kind, build_target_focus(std::vector<Vec2>{Vec2(15 * s.lambda0, 0)}, 1.0, s)};
  const double want = s.exit_line.length();
  const double scale = std::sqrt(want / c.target.norm2());
  for (auto& v : c.target.values) v *= scale;
  c.point = Vec2(15 * s.lambda0, 0);
  return c;
}

}  // namespace

TEST(Optimize, ParamScales) {
  EXPECT_EQ(param_scale(Param::Theta), 1.0);
  EXPECT_EQ(param_scale(Param::LambdaX), 1.0);
  EXPECT_DOUBLE_EQ(param_scale(Param::Xc), 100 * nm);
}

TEST(Optimize, OneFactorizationPerEvaluation) {
  const Scene s = toy_scene();
  const ActiveParams active = ActiveParams::uniform(2, {true, true, true, true, true});
  for (CostKind k : {CostKind::ScalarProductMag, CostKind::NormOfDifference, CostKind::AngleBetweenFields,
                     CostKind::SquaredNormDiff, CostKind::AngleBetweenSquares, CostKind::PointIntensity}) {
    const DesignEvaluation e = evaluate_design(s, focus_spec(s, k), active);
    const long sources = (k == CostKind::AngleBetweenFields || k == CostKind::AngleBetweenSquares) ? 2 : 1;
    EXPECT_EQ(e.diagnostics.counts.assemblies, 1) << cost_name(k);
    EXPECT_EQ(e.diagnostics.counts.factorizations, 1) << cost_name(k);
    EXPECT_EQ(e.diagnostics.counts.forward_solves, 1) << cost_name(k);
    EXPECT_EQ(e.diagnostics.counts.adjoint_solves, sources) << cost_name(k);
    EXPECT_EQ(e.gradient.values.size(), active.size());
  }
}

TEST(Optimize, StationaryStartStopsImmediately) {
  const Scene s = toy_scene();
  CostSpec spec{CostKind::NormOfDifference};
  spec.target = DesignPoint(s).sample(spec).line;
  const DesignResult r = run_design(s, spec, ActiveParams::uniform(2, {true, false, false, false, false}), {});
  ASSERT_EQ(r.trajectory.records.size(), 1u);
  EXPECT_EQ(r.trajectory.records[0].cost, 0.0);
  EXPECT_EQ(r.trajectory.termination, "zero gradient at start");
}

TEST(Optimize, MonotoneCountedAndBounded) {
  const Scene s = toy_scene();
  const CostSpec spec = focus_spec(s);
  const ActiveParams active = ActiveParams::uniform(2, {true, true, false, false, false});
  OptimizeConfig cfg;
  cfg.max_iterations = 5;
  cfg.lambda_min = 0.8;
  cfg.lambda_max = 1.2;
  const DesignResult r = run_design(s, spec, active, cfg);
  const auto& rec = r.trajectory.records;
  ASSERT_GE(rec.size(), 3u);
  for (std::size_t i = 1; i < rec.size(); ++i) {
    EXPECT_GT(rec[i].cost, rec[i - 1].cost);  // maximized cost
    EXPECT_EQ(rec[i].counts.assemblies, 1 + rec[i].backtracks);
    EXPECT_EQ(rec[i].counts.forward_solves, 1 + rec[i].backtracks);
    EXPECT_EQ(rec[i].counts.adjoint_solves, 2);
    for (const auto& p : rec[i].params) {
      EXPECT_GE(p.lambda_x, 0.8);
      EXPECT_LE(p.lambda_x, 1.2);
    }
  }
  EXPECT_EQ(rec[0].counts.adjoint_solves, 2);
}

TEST(Optimize, RerunIsByteIdentical) {
  const Scene s = toy_scene();
  const CostSpec spec = focus_spec(s);
  const ActiveParams active = ActiveParams::uniform(2, {true, false, false, false, true});
  OptimizeConfig cfg;
  cfg.max_iterations = 3;
  const DesignResult a = run_design(s, spec, active, cfg);
  const DesignResult b = run_design(s, spec, active, cfg);
  EXPECT_EQ(trajectory_csv(a.trajectory), trajectory_csv(b.trajectory));
  EXPECT_EQ(gradient_csv(a.trajectory, active), gradient_csv(b.trajectory, active));
}

TEST(Optimize, FiniteDifferenceGradientGivesTheSameTrajectory) {
  const Scene s = toy_scene();
  const CostSpec spec = focus_spec(s);
  const ActiveParams active = ActiveParams::uniform(2, {true, false, false, false, false});
  OptimizeConfig cfg;
  cfg.max_iterations = 3;
  const DesignResult adj = run_design(s, spec, active, cfg);
  const DesignResult fd = run_design(s, spec, active, cfg, {}, [&](const Scene& sc) {
    return fd_gradient(sc, spec, active).gradient;
  });
  ASSERT_EQ(adj.trajectory.records.size(), fd.trajectory.records.size());
  for (std::size_t i = 0; i < adj.trajectory.records.size(); ++i) {
    EXPECT_NEAR(adj.trajectory.records[i].cost, fd.trajectory.records[i].cost,
                1e-4 * std::abs(adj.trajectory.records[i].cost));
    for (int a = 0; a < 2; ++a)
      EXPECT_NEAR(adj.trajectory.records[i].params[a].theta, fd.trajectory.records[i].params[a].theta, 1e-4);
  }
}

TEST(Optimize, RejectsBadConfiguration) {
  const Scene s = toy_scene();
  OptimizeConfig cfg;
  cfg.lambda_min = 2.0;
  cfg.lambda_max = 1.0;
  const std::array<bool, kParamCount> theta{true, false, false, false, false};
  EXPECT_THROW(run_design(s, focus_spec(s), ActiveParams::uniform(2, theta), cfg), Error);
  EXPECT_THROW(run_design(s, focus_spec(s), ActiveParams::uniform(3, theta), {}), Error);
}

TEST(Optimize, EvaluationIsDeterministicAndFinite) {
  const Scene s = toy_scene();
  const ActiveParams active = ActiveParams::uniform(2, {true, true, true, true, true});
  const DesignEvaluation a = evaluate_design(s, focus_spec(s), active);
  const DesignEvaluation b = evaluate_design(s, focus_spec(s), active);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.gradient.values, b.gradient.values);
  for (double v : a.gradient.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Optimize, AdjointStageIsCheapNextToAssembly) {
  // 32 atoms at a coarse mesh: the adjoint solves reuse the factorization.
  Scene s;
  s.panels_per_wavelength = 6;
  const RoundedRectangle r{660 * nm, 200 * nm, 82.5 * nm};
  for (int i = 0; i < 32; ++i) s.atoms.push_back({r, {0.0, 1.0, 1.0, 0.0, (i - 15.5) * 726 * nm}});
  s.exit_line = ExitLine::make(Vec2(1320 * nm, -12e-6), Vec2(1320 * nm, 12e-6), 0, s.lambda0);
  const ActiveParams active = ActiveParams::uniform(32, {true, false, false, false, false});
  const DesignEvaluation e = evaluate_design(s, focus_spec(s), active);
  const Diagnostics& d = e.diagnostics;
  EXPECT_LT(d.adjoint_seconds, 0.3 * (d.assemble_seconds + d.forward_seconds))
      << d.adjoint_seconds << " vs " << d.assemble_seconds << " + " << d.forward_seconds;
}
