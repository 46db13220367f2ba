#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "metasurf/error.hpp"
#include "metasurf/solver.hpp"
#include "metasurf/verify.hpp"

using namespace metasurf;
using metasurf::testing::nm;

namespace {

double rel(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  return (a - b).norm() / b.norm();
}

LineCurrent random_current(std::size_t n, unsigned seed) {
  std::srand(seed);
  LineCurrent lc;
  for (std::size_t i = 0; i < n; ++i)
    lc.samples.push_back(CVec2(cplx(std::rand() / double(RAND_MAX) - 0.5, std::rand() / double(RAND_MAX)),
                               cplx(std::rand() / double(RAND_MAX), -0.3)));
  return lc;
}

}  // namespace

TEST(Solver, PlaneWaveIncidentField) {
  Scene s;
  const std::vector<Vec2> pts{Vec2::Zero(), Vec2(123 * nm, -40 * nm), Vec2(-2e-6, 5e-6)};
  const auto e = incident_field(PlaneWave{2.5}, s, pts);
  EXPECT_EQ(e[0], CVec2(0.0, 2.5));
  for (const auto& v : e) {
    EXPECT_EQ(v.x(), cplx(0.0));
    EXPECT_NEAR(std::abs(v.y()), 2.5, 1e-14);
  }
}

TEST(Solver, DipoleFieldReciprocity) {
  Scene s;
  const Vec2 a(100 * nm, 250 * nm), b(-1.7e-6, 0.4e-6);
  Dipole da, db;
  da.position = a;
  db.position = b;
  const cplx ab = incident_field(da, s, std::vector<Vec2>{b})[0].y();
  const cplx ba = incident_field(db, s, std::vector<Vec2>{a})[0].y();
  EXPECT_LT(std::abs(ab - ba), 1e-10 * std::abs(ab));
  EXPECT_THROW(incident_field(da, s, std::vector<Vec2>{a}), SingularityError);
}

TEST(Solver, EmptySceneReproducesIncidentField) {
  Scene s;
  s.exit_line = ExitLine::make(Vec2(1e-6, -1e-6), Vec2(1e-6, 1e-6), 16, s.lambda0);
  LinearSystem sys(s, build_mesh(s));
  EXPECT_EQ(sys.dimension(), 0u);
  const BoundarySolution sol = sys.solve(s.incident);
  const std::vector<Vec2> pts{Vec2(0, 0), Vec2(3e-7, -2e-7)};
  EXPECT_EQ(evaluate_E(sys, sol, pts), incident_field(s.incident, s, pts));
}

TEST(Solver, SystemDimensionIsTwicePanelCount) {
  const Scene s = metasurf::testing::circle_scene(200 * nm);
  LinearSystem sys(s, build_mesh(s));
  EXPECT_EQ(sys.dimension(), 2 * sys.mesh().panels.size());
}

TEST(Solver, LinearityZeroRhsAndReuse) {
  const SceneConfig cfg = metasurf::testing::three_atom_config(12);
  LinearSystem sys(cfg.scene, build_mesh(cfg.scene));
  reset_solver_counters();

  EXPECT_EQ(sys.solve(PlaneWave{0.0}).h.norm(), 0.0);

  const std::size_t n = cfg.scene.exit_line.size();
  const LineCurrent j1 = random_current(n, 1), j2 = random_current(n, 2);
  const cplx a(0.7, -1.2), b(-0.4, 2.0);
  LineCurrent mix;
  for (std::size_t i = 0; i < n; ++i) mix.samples.push_back(a * j1.samples[i] + b * j2.samples[i]);
  const BoundarySolution s1 = sys.solve(j1), s2 = sys.solve(j2), sm = sys.solve(mix);
  EXPECT_LT(rel(sm.h, a * s1.h + b * s2.h), 1e-12);
  EXPECT_LT(rel(sm.dh_dn_ext, a * s1.dh_dn_ext + b * s2.dh_dn_ext), 1e-12);

  const BoundarySolution again = sys.solve(j1);
  EXPECT_EQ(again.h, s1.h);
  EXPECT_EQ(again.dh_dn_ext, s1.dh_dn_ext);

  const SolverCounters c = solver_counters();
  EXPECT_EQ(c.assemblies, 0);
  EXPECT_EQ(c.forward_solves, 5);
}

TEST(Solver, ResidualAndConditioningOnThreeAtoms) {
  const SceneConfig cfg = metasurf::testing::three_atom_config(16);
  LinearSystem sys(cfg.scene, build_mesh(cfg.scene));
  const BoundarySolution sol = sys.solve(cfg.scene.incident);
  EXPECT_LT(sys.residual(sol), 1e-10);
  EXPECT_GT(sys.rcond(), 1e-8);
  EXPECT_TRUE(std::isfinite(sys.rcond()));
}

TEST(Solver, MismatchedMeshIsRejected) {
  const Scene s = metasurf::testing::circle_scene(150 * nm);
  LinearSystem a(s, build_mesh(s)), b(s, build_mesh(s));
  const BoundarySolution sol = a.solve(s.incident);
  EXPECT_THROW(b.residual(sol), Error);
  EXPECT_THROW(boundary_E(b.mesh(), s, sol), Error);
  EXPECT_THROW(evaluate_E(b, sol, std::vector<Vec2>{Vec2(1e-6, 0)}), Error);
}

TEST(Solver, InterfaceConditionOnNormalE) {
  const SceneConfig cfg = metasurf::testing::three_atom_config(12);
  LinearSystem sys(cfg.scene, build_mesh(cfg.scene));
  const BoundarySolution sol = sys.solve(cfg.scene.incident);
  const BoundaryTraces t = boundary_E(sys.mesh(), cfg.scene, sol);
  const double eps = cfg.scene.atoms[0].eps_r;
  EXPECT_LT((eps * t.en_int - t.en_ext).cwiseAbs().maxCoeff(), 1e-12 * t.en_ext.cwiseAbs().maxCoeff());
}

TEST(Solver, ConstantTraceHasNoNormalE) {
  const Scene s = metasurf::testing::circle_scene(200 * nm);
  LinearSystem sys(s, build_mesh(s));
  BoundarySolution sol = sys.solve(s.incident);
  sol.h.setConstant(cplx(0.3, -0.8));
  const BoundaryTraces t = boundary_E(sys.mesh(), s, sol);
  EXPECT_LT(t.en_ext.cwiseAbs().maxCoeff(), 1e-12 * std::abs(sol.h[0]) * s.k0() * phys::eta0);
}

TEST(Solver, CylinderFieldsMatchSeries) {
  const CylinderAudit a = cylinder_audit(200 * nm, 5.76, 660 * nm, 16);
  EXPECT_LT(a.exterior_error, 1e-2);
  EXPECT_LT(a.interior_error, 1e-2);
}

TEST(Solver, CylinderBoundaryTracesMatchSeries) {
  const double a = 200 * nm, eps = 5.76;
  const Scene s = metasurf::testing::circle_scene(a, eps, 16);
  LinearSystem sys(s, build_mesh(s));
  const BoundarySolution sol = sys.solve(s.incident);
  const BoundaryTraces t = boundary_E(sys.mesh(), s, sol);
  std::vector<Vec2> out, in;
  for (const auto& p : sys.mesh().panels) {
    out.push_back(p.point * (1 + 1e-9));
    in.push_back(p.point * (1 - 1e-9));
  }
  const auto eo = cylinder_series(a, eps, s.lambda0, 1.0, out);
  const auto ei = cylinder_series(a, eps, s.lambda0, 1.0, in);
  double den = 0, dn_ext = 0, dn_int = 0, dt = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& p = sys.mesh().panels[i];
    const cplx n_ext = p.normal.cast<cplx>().dot(eo[i]), n_int = p.normal.cast<cplx>().dot(ei[i]);
    const cplx tan = p.tangent.cast<cplx>().dot(eo[i]);
    dn_ext += std::norm(t.en_ext[i] - n_ext);
    dn_int += std::norm(t.en_int[i] - n_int);
    dt += std::norm(t.et[i] - tan);
    den += eo[i].squaredNorm();
  }
  EXPECT_LT(std::sqrt(dn_ext / den), 1e-2);
  EXPECT_LT(std::sqrt(dn_int / den), 1e-2);
  EXPECT_LT(std::sqrt(dt / den), 1e-2);
}

TEST(Solver, TransparentAtomDoesNotScatter) {
  const Scene s = metasurf::testing::circle_scene(200 * nm, 1.0);
  LinearSystem sys(s, build_mesh(s));
  const BoundarySolution sol = sys.solve(s.incident);
  const std::vector<Vec2> pts{Vec2(1e-6, 0.3e-6), Vec2(-0.5e-6, 2e-6)};
  const auto scat = evaluate_E(sys, sol, pts, Side::Exterior, false);
  for (const auto& v : scat) EXPECT_LT(v.norm(), 1e-8);
}
