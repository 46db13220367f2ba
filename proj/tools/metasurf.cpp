// metasurf: solve, gradcheck, design and oracle commands.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>

#include "metasurf/error.hpp"
#include "metasurf/io.hpp"

namespace fs = std::filesystem;
using namespace metasurf;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kValidation = 4 };

struct Options {
  std::string config;
  std::string out = ".";
  int ppw = 0;
  int threads = 0;
  int seed = 0;
};

SceneConfig load(const Options& o) {
  SceneConfig cfg = load_config(o.config);
  if (o.ppw > 0) {
    if (o.ppw < 6) throw ConfigError("--panels-per-wavelength must be at least 6");
    cfg.scene.panels_per_wavelength = o.ppw;
  }
  set_junction_levels(cfg.junction_levels);
  return cfg;
}

fs::path out_dir(const Options& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

void write_fields(const fs::path& dir, const std::string& stem, const FieldMap& map) {
  write_field_map_binary(dir / (stem + ".tezf"), map);
  write_field_map_csv(dir / (stem + ".csv"), map);
}

int cmd_solve(const Options& o) {
  const SceneConfig cfg = load(o);
  const Scene& sc = cfg.scene;
  const fs::path dir = out_dir(o);
  const FieldGrid grid = cfg.field_map.value_or(default_grid(sc));
  const BoundaryMesh mesh = build_mesh(sc);
  validate_scene(sc, mesh);
  const auto t0 = std::chrono::steady_clock::now();
  const LinearSystem system(sc, mesh);
  const BoundarySolution sol = system.solve(sc.incident);
  spdlog::info("{} atoms, {} boundary nodes, residual {:.2e}", sc.atoms.size(),
               system.mesh().panels.size(), system.residual(sol));
  write_fields(dir, "field", compute_field_map(system, sol, grid));
  write_atomic(dir / "exit_line.csv",
               line_field_csv(LineField::on(sc.exit_line, evaluate_E(system, sol, sc.exit_line.points))));
  write_atomic(dir / "boundary.csv",
               boundary_csv(system.mesh(), sol, boundary_E(system.mesh(), sc, sol)));
  spdlog::info("solve finished in {:.2f} s",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return kOk;
}

struct GradcheckOptions {
  std::string sweep = "all";
  int atom = -1;
  int points = 8;
  double tolerance = 1e-3;
  bool all_costs = false;
};

std::vector<double> sweep_values(const Scene& sc, int atom, SweepKind kind, int n) {
  double lo = 0.0, hi = 0.0;
  const AffineParams& p = sc.atoms[atom].params;
  switch (kind) {
    case SweepKind::Rotation:
      hi = std::numbers::pi / 2.0;
      break;
    case SweepKind::Width: {
      // Lx from 330 to 660 nm for rectangles, half to full width otherwise.
      const auto* rr = std::get_if<RoundedRectangle>(&sc.atoms[atom].shape);
      lo = rr ? 330e-9 / rr->lx : 0.5;
      hi = rr ? 660e-9 / rr->lx : 1.0;
      break;
    }
    case SweepKind::CentroidY:
      lo = p.yc - 50e-9;
      hi = p.yc + 50e-9;
      break;
  }
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  return v;
}

int cmd_gradcheck(const Options& o, const GradcheckOptions& g) {
  const SceneConfig cfg = load(o);
  const Scene& sc = cfg.scene;
  if (sc.atoms.empty()) throw ConfigError("gradcheck needs at least one atom");
  const int atom = g.atom >= 0 ? g.atom : static_cast<int>(sc.atoms.size() / 2);
  if (atom >= static_cast<int>(sc.atoms.size())) throw ConfigError("--atom out of range");
  if (g.points < 1) throw ConfigError("--points must be positive");

  std::vector<CostSpec> specs;
  if (g.all_costs) {
    SceneConfig c = cfg;
    for (CostKind k : {CostKind::ScalarProductMag, CostKind::NormOfDifference,
                       CostKind::SquaredNormDiff, CostKind::PointIntensity}) {
      c.cost = k;
      specs.push_back(c.cost_spec());
    }
  } else {
    specs.push_back(cfg.cost_spec());
  }
  std::vector<SweepKind> kinds;
  if (g.sweep == "all" || g.sweep == "rotation") kinds.push_back(SweepKind::Rotation);
  if (g.sweep == "all" || g.sweep == "width") kinds.push_back(SweepKind::Width);
  if (g.sweep == "all" || g.sweep == "centroid_y") kinds.push_back(SweepKind::CentroidY);

  std::vector<SweepRow> rows;
  for (SweepKind k : kinds) {
    const auto values = sweep_values(sc, atom, k, g.points);
    auto part = gradient_sweep(sc, atom, k, values, specs, g.tolerance);
    for (const auto& r : part)
      spdlog::info("{} {} value={:.6g} adjoint={:.6e} fd={:.6e} rel={:.2e}", sweep_name(r.kind),
                   cost_name(r.cost), r.value, r.adjoint, r.fd, r.rel_error);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  write_atomic(out_dir(o) / "gradcheck.csv", sweep_csv(rows));
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.pass; });
  if (failed > 0) {
    spdlog::error("{} of {} sweep points exceed the tolerance {}", failed, rows.size(), g.tolerance);
    return kValidation;
  }
  return kOk;
}

int cmd_design(const Options& o) {
  const SceneConfig cfg = load(o);
  const Scene& sc = cfg.scene;
  if (cfg.active.size() == 0) throw ConfigError("no active parameters in [active]");
  const fs::path dir = out_dir(o);
  const CostSpec spec = cfg.cost_spec();
  const FieldGrid grid = cfg.field_map.value_or(default_grid(sc));

  auto snapshot = [&](const Scene& s, const std::string& stem) {
    const DesignPoint pt(s);
    write_fields(dir, "field_" + stem, compute_field_map(pt.system(), pt.forward(), grid));
    write_atomic(dir / ("exit_line_" + stem + ".csv"), line_field_csv(pt.sample(spec).line));
  };
  snapshot(sc, "initial");

  const DesignResult res = run_design(sc, spec, cfg.active, cfg.optimize, [](const IterationRecord& r) {
    spdlog::info("iteration {:4d} cost {:.9e} |g| {:.3e} step {:.3e} backtracks {} ({:.1f} s)",
                 r.iteration, r.cost, r.gradient_norm, r.step, r.backtracks, r.seconds);
  });
  spdlog::info("terminated: {}", res.trajectory.termination);
  write_atomic(dir / "trajectory.csv", trajectory_csv(res.trajectory));
  write_atomic(dir / "gradient.csv", gradient_csv(res.trajectory, cfg.active));
  write_atomic(dir / "design_final.csv", design_csv(res.scene));
  snapshot(res.scene, "final");
  return kOk;
}

int cmd_oracle(const Options& o) {
  std::vector<OracleReport> reports;
  auto add = [&](std::string id, std::string metric, double value, double tol, std::string meta) {
    reports.push_back({std::move(id), std::move(metric), value, tol, value < tol, std::move(meta)});
  };

  double prev = 0.0;
  for (int ppw : {8, 16, 32}) {
    const CylinderAudit a = cylinder_audit(200e-9, 5.76, 660e-9, ppw);
    const std::string meta = "ppw=" + std::to_string(ppw) + " panels=" + std::to_string(a.panels);
    if (ppw == 32) {
      add("cylinder_exterior", "relative L2 error", a.exterior_error, 1e-2, meta);
      add("cylinder_interior", "relative L2 error", a.interior_error, 2e-2, meta);
    }
    if (ppw > 8) add("cylinder_refinement", "error ratio after doubling (inverse)",
                     a.exterior_error / prev, 0.5, meta);
    prev = a.exterior_error;
  }

  Scene free;
  free.lambda0 = 660e-9;
  const Dipole d1{{100e-9, 50e-9}, 1.0, CVec2(0.6, 0.8)};
  const Dipole d2{{-400e-9, 700e-9}, cplx(0.3, 0.2), CVec2(1.0, 0.0)};
  OracleReport r = reciprocity_audit(free, d1, d2, 1e-12);
  r.case_id = "reciprocity_free_space";
  reports.push_back(r);

  if (!o.config.empty()) {
    const SceneConfig cfg = load(o);
    const ExitLine& line = cfg.scene.exit_line;
    const Vec2 dir = (line.b - line.a).normalized();
    const Vec2 beyond = 0.5 * (line.a + line.b) + cfg.scene.lambda0 * Vec2(dir.y(), -dir.x());
    const Dipole dip{beyond, 1.0, CVec2(0.6, 0.8)};
    LineCurrent lc;
    for (const auto& p : line.points)
      lc.samples.push_back(CVec2(0.0, std::exp(cplx(0.0, cfg.scene.k0() * 0.3 * p.y()))));
    r = reciprocity_audit(cfg.scene, dip, lc, 1e-6);
    r.case_id = "reciprocity_scene";
    reports.push_back(r);
  }

  for (const auto& rep : reports)
    spdlog::info("{:<24} {:<40} {:.3e} (tol {:.0e}) {}", rep.case_id, rep.metric, rep.value,
                 rep.tolerance, rep.pass ? "PASS" : "FAIL");
  write_atomic(out_dir(o) / "oracle.csv", oracle_csv(reports));
  const bool ok = std::all_of(reports.begin(), reports.end(), [](const auto& x) { return x.pass; });
  return ok ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D TEz metasurface simulation and adjoint shape design"};
  app.require_subcommand(1);
  Options o;
  GradcheckOptions g;

  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "Scene configuration file");
    if (config_required) c->required();
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--panels-per-wavelength", o.ppw, "Override the mesh density");
    sub->add_option("--threads", o.threads, "OpenMP threads");
    sub->add_option("--seed", o.seed, "Reserved; all algorithms are deterministic");
  };
  auto* solve = app.add_subcommand("solve", "Forward solve, field map and boundary traces");
  common(solve, true);
  auto* grad = app.add_subcommand("gradcheck", "Adjoint versus finite-difference sweeps");
  common(grad, true);
  grad->add_option("--sweep", g.sweep, "rotation, width, centroid_y or all")
      ->check(CLI::IsMember({"rotation", "width", "centroid_y", "all"}));
  grad->add_option("--atom", g.atom, "Swept atom (default: middle atom)");
  grad->add_option("--points", g.points, "Points per sweep");
  grad->add_option("--tolerance", g.tolerance, "Relative error tolerance");
  grad->add_flag("--all-costs", g.all_costs, "Check I1 to I4 (scalar product, difference norm, intensity difference, point intensity)");
  auto* design = app.add_subcommand("design", "Run the optimizer");
  common(design, true);
  auto* oracle = app.add_subcommand("oracle", "Cylinder and reciprocity audits");
  common(oracle, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  set_thread_count(o.threads);

  try {
    if (*solve) return cmd_solve(o);
    if (*grad) return cmd_gradcheck(o, g);
    if (*design) return cmd_design(o);
    if (*oracle) return cmd_oracle(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const GeometryError& e) {
    std::cerr << "invalid geometry: " << e.what() << '\n';
    return kValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}
