#include "metasurf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "metasurf/error.hpp"
#include "metasurf/optimize.hpp"

namespace metasurf {

double fd_relative_error(double adjoint, double fd, double floor_norm) {
  const double denom = std::max(std::abs(fd), 1e-12 * floor_norm);
  if (denom == 0.0) return adjoint == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(adjoint - fd) / denom;
}

namespace {

std::vector<MeshTopology> topology_of(const Scene& scene) {
  return build_mesh(scene).topologies;
}

std::vector<double> probe(const Scene& scene, const std::vector<CostSpec>& specs,
                          const std::vector<MeshTopology>& topo) {
  validate_scene(scene, build_mesh(scene, &topo));
  const DesignPoint pt(scene, &topo);
  std::vector<double> c;
  for (const auto& s : specs) c.push_back(pt.cost(s));
  return c;
}

}  // namespace

std::vector<FdResult> fd_gradients(const Scene& scene, const std::vector<CostSpec>& specs,
                                   const ActiveParams& active, const std::vector<double>& steps,
                                   const std::vector<GradientVector>* reference) {
  if (steps.empty()) throw Error("finite-difference step schedule is empty");
  if (reference && reference->size() != specs.size())
    throw Error("reference gradient count does not match the cost count");
  const std::vector<MeshTopology> topo = topology_of(scene);
  const std::size_t np = active.size(), ns = specs.size();
  std::vector<FdResult> out(ns);
  for (auto& r : out) {
    r.gradient.values.assign(np, 0.0);
    r.chosen_step.assign(np, 0.0);
    r.per_step.assign(steps.size(), std::vector<double>(np, 0.0));
  }
  std::vector<std::vector<double>> abs_step(steps.size(), std::vector<double>(np));
  for (std::size_t k = 0; k < np; ++k) {
    const auto [atom, which] = active.entries[k];
    for (std::size_t si = 0; si < steps.size(); ++si) {
      double h = steps[si] * param_scale(which);
      for (int attempt = 0;; ++attempt) {
        try {
          Scene plus = scene, minus = scene;
          const double v = get_param(scene.atoms[atom].params, which);
          set_param(plus.atoms[atom].params, which, v + h);
          set_param(minus.atoms[atom].params, which, v - h);
          const std::vector<double> cp = probe(plus, specs, topo);
          const std::vector<double> cm = probe(minus, specs, topo);
          for (std::size_t s = 0; s < ns; ++s) out[s].per_step[si][k] = (cp[s] - cm[s]) / (2.0 * h);
          abs_step[si][k] = h;
          break;
        } catch (const GeometryError&) {
          if (attempt >= 4) throw;
          h *= 0.5;
        }
      }
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    FdResult& r = out[s];
    for (std::size_t k = 0; k < np; ++k) {
      std::size_t best = 0;
      double best_score = std::numeric_limits<double>::infinity();
      for (std::size_t si = 0; si < steps.size(); ++si) {
        double score;
        if (reference) {
          score = std::abs(r.per_step[si][k] - (*reference)[s].values[k]);
        } else if (steps.size() == 1) {
          score = 0.0;
        } else {
          const std::size_t other = si + 1 < steps.size() ? si + 1 : si - 1;
          score = std::abs(r.per_step[si][k] - r.per_step[other][k]);
        }
        if (score < best_score) best_score = score, best = si;
      }
      r.gradient.values[k] = r.per_step[best][k];
      r.chosen_step[k] = abs_step[best][k];
    }
  }
  return out;
}

FdResult fd_gradient(const Scene& scene, const CostSpec& spec, const ActiveParams& active,
                     const std::vector<double>& steps, const GradientVector* reference) {
  std::vector<GradientVector> refs;
  if (reference) refs.push_back(*reference);
  return fd_gradients(scene, {spec}, active, steps, reference ? &refs : nullptr)[0];
}

namespace {

// int J1 . E2 over the support of source 1 (unconjugated).
cplx reaction(const LinearSystem& system, const IncidentSpec& s1, const BoundarySolution& sol2) {
  const Scene& scene = system.scene();
  std::vector<Vec2> pts;
  std::vector<CVec2> currents;
  if (const auto* d = std::get_if<Dipole>(&s1)) {
    pts.push_back(d->position);
    currents.push_back(d->current());
  } else if (const auto* lc = std::get_if<LineCurrent>(&s1)) {
    if (lc->samples.size() != scene.exit_line.size())
      throw Error("line current sample count does not match the exit-line quadrature");
    pts = scene.exit_line.points;
    for (std::size_t k = 0; k < pts.size(); ++k)
      currents.push_back(lc->samples[k] * scene.exit_line.weights[k]);
  } else {
    throw Error("reciprocity sources must be dipoles or line currents");
  }
  const auto scattered = evaluate_E(system, sol2, pts, Side::Exterior, false);
  const auto direct = incident_field(sol2.incident, scene, pts);
  cplx r = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const CVec2 e = scattered[k] + direct[k];
    r += currents[k][0] * e[0] + currents[k][1] * e[1];
  }
  return r;
}

}  // namespace

OracleReport reciprocity_audit(const Scene& scene, const IncidentSpec& source1,
                               const IncidentSpec& source2, double tolerance) {
  const LinearSystem system(scene, build_mesh(scene));
  const BoundarySolution s1 = system.solve(source1);
  const BoundarySolution s2 = system.solve(source2);
  const cplx a = reaction(system, source1, s2);
  const cplx b = reaction(system, source2, s1);
  const double scale = std::max(std::abs(a), std::abs(b));
  OracleReport rep;
  rep.case_id = "reciprocity";
  rep.metric = "relative reaction mismatch";
  rep.value = scale > 0.0 ? std::abs(a - b) / scale : 0.0;
  rep.tolerance = tolerance;
  rep.pass = rep.value < tolerance;
  std::ostringstream meta;
  meta << "atoms=" << scene.atoms.size() << " panels=" << system.mesh().panels.size()
       << " ppw=" << scene.panels_per_wavelength;
  rep.metadata = meta.str();
  return rep;
}

CylinderAudit cylinder_audit(double radius, double eps_r, double lambda0,
                             int panels_per_wavelength, int order, int samples) {
  Scene scene;
  scene.lambda0 = lambda0;
  scene.panels_per_wavelength = panels_per_wavelength;
  scene.element_order = order;
  scene.atoms.push_back({Circle{radius}, AffineParams{}, eps_r});
  const LinearSystem system(scene, build_mesh(scene));
  const BoundarySolution sol = system.solve(scene.incident);

  auto ring = [&](double r) {
    std::vector<Vec2> pts;
    for (int k = 0; k < samples; ++k) {
      const double phi = 2.0 * std::numbers::pi * (k + 0.5) / samples;
      pts.emplace_back(r * std::cos(phi), r * std::sin(phi));
    }
    return pts;
  };
  auto rel_l2 = [&](const std::vector<Vec2>& pts) {
    const auto bem = evaluate_E(system, sol, pts);
    const auto ref = cylinder_series(radius, eps_r, lambda0, 1.0, pts);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      num += (bem[k] - ref[k]).squaredNorm();
      den += ref[k].squaredNorm();
    }
    return std::sqrt(num / den);
  };
  CylinderAudit out;
  out.exterior_error = rel_l2(ring(5.0 * lambda0));
  out.interior_error = rel_l2(ring(0.5 * radius));
  out.panels = system.mesh().panels.size();
  return out;
}

const char* sweep_name(SweepKind kind) {
  switch (kind) {
    case SweepKind::Rotation: return "rotation";
    case SweepKind::Width: return "width";
    case SweepKind::CentroidY: return "centroid_y";
  }
  return "unknown";
}

std::vector<SweepRow> gradient_sweep(const Scene& scene, int atom, SweepKind kind,
                                     std::span<const double> values,
                                     const std::vector<CostSpec>& specs, double tolerance,
                                     const std::vector<double>& steps) {
  if (atom < 0 || static_cast<std::size_t>(atom) >= scene.atoms.size())
    throw Error("sweep atom index out of range");
  const Param which = kind == SweepKind::Rotation ? Param::Theta
                      : kind == SweepKind::Width  ? Param::LambdaX
                                                  : Param::Yc;
  std::array<bool, kParamCount> mask{};
  mask[static_cast<int>(which)] = true;
  const ActiveParams active = ActiveParams::uniform(scene.atoms.size(), mask, {atom});

  std::vector<SweepRow> rows;
  for (double v : values) {
    Scene s = scene;
    set_param(s.atoms[atom].params, which, v);
    const DesignPoint pt(s);
    std::vector<GradientVector> adj;
    for (const auto& spec : specs) adj.push_back(pt.gradient(spec, active));
    const std::vector<FdResult> fd = fd_gradients(s, specs, active, steps, &adj);
    for (std::size_t c = 0; c < specs.size(); ++c) {
      SweepRow r;
      r.kind = kind;
      r.value = v;
      r.cost = specs[c].kind;
      r.adjoint = adj[c].values[0];
      r.fd = fd[c].gradient.values[0];
      r.best_step = fd[c].chosen_step[0];
      rows.push_back(r);
    }
  }
  for (std::size_t c = 0; c < specs.size(); ++c) {
    double norm2 = 0.0;
    for (std::size_t i = c; i < rows.size(); i += specs.size()) norm2 += rows[i].fd * rows[i].fd;
    for (std::size_t i = c; i < rows.size(); i += specs.size()) {
      rows[i].rel_error = fd_relative_error(rows[i].adjoint, rows[i].fd, std::sqrt(norm2));
      rows[i].pass = rows[i].rel_error < tolerance;
    }
  }
  return rows;
}

}  // namespace metasurf
