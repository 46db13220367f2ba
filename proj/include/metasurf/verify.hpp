#pragma once

// Independent oracles: cylinder series, finite-difference gradients,
// reciprocity audits and the parameter sweeps used for gradient validation.

#include <span>
#include <string>
#include <vector>

#include "metasurf/costs.hpp"
#include "metasurf/gradient.hpp"
#include "metasurf/solver.hpp"

namespace metasurf {

/// Plane-wave (E = amplitude * exp(-j k0 x) y_hat) scattering by a dielectric
/// circular cylinder centred at the origin, by cylindrical-harmonic expansion.
/// Returns the total field outside and the transmitted field inside.
std::vector<CVec2> cylinder_series(double radius, double eps_r, double lambda0, double amplitude,
                                   std::span<const Vec2> points);

struct CylinderAudit {
  double exterior_error = 0.0;  ///< relative L2 on a circle of radius 5 lambda0
  double interior_error = 0.0;  ///< relative L2 on a circle of half the radius
  std::size_t panels = 0;
};

/// Solver against cylinder_series for a centred circular atom under the unit plane wave.
CylinderAudit cylinder_audit(double radius, double eps_r, double lambda0, int panels_per_wavelength,
                             int order = 8, int samples = 64);

struct OracleReport {
  std::string case_id;
  std::string metric;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string metadata;
};

/// |adj - fd| / max(|fd|, 1e-12 * floor_norm).
double fd_relative_error(double adjoint, double fd, double floor_norm);

inline const std::vector<double> kDefaultFdSteps{1e-3, 1e-4, 1e-5};

struct FdResult {
  GradientVector gradient;              ///< at the chosen step
  std::vector<double> chosen_step;      ///< absolute step per parameter
  std::vector<std::vector<double>> per_step;  ///< [step][parameter]
};

/// Central differences of the costs with the mesh topology frozen; each probe
/// is an independent solve shared by all `specs`. Steps are relative to
/// param_scale. With `reference` gradients (one per spec) the step that agrees
/// best is chosen, otherwise the one where successive steps agree best.
std::vector<FdResult> fd_gradients(const Scene& scene, const std::vector<CostSpec>& specs,
                                   const ActiveParams& active,
                                   const std::vector<double>& steps = kDefaultFdSteps,
                                   const std::vector<GradientVector>* reference = nullptr);

FdResult fd_gradient(const Scene& scene, const CostSpec& spec, const ActiveParams& active,
                     const std::vector<double>& steps = kDefaultFdSteps,
                     const GradientVector* reference = nullptr);

/// Lorentz reciprocity |int J1.E2 - int J2.E1| / max(|.|, |.|) through full
/// scatterer solves; sources are Dipole or LineCurrent specs.
OracleReport reciprocity_audit(const Scene& scene, const IncidentSpec& source1,
                               const IncidentSpec& source2, double tolerance = 1e-6);

enum class SweepKind { Rotation, Width, CentroidY };
const char* sweep_name(SweepKind kind);

struct SweepRow {
  SweepKind kind = SweepKind::Rotation;
  double value = 0.0;  ///< theta (rad), lambda_x, or yc (m)
  CostKind cost = CostKind::ScalarProductMag;
  double adjoint = 0.0;
  double fd = 0.0;
  double rel_error = 0.0;
  double best_step = 0.0;
  bool pass = false;
};

/// Varies one parameter of `atom` over `values`; at each point compares the
/// adjoint derivative with central differences for every cost in `specs`.
/// The relative-error floor uses the norm of each cost's FD values over the sweep.
std::vector<SweepRow> gradient_sweep(const Scene& scene, int atom, SweepKind kind,
                                     std::span<const double> values,
                                     const std::vector<CostSpec>& specs, double tolerance = 1e-3,
                                     const std::vector<double>& steps = kDefaultFdSteps);

}  // namespace metasurf
