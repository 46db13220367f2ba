#pragma once

// Physical constants, excitations and the scene description shared by the
// solver, cost and design modules. All quantities are SI.

#include <cmath>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "metasurf/geometry.hpp"

namespace metasurf {

namespace phys {
inline constexpr double eps0 = 8.8541878128e-12;  // F/m
inline constexpr double mu0 = 1.25663706212e-6;   // H/m
inline const double c0 = 1.0 / std::sqrt(mu0 * eps0);
inline const double eta0 = std::sqrt(mu0 / eps0);
}  // namespace phys

/// E = amplitude * exp(-j k0 x) * y_hat.
struct PlaneWave {
  double amplitude = 1.0;  // V/m
};

/// Current density sampled on the exit-line quadrature nodes (A/m^2).
struct LineCurrent {
  std::vector<CVec2> samples;
};

/// Point current moment * direction at `position` (A/m^2 per unit area).
/// The direction may be complex to represent elliptical moments.
struct Dipole {
  Vec2 position = Vec2::Zero();
  cplx moment = 1.0;
  CVec2 direction = CVec2(0.0, 1.0);

  CVec2 current() const { return moment * direction; }
};

using IncidentSpec = std::variant<PlaneWave, LineCurrent, Dipole>;

/// Straight exit line with composite Gauss-Legendre quadrature.
struct ExitLine {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  std::vector<Vec2> points;
  std::vector<double> weights;  ///< arclength weights, m

  std::size_t size() const { return points.size(); }
  double length() const { return (b - a).norm(); }

  /// At least `min_nodes` nodes and at least 10 per free-space wavelength,
  /// rounded up to whole 8-point panels.
  static ExitLine make(const Vec2& a, const Vec2& b, int min_nodes, double lambda0);
};

struct Atom {
  BaseShape shape;
  AffineParams params;
  double eps_r = 5.76;
};

struct Scene {
  double lambda0 = 660e-9;
  std::vector<Atom> atoms;
  ExitLine exit_line;
  IncidentSpec incident = PlaneWave{};
  int panels_per_wavelength = 16;
  int element_order = 8;

  double k0() const { return 2.0 * std::numbers::pi / lambda0; }
  double omega() const { return k0() * phys::c0; }
};

/// Discretizes every atom. With `topologies`, the element counts are frozen.
BoundaryMesh build_mesh(const Scene& scene, const std::vector<MeshTopology>* topologies = nullptr);

/// Throws GeometryError when atoms overlap (gap below `margin` panel lengths)
/// or the exit line touches an atom.
void validate_scene(const Scene& scene, const BoundaryMesh& mesh, double margin = 1.0);

}  // namespace metasurf
