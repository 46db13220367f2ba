#pragma once

// Boundary-integral solver for TEz scattering by dielectric meta-atoms.
//
// Unknowns per boundary node are the total H_z trace and its exterior normal
// derivative. The exterior and interior Green representations are combined
// (weighted by eps_r for the field rows) so the hypersingular parts cancel,
// which keeps the system well conditioned and free of interior resonances.
// Nodes are Gauss points of curved elements; near and self interactions use
// graded product integration against the element's Lagrange basis.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "metasurf/scene.hpp"

namespace metasurf {

enum class Excitation { Forward, Adjoint };

struct BoundarySolution {
  std::uint64_t mesh_id = 0;
  Eigen::VectorXcd h;          ///< H_z per panel, A/m
  Eigen::VectorXcd dh_dn_ext;  ///< exterior normal derivative, A/m^2
  IncidentSpec incident;
  Excitation excitation = Excitation::Forward;
  int index = 0;  ///< adjoint source index
};

/// Value and gradient of H_z.
struct HField {
  cplx h;
  Eigen::Vector2cd grad;
};

/// Free-space H_z of an excitation at `x`.
HField incident_h(const IncidentSpec& spec, const Scene& scene, const Vec2& x);

/// Free-space E of an excitation.
std::vector<CVec2> incident_field(const IncidentSpec& spec, const Scene& scene,
                                  std::span<const Vec2> points);

/// OpenMP thread count used by assembly and field evaluation (<= 0 leaves the default).
void set_thread_count(int threads);

struct SolverCounters {
  long assemblies = 0;
  long factorizations = 0;
  long forward_solves = 0;
  long adjoint_solves = 0;
};
SolverCounters solver_counters();
void reset_solver_counters();

/// Assembled and LU-factorized system; immutable once built.
class LinearSystem {
 public:
  LinearSystem(const Scene& scene, BoundaryMesh mesh);

  const Scene& scene() const { return scene_; }
  const BoundaryMesh& mesh() const { return mesh_; }
  std::size_t dimension() const { return static_cast<std::size_t>(matrix_.rows()); }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }

  Eigen::VectorXcd rhs(const IncidentSpec& spec) const;
  BoundarySolution solve(const IncidentSpec& spec, Excitation kind = Excitation::Forward,
                         int index = 0) const;
  /// Relative residual ||A x - b|| / ||b|| of a solution against its rhs.
  double residual(const BoundarySolution& solution) const;
  /// Rcond estimate from the LU factors.
  double rcond() const { return matrix_.size() > 0 ? lu_.rcond() : 1.0; }

 private:
  Scene scene_;
  BoundaryMesh mesh_;
  Eigen::MatrixXcd matrix_;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

enum class Side { Auto, Exterior, Interior };

/// Total field outside the atoms, transmitted field inside. With Side::Auto the
/// side follows the point's location. Without `include_incident` the exterior
/// result is the scattered field only.
std::vector<CVec2> evaluate_E(const LinearSystem& system, const BoundarySolution& solution,
                              std::span<const Vec2> points, Side side = Side::Auto,
                              bool include_incident = true);

/// H_z at points, same conventions as evaluate_E.
std::vector<cplx> evaluate_H(const LinearSystem& system, const BoundarySolution& solution,
                             std::span<const Vec2> points, Side side = Side::Auto);

/// Per-panel electric field traces.
struct BoundaryTraces {
  Eigen::VectorXcd en_ext;  ///< E . n on the air side
  Eigen::VectorXcd en_int;  ///< E . n on the dielectric side
  Eigen::VectorXcd et;      ///< E . t, continuous
};

BoundaryTraces boundary_E(const BoundaryMesh& mesh, const Scene& scene,
                          const BoundarySolution& solution);

}  // namespace metasurf
