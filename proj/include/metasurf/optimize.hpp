#pragma once

// Design evaluation (one factorization per design) and the quasi-Newton
// design loop over active affine parameters.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "metasurf/costs.hpp"
#include "metasurf/gradient.hpp"
#include "metasurf/solver.hpp"

namespace metasurf {

/// Factorized system and forward solution of one design.
class DesignPoint {
 public:
  explicit DesignPoint(const Scene& scene, const std::vector<MeshTopology>* topologies = nullptr);

  const LinearSystem& system() const { return system_; }
  const BoundarySolution& forward() const { return forward_; }
  const Scene& scene() const { return system_.scene(); }

  /// Forward samples for `spec` (exit line, plus x0 for point costs).
  ForwardSample sample(const CostSpec& spec) const;
  double cost(const CostSpec& spec) const;
  /// Adjoint solves for the recipe of `spec`, then the assembled gradient.
  GradientVector gradient(const CostSpec& spec, const ActiveParams& active) const;

 private:
  LinearSystem system_;
  BoundarySolution forward_;
  LineField line_;
};

struct Diagnostics {
  double assemble_seconds = 0.0;  ///< assembly plus factorization
  double forward_seconds = 0.0;
  double adjoint_seconds = 0.0;   ///< adjoint solves and gradient assembly
  SolverCounters counts;          ///< solver calls made by this evaluation
};

struct DesignEvaluation {
  double cost = 0.0;
  GradientVector gradient;
  Diagnostics diagnostics;
};

DesignEvaluation evaluate_design(const Scene& scene, const CostSpec& spec,
                                 const ActiveParams& active,
                                 const std::vector<MeshTopology>* topologies = nullptr);

/// Optimization variable scale: 1 for theta and lambdas, 100 nm for centroids.
double param_scale(Param p);

struct OptimizeConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  ///< relative to the initial gradient norm
  double step_tolerance = 1e-10;     ///< on the scaled step
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
  int history = 8;
  double lambda_min = 0.3;
  double lambda_max = 2.0;
  /// Half-width of the centroid box around the initial position (m); unset
  /// means a quarter of the smallest initial centroid spacing.
  std::optional<double> centroid_box;
  double initial_step = 0.1;       ///< max-norm of a scaled step taken without curvature history
  double overlap_margin = 2.0;     ///< minimum gap in panel lengths
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;  ///< user-facing sign
  double gradient_norm = 0.0;  ///< of the scaled optimization gradient
  std::vector<double> gradient;  ///< dI/dp per active parameter, SI units
  double step = 0.0;  ///< scaled step length
  int backtracks = 0;
  std::vector<AffineParams> params;
  SolverCounters counts;  ///< solver calls spent on this iteration
  double seconds = 0.0;
};

struct DesignTrajectory {
  std::vector<IterationRecord> records;
  std::string termination;
};

struct DesignResult {
  Scene scene;
  DesignTrajectory trajectory;
};

/// Replaces the adjoint gradient (e.g. by finite differences) for cross-checks.
using GradientFn = std::function<GradientVector(const Scene&)>;

DesignResult run_design(const Scene& scene, const CostSpec& spec, const ActiveParams& active,
                        const OptimizeConfig& config,
                        const std::function<void(const IterationRecord&)>& on_iteration = {},
                        const GradientFn& gradient_override = {});

}  // namespace metasurf
