#pragma once

// Shape gradients of exit-line costs from one forward and a few adjoint
// boundary solutions.

#include <array>
#include <string>
#include <vector>

#include "metasurf/costs.hpp"
#include "metasurf/solver.hpp"

namespace metasurf {

enum class Param { Theta = 0, LambdaX, LambdaY, Xc, Yc };
inline constexpr int kParamCount = 5;
const char* param_name(Param p);

/// Per-atom mask over the five affine parameters and the flat index map.
struct ActiveParams {
  std::vector<std::array<bool, kParamCount>> mask;
  std::vector<std::pair<int, Param>> entries;  ///< flat order: atom-major

  static ActiveParams make(std::vector<std::array<bool, kParamCount>> mask);
  /// The same mask for every atom in `atoms`, none for the rest.
  static ActiveParams uniform(std::size_t atom_count, std::array<bool, kParamCount> per_atom,
                              const std::vector<int>& atoms = {});
  std::size_t size() const { return entries.size(); }
};

double get_param(const AffineParams& p, Param which);
void set_param(AffineParams& p, Param which, double value);

struct GradientVector {
  std::vector<double> values;
};

/// f = (1/eps_r)(Ea.n)(Ef.n) on the air side + (Ea.t)(Ef.t), per panel.
Eigen::VectorXcd integrand_f(const BoundaryMesh& mesh, const Scene& scene,
                             const BoundaryTraces& adjoint, const BoundaryTraces& forward);

enum class Transform { Rotation, Expansion, Translation };

/// dM/dp = j omega eps0 (eps_r - 1) * sum f w length over the atom's panels.
cplx partial(const BoundaryMesh& mesh, const Scene& scene, int atom, Transform transform,
             const Vec2& d_hat, const Eigen::VectorXcd& f);

/// dM/dp for one affine parameter; lambda derivatives use the expansion along
/// the rotated local axis scaled by 1 / lambda.
cplx param_partial(const BoundaryMesh& mesh, const Scene& scene, int atom, Param which,
                   const Eigen::VectorXcd& f);

/// Gradient of the cost whose recipe produced `adjoints` (one per source).
GradientVector full_gradient(const LinearSystem& system, const BoundarySolution& forward,
                             const AdjointRecipe& recipe,
                             const std::vector<BoundarySolution>& adjoints,
                             const ActiveParams& active);

}  // namespace metasurf
