#pragma once

// Exit-line cost functions, the similarity functional and adjoint recipes.

#include <string>
#include <variant>
#include <vector>

#include "metasurf/scene.hpp"

namespace metasurf {

/// Complex E samples on the exit-line quadrature.
struct LineField {
  std::vector<Vec2> nodes;
  std::vector<double> weights;
  std::vector<CVec2> values;

  static LineField on(const ExitLine& line, std::vector<CVec2> values);
  std::size_t size() const { return nodes.size(); }
  /// Integral of |E|^2 over the line.
  double norm2() const;
};

/// Throws Error unless both fields share nodes and weights.
void check_same_nodes(const LineField& a, const LineField& b);

enum class CostKind {
  ScalarProductMag,     ///< |M_Ed|^2
  NormOfDifference,     ///< ||Ef - Ed||^2
  AngleBetweenFields,   ///< |M_Ed|^2 / (||Ed||^2 ||Ef||^2)
  SquaredNormDiff,      ///< integral of (|Ed|^2 - |Ef|^2)^2
  AngleBetweenSquares,  ///< F^2 / (G H)
  PointIntensity,       ///< |Ef(x0)|^2
};

const char* cost_name(CostKind kind);
CostKind parse_cost_kind(const std::string& name);
/// True for costs the design driver maximizes.
bool is_maximized(CostKind kind);

struct CostSpec {
  CostKind kind = CostKind::ScalarProductMag;
  LineField target;              ///< E_d, unused for PointIntensity
  Vec2 point = Vec2::Zero();     ///< x0 for PointIntensity
};

/// Forward field data a cost needs: E_f on the line and, for point costs, at x0.
struct ForwardSample {
  LineField line;
  CVec2 point = CVec2::Zero();
};

/// Quadrature of the integral of conj(w) . Ef over the line.
cplx similarity(const LineField& w, const LineField& ef);

double evaluate_cost(const CostSpec& spec, const ForwardSample& ef);

/// How per-source gradients g_s = 2 Re{beta_s dM_s/dp} are combined.
enum class CombineRule { Single, AngleQuotient, SquaresQuotient };

struct AdjointSource {
  IncidentSpec source;  ///< LineCurrent on the exit line or a Dipole
  cplx beta = 1.0;
};

struct AdjointRecipe {
  std::vector<AdjointSource> sources;
  CombineRule rule = CombineRule::Single;
  // Quotient coefficients at the current design.
  double m2 = 0.0;   ///< |M_Ed|^2
  double ef2 = 0.0;  ///< ||Ef||^2
  double ed2 = 0.0;  ///< ||Ed||^2
  double f = 0.0, g = 0.0, h = 0.0;  ///< F, G, H of the squared-norm angle
};

AdjointRecipe adjoint_recipe(const CostSpec& spec, const ForwardSample& ef);

/// Combines per-source gradients of one parameter into dI/dp.
double combine_partials(const AdjointRecipe& recipe, std::span<const double> per_source);

/// Conjugated superposition of y-directed dipole fields G(x, x_k) J0 y_hat on
/// the exit line (time-reversed focusing target).
LineField build_target_focus(std::span<const Vec2> focal_points, cplx j0, const Scene& scene);

}  // namespace metasurf
