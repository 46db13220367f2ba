#include "metasurf/gradient.hpp"

#include <cmath>
#include <span>

#include "metasurf/error.hpp"

namespace metasurf {

const char* param_name(Param p) {
  switch (p) {
    case Param::Theta: return "theta";
    case Param::LambdaX: return "lambda_x";
    case Param::LambdaY: return "lambda_y";
    case Param::Xc: return "xc";
    case Param::Yc: return "yc";
  }
  return "unknown";
}

ActiveParams ActiveParams::make(std::vector<std::array<bool, kParamCount>> mask) {
  ActiveParams a;
  a.mask = std::move(mask);
  for (std::size_t i = 0; i < a.mask.size(); ++i)
    for (int p = 0; p < kParamCount; ++p)
      if (a.mask[i][p]) a.entries.emplace_back(static_cast<int>(i), static_cast<Param>(p));
  return a;
}

ActiveParams ActiveParams::uniform(std::size_t atom_count, std::array<bool, kParamCount> per_atom,
                                   const std::vector<int>& atoms) {
  std::vector<std::array<bool, kParamCount>> mask(atom_count, std::array<bool, kParamCount>{});
  if (atoms.empty()) {
    for (auto& m : mask) m = per_atom;
  } else {
    for (int a : atoms) {
      if (a < 0 || static_cast<std::size_t>(a) >= atom_count)
        throw Error("active atom index out of range");
      mask[a] = per_atom;
    }
  }
  return make(std::move(mask));
}

double get_param(const AffineParams& p, Param which) {
  switch (which) {
    case Param::Theta: return p.theta;
    case Param::LambdaX: return p.lambda_x;
    case Param::LambdaY: return p.lambda_y;
    case Param::Xc: return p.xc;
    case Param::Yc: return p.yc;
  }
  return 0.0;
}

void set_param(AffineParams& p, Param which, double value) {
  switch (which) {
    case Param::Theta: p.theta = value; break;
    case Param::LambdaX: p.lambda_x = value; break;
    case Param::LambdaY: p.lambda_y = value; break;
    case Param::Xc: p.xc = value; break;
    case Param::Yc: p.yc = value; break;
  }
}

Eigen::VectorXcd integrand_f(const BoundaryMesh& mesh, const Scene& scene,
                             const BoundaryTraces& adjoint, const BoundaryTraces& forward) {
  const std::size_t n = mesh.panels.size();
  if (adjoint.en_ext.size() != static_cast<Eigen::Index>(n) ||
      forward.en_ext.size() != static_cast<Eigen::Index>(n))
    throw Error("boundary traces do not match the mesh");
  Eigen::VectorXcd f(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = scene.atoms[mesh.panels[i].atom].eps_r;
    f[i] = adjoint.en_ext[i] * forward.en_ext[i] / e + adjoint.et[i] * forward.et[i];
  }
  return f;
}

cplx partial(const BoundaryMesh& mesh, const Scene& scene, int atom, Transform transform,
             const Vec2& d_hat, const Eigen::VectorXcd& f) {
  const std::size_t begin = mesh.atom_offsets[atom], end = mesh.atom_offsets[atom + 1];
  cplx sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    const Panel& p = mesh.panels[i];
    double w = 0.0;
    switch (transform) {
      case Transform::Rotation: w = weight_rotation(p); break;
      case Transform::Expansion: w = weight_expansion(p, d_hat); break;
      case Transform::Translation: w = weight_translation(p, d_hat); break;
    }
    sum += f[i] * (w * p.length);
  }
  const double contrast = scene.atoms[atom].eps_r - 1.0;
  return cplx(0.0, scene.omega() * phys::eps0 * contrast) * sum;
}

cplx param_partial(const BoundaryMesh& mesh, const Scene& scene, int atom, Param which,
                   const Eigen::VectorXcd& f) {
  const AffineParams& ap = scene.atoms[atom].params;
  switch (which) {
    case Param::Theta:
      return partial(mesh, scene, atom, Transform::Rotation, Vec2::Zero(), f);
    case Param::LambdaX:
      return partial(mesh, scene, atom, Transform::Expansion, ap.rotation() * Vec2::UnitX(), f) /
             ap.lambda_x;
    case Param::LambdaY:
      return partial(mesh, scene, atom, Transform::Expansion, ap.rotation() * Vec2::UnitY(), f) /
             ap.lambda_y;
    case Param::Xc:
      return partial(mesh, scene, atom, Transform::Translation, Vec2::UnitX(), f);
    case Param::Yc:
      return partial(mesh, scene, atom, Transform::Translation, Vec2::UnitY(), f);
  }
  return 0.0;
}

GradientVector full_gradient(const LinearSystem& system, const BoundarySolution& forward,
                             const AdjointRecipe& recipe,
                             const std::vector<BoundarySolution>& adjoints,
                             const ActiveParams& active) {
  if (adjoints.size() != recipe.sources.size())
    throw Error("adjoint solution count does not match the recipe");
  const BoundaryMesh& mesh = system.mesh();
  const Scene& scene = system.scene();
  if (active.mask.size() != scene.atoms.size())
    throw Error("active parameter mask does not match the atom count");
  const BoundaryTraces ef = boundary_E(mesh, scene, forward);
  const std::size_t ns = adjoints.size();
  // per_source[s][k]: g_s for flat parameter k
  std::vector<std::vector<double>> per_source(ns, std::vector<double>(active.size()));
  for (std::size_t s = 0; s < ns; ++s) {
    const BoundaryTraces ea = boundary_E(mesh, scene, adjoints[s]);
    const Eigen::VectorXcd f = integrand_f(mesh, scene, ea, ef);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const auto [atom, which] = active.entries[k];
      const cplx dm = param_partial(mesh, scene, atom, which, f);
      per_source[s][k] = 2.0 * std::real(recipe.sources[s].beta * dm);
    }
  }
  GradientVector g;
  g.values.resize(active.size());
  std::vector<double> tmp(ns);
  for (std::size_t k = 0; k < active.size(); ++k) {
    for (std::size_t s = 0; s < ns; ++s) tmp[s] = per_source[s][k];
    g.values[k] = combine_partials(recipe, tmp);
    if (!std::isfinite(g.values[k])) throw NumericalError("non-finite gradient entry");
  }
  return g;
}

}  // namespace metasurf
