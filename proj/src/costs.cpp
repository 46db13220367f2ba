#include "metasurf/costs.hpp"

#include <cmath>
#include <span>
#include <string>

#include "metasurf/error.hpp"
#include "metasurf/special.hpp"

namespace metasurf {

namespace {

constexpr double kNormGuard = 1e-30;

// Integral of s(x) * conj(E(x)) as line current samples.
LineCurrent weighted_conj(const LineField& ef, const std::vector<double>& scale) {
  LineCurrent lc;
  lc.samples.resize(ef.size());
  for (std::size_t i = 0; i < ef.size(); ++i) lc.samples[i] = scale[i] * ef.values[i].conjugate();
  return lc;
}

void guard(double value, const char* what) {
  if (!(value >= kNormGuard))
    throw NumericalError(std::string("cost normalization vanishes: ") + what);
}

}  // namespace

LineField LineField::on(const ExitLine& line, std::vector<CVec2> values) {
  if (values.size() != line.size()) throw Error("line field size does not match the exit line");
  return {line.points, line.weights, std::move(values)};
}

double LineField::norm2() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights[i] * values[i].squaredNorm();
  return s;
}

void check_same_nodes(const LineField& a, const LineField& b) {
  if (a.nodes.size() != b.nodes.size() || a.values.size() != a.nodes.size() ||
      b.values.size() != b.nodes.size())
    throw Error("line fields have different node counts");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.nodes[i] != b.nodes[i] || a.weights[i] != b.weights[i])
      throw Error("line fields are sampled on different nodes");
}

const char* cost_name(CostKind kind) {
  switch (kind) {
    case CostKind::ScalarProductMag: return "scalar_product_mag";
    case CostKind::NormOfDifference: return "norm_of_difference";
    case CostKind::AngleBetweenFields: return "angle_between_fields";
    case CostKind::SquaredNormDiff: return "squared_norm_diff";
    case CostKind::AngleBetweenSquares: return "angle_between_squares";
    case CostKind::PointIntensity: return "point_intensity";
  }
  return "unknown";
}

CostKind parse_cost_kind(const std::string& name) {
  for (CostKind k : {CostKind::ScalarProductMag, CostKind::NormOfDifference,
                     CostKind::AngleBetweenFields, CostKind::SquaredNormDiff,
                     CostKind::AngleBetweenSquares, CostKind::PointIntensity})
    if (name == cost_name(k)) return k;
  throw Error("unknown cost kind '" + name + "'");
}

bool is_maximized(CostKind kind) {
  return kind != CostKind::NormOfDifference && kind != CostKind::SquaredNormDiff;
}

cplx similarity(const LineField& w, const LineField& ef) {
  check_same_nodes(w, ef);
  cplx m = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    m += w.weights[i] * w.values[i].dot(ef.values[i]);  // Eigen dot conjugates the first factor
  return m;
}

namespace {

struct SquareSums {
  double f = 0.0, g = 0.0, h = 0.0;
};

SquareSums square_sums(const LineField& ed, const LineField& ef) {
  SquareSums s;
  for (std::size_t i = 0; i < ef.size(); ++i) {
    const double a = ed.values[i].squaredNorm(), b = ef.values[i].squaredNorm();
    s.f += ef.weights[i] * a * b;
    s.g += ef.weights[i] * b * b;
    s.h += ef.weights[i] * a * a;
  }
  return s;
}

}  // namespace

double evaluate_cost(const CostSpec& spec, const ForwardSample& ef) {
  if (spec.kind == CostKind::PointIntensity) return ef.point.squaredNorm();
  const LineField& ed = spec.target;
  check_same_nodes(ed, ef.line);
  switch (spec.kind) {
    case CostKind::ScalarProductMag:
      return std::norm(similarity(ed, ef.line));
    case CostKind::NormOfDifference: {
      double s = 0.0;
      for (std::size_t i = 0; i < ed.size(); ++i)
        s += ed.weights[i] * (ef.line.values[i] - ed.values[i]).squaredNorm();
      return s;
    }
    case CostKind::AngleBetweenFields: {
      const double n_f = ef.line.norm2(), n_d = ed.norm2();
      guard(n_f, "||Ef||^2");
      guard(n_d, "||Ed||^2");
      return std::norm(similarity(ed, ef.line)) / (n_d * n_f);
    }
    case CostKind::SquaredNormDiff: {
      double s = 0.0;
      for (std::size_t i = 0; i < ed.size(); ++i) {
        const double d = ed.values[i].squaredNorm() - ef.line.values[i].squaredNorm();
        s += ed.weights[i] * d * d;
      }
      return s;
    }
    case CostKind::AngleBetweenSquares: {
      const SquareSums s = square_sums(ed, ef.line);
      guard(s.g, "integral of |Ef|^4");
      guard(s.h, "integral of |Ed|^4");
      return s.f * s.f / (s.g * s.h);
    }
    case CostKind::PointIntensity:
      break;
  }
  return ef.point.squaredNorm();
}

AdjointRecipe adjoint_recipe(const CostSpec& spec, const ForwardSample& ef) {
  AdjointRecipe r;
  if (spec.kind == CostKind::PointIntensity) {
    Dipole d;
    d.position = spec.point;
    d.moment = 1.0;
    d.direction = ef.point.conjugate();
    r.sources.push_back({d, 1.0});
    return r;
  }
  const LineField& ed = spec.target;
  const LineField& f = ef.line;
  check_same_nodes(ed, f);
  const std::size_t n = f.size();
  std::vector<double> ones(n, 1.0);
  switch (spec.kind) {
    case CostKind::ScalarProductMag: {
      const cplx m = similarity(ed, f);
      r.sources.push_back({weighted_conj(ed, ones), std::conj(m)});
      break;
    }
    case CostKind::NormOfDifference: {
      LineCurrent lc;
      lc.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) lc.samples[i] = (f.values[i] - ed.values[i]).conjugate();
      r.sources.push_back({lc, 1.0});
      break;
    }
    case CostKind::AngleBetweenFields: {
      const cplx m = similarity(ed, f);
      r.m2 = std::norm(m);
      r.ef2 = f.norm2();
      r.ed2 = ed.norm2();
      guard(r.ef2, "||Ef||^2");
      guard(r.ed2, "||Ed||^2");
      r.rule = CombineRule::AngleQuotient;
      r.sources.push_back({weighted_conj(ed, ones), std::conj(m)});
      r.sources.push_back({weighted_conj(f, ones), 1.0});
      break;
    }
    case CostKind::SquaredNormDiff: {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = f.values[i].squaredNorm() - ed.values[i].squaredNorm();
      r.sources.push_back({weighted_conj(f, s), 2.0});
      break;
    }
    case CostKind::AngleBetweenSquares: {
      const SquareSums sums = square_sums(ed, f);
      guard(sums.g, "integral of |Ef|^4");
      guard(sums.h, "integral of |Ed|^4");
      r.f = sums.f;
      r.g = sums.g;
      r.h = sums.h;
      r.rule = CombineRule::SquaresQuotient;
      std::vector<double> sd(n), sf(n);
      for (std::size_t i = 0; i < n; ++i) {
        sd[i] = ed.values[i].squaredNorm();
        sf[i] = f.values[i].squaredNorm();
      }
      r.sources.push_back({weighted_conj(f, sd), 1.0});
      r.sources.push_back({weighted_conj(f, sf), 2.0});
      break;
    }
    case CostKind::PointIntensity:
      break;
  }
  return r;
}

double combine_partials(const AdjointRecipe& recipe, std::span<const double> g) {
  if (g.size() != recipe.sources.size())
    throw Error("per-source gradient count does not match the adjoint recipe");
  switch (recipe.rule) {
    case CombineRule::Single:
      return g[0];
    case CombineRule::AngleQuotient:
      return (recipe.ef2 * g[0] - recipe.m2 * g[1]) / (recipe.ed2 * recipe.ef2 * recipe.ef2);
    case CombineRule::SquaresQuotient:
      return (2.0 * recipe.f * g[0] * recipe.g - recipe.f * recipe.f * g[1]) /
             (recipe.g * recipe.g * recipe.h);
  }
  return 0.0;
}

LineField build_target_focus(std::span<const Vec2> focal_points, cplx j0, const Scene& scene) {
  const ExitLine& line = scene.exit_line;
  std::vector<CVec2> values(line.size(), CVec2::Zero());
  const double k0 = scene.k0(), omega = scene.omega();
  const CVec2 j = j0 * CVec2(0.0, 1.0);
  for (const Vec2& x0 : focal_points) {
    if (line.size() > 0 && segment_distance(x0, line.a, line.b) < 1e-12)
      throw SingularityError("focal point lies on the exit line");
    for (std::size_t i = 0; i < line.size(); ++i)
      values[i] += green_tensor(line.points[i], x0, k0, omega, phys::eps0).apply(j);
  }
  for (auto& v : values) v = v.conjugate().eval();
  return LineField::on(line, std::move(values));
}

}  // namespace metasurf
