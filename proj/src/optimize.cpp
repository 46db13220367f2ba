#include "metasurf/optimize.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numbers>

#include "metasurf/error.hpp"

namespace metasurf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SolverCounters diff(const SolverCounters& a, const SolverCounters& b) {
  return {a.assemblies - b.assemblies, a.factorizations - b.factorizations,
          a.forward_solves - b.forward_solves, a.adjoint_solves - b.adjoint_solves};
}

LinearSystem make_system(const Scene& scene, const std::vector<MeshTopology>* topologies) {
  BoundaryMesh mesh = build_mesh(scene, topologies);
  return LinearSystem(scene, std::move(mesh));
}

double wrap_angle(double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  t = std::fmod(t + std::numbers::pi, two_pi);
  if (t <= 0.0) t += two_pi;
  return t - std::numbers::pi;
}

}  // namespace

DesignPoint::DesignPoint(const Scene& scene, const std::vector<MeshTopology>* topologies)
    : system_(make_system(scene, topologies)),
      forward_(system_.solve(scene.incident, Excitation::Forward)) {
  const ExitLine& line = system_.scene().exit_line;
  if (line.size() > 0) line_ = LineField::on(line, evaluate_E(system_, forward_, line.points));
}

ForwardSample DesignPoint::sample(const CostSpec& spec) const {
  ForwardSample s;
  s.line = line_;
  if (spec.kind == CostKind::PointIntensity) {
    const std::vector<Vec2> x0{spec.point};
    s.point = evaluate_E(system_, forward_, x0)[0];
  }
  return s;
}

double DesignPoint::cost(const CostSpec& spec) const { return evaluate_cost(spec, sample(spec)); }

GradientVector DesignPoint::gradient(const CostSpec& spec, const ActiveParams& active) const {
  const AdjointRecipe recipe = adjoint_recipe(spec, sample(spec));
  std::vector<BoundarySolution> adjoints;
  adjoints.reserve(recipe.sources.size());
  for (std::size_t s = 0; s < recipe.sources.size(); ++s)
    adjoints.push_back(system_.solve(recipe.sources[s].source, Excitation::Adjoint,
                                     static_cast<int>(s)));
  return full_gradient(system_, forward_, recipe, adjoints, active);
}

DesignEvaluation evaluate_design(const Scene& scene, const CostSpec& spec,
                                 const ActiveParams& active,
                                 const std::vector<MeshTopology>* topologies) {
  const SolverCounters before = solver_counters();
  DesignEvaluation out;
  auto t0 = Clock::now();
  const LinearSystem system = make_system(scene, topologies);
  out.diagnostics.assemble_seconds = seconds_since(t0);
  t0 = Clock::now();
  const BoundarySolution forward = system.solve(scene.incident, Excitation::Forward);
  ForwardSample sample;
  if (scene.exit_line.size() > 0)
    sample.line = LineField::on(scene.exit_line, evaluate_E(system, forward, scene.exit_line.points));
  if (spec.kind == CostKind::PointIntensity) {
    const std::vector<Vec2> x0{spec.point};
    sample.point = evaluate_E(system, forward, x0)[0];
  }
  out.cost = evaluate_cost(spec, sample);
  out.diagnostics.forward_seconds = seconds_since(t0);
  t0 = Clock::now();
  const AdjointRecipe recipe = adjoint_recipe(spec, sample);
  std::vector<BoundarySolution> adjoints;
  for (std::size_t s = 0; s < recipe.sources.size(); ++s)
    adjoints.push_back(system.solve(recipe.sources[s].source, Excitation::Adjoint,
                                    static_cast<int>(s)));
  out.gradient = full_gradient(system, forward, recipe, adjoints, active);
  out.diagnostics.adjoint_seconds = seconds_since(t0);
  out.diagnostics.counts = diff(solver_counters(), before);
  return out;
}

double param_scale(Param p) { return (p == Param::Xc || p == Param::Yc) ? 100e-9 : 1.0; }

namespace {

class Driver {
 public:
  Driver(const Scene& scene, const CostSpec& spec, const ActiveParams& active,
         const OptimizeConfig& config)
      : base_(scene), spec_(spec), active_(active), config_(config),
        sign_(is_maximized(spec.kind) ? -1.0 : 1.0) {
    if (active.mask.size() != scene.atoms.size())
      throw Error("active parameter mask does not match the atom count");
    if (!(config.lambda_min > 0.0) || !(config.lambda_max >= config.lambda_min))
      throw Error("invalid lambda bounds");
    if (!(config.gradient_tolerance > 0.0) || !(config.step_tolerance > 0.0))
      throw Error("tolerances must be positive");
    box_ = config.centroid_box.value_or(default_box(scene));
    origin_.reserve(scene.atoms.size());
    for (const auto& a : scene.atoms) origin_.push_back(a.params.center());
  }

  Eigen::VectorXd initial() const {
    Eigen::VectorXd x(active_.size());
    for (std::size_t k = 0; k < active_.size(); ++k) {
      const auto [atom, p] = active_.entries[k];
      x[k] = get_param(base_.atoms[atom].params, p) / param_scale(p);
    }
    return x;
  }

  Scene scene_at(const Eigen::VectorXd& x) const {
    Scene s = base_;
    for (std::size_t k = 0; k < active_.size(); ++k) {
      const auto [atom, p] = active_.entries[k];
      set_param(s.atoms[atom].params, p, x[k] * param_scale(p));
    }
    return s;
  }

  /// Clamps to the box; theta is left unwrapped so steps stay continuous.
  Eigen::VectorXd project(Eigen::VectorXd x) const {
    for (std::size_t k = 0; k < active_.size(); ++k) {
      const auto [atom, p] = active_.entries[k];
      const double sc = param_scale(p);
      if (p == Param::LambdaX || p == Param::LambdaY) {
        x[k] = std::clamp(x[k], config_.lambda_min, config_.lambda_max);
      } else if (p == Param::Xc) {
        x[k] = std::clamp(x[k], (origin_[atom].x() - box_) / sc, (origin_[atom].x() + box_) / sc);
      } else if (p == Param::Yc) {
        x[k] = std::clamp(x[k], (origin_[atom].y() - box_) / sc, (origin_[atom].y() + box_) / sc);
      }
    }
    return x;
  }

  Eigen::VectorXd wrap(Eigen::VectorXd x) const {
    for (std::size_t k = 0; k < active_.size(); ++k)
      if (active_.entries[k].second == Param::Theta) x[k] = wrap_angle(x[k]);
    return x;
  }

  /// Throws GeometryError for infeasible layouts.
  std::unique_ptr<DesignPoint> evaluate(const Scene& s) const {
    const BoundaryMesh mesh = build_mesh(s);
    validate_scene(s, mesh, config_.overlap_margin);
    return std::make_unique<DesignPoint>(s);
  }

  std::vector<double> unscaled(const Eigen::VectorXd& g) const {
    std::vector<double> out(active_.size());
    for (std::size_t k = 0; k < active_.size(); ++k)
      out[k] = sign_ * g[k] / param_scale(active_.entries[k].second);
    return out;
  }

  Eigen::VectorXd scaled_gradient(const GradientVector& g) const {
    Eigen::VectorXd out(active_.size());
    for (std::size_t k = 0; k < active_.size(); ++k)
      out[k] = sign_ * g.values[k] * param_scale(active_.entries[k].second);
    return out;
  }

  double sign() const { return sign_; }

 private:
  static double default_box(const Scene& scene) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < scene.atoms.size(); ++a)
      for (std::size_t b = a + 1; b < scene.atoms.size(); ++b)
        d = std::min(d, (scene.atoms[a].params.center() - scene.atoms[b].params.center()).norm());
    return std::isfinite(d) ? 0.25 * d : 0.0;
  }

  const Scene& base_;
  const CostSpec& spec_;
  const ActiveParams& active_;
  const OptimizeConfig& config_;
  double sign_;
  double box_ = 0.0;
  std::vector<Vec2> origin_;
};

// Two-loop recursion for the L-BFGS direction.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd& g,
                                const std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& mem) {
  Eigen::VectorXd q = g;
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    const auto& [s, y] = mem[i];
    alpha[i] = s.dot(q) / y.dot(s);
    q -= alpha[i] * y;
  }
  if (!mem.empty()) {
    const auto& [s, y] = mem.back();
    q *= s.dot(y) / y.dot(y);
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const auto& [s, y] = mem[i];
    const double beta = y.dot(q) / y.dot(s);
    q += (alpha[i] - beta) * s;
  }
  return -q;
}

}  // namespace

DesignResult run_design(const Scene& scene, const CostSpec& spec, const ActiveParams& active,
                        const OptimizeConfig& config,
                        const std::function<void(const IterationRecord&)>& on_iteration,
                        const GradientFn& gradient_override) {
  Driver drv(scene, spec, active, config);
  DesignResult result;
  DesignTrajectory& traj = result.trajectory;

  auto grad_at = [&](const DesignPoint& pt) {
    return gradient_override ? gradient_override(pt.scene()) : pt.gradient(spec, active);
  };
  auto snapshot = [](const Scene& s) {
    std::vector<AffineParams> p;
    for (const auto& a : s.atoms) p.push_back(a.params);
    return p;
  };

  auto t0 = Clock::now();
  SolverCounters c0 = solver_counters();
  Eigen::VectorXd x = drv.initial();
  Scene current = drv.scene_at(x);
  std::unique_ptr<DesignPoint> point = drv.evaluate(current);
  double phi = drv.sign() * point->cost(spec);
  Eigen::VectorXd g = drv.scaled_gradient(grad_at(*point));
  const double g0 = g.norm();

  auto record = [&](int it, double step, int backtracks) {
    IterationRecord r;
    r.iteration = it;
    r.cost = drv.sign() * phi;
    r.gradient_norm = g.norm();
    r.gradient = drv.unscaled(g);
    r.step = step;
    r.backtracks = backtracks;
    r.params = snapshot(current);
    r.counts = diff(solver_counters(), c0);
    r.seconds = seconds_since(t0);
    traj.records.push_back(r);
    if (on_iteration) on_iteration(r);
    t0 = Clock::now();
    c0 = solver_counters();
  };
  record(0, 0.0, 0);

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
  if (g0 == 0.0) {
    traj.termination = "zero gradient at start";
  } else {
    for (int it = 1;; ++it) {
      if (g.norm() <= config.gradient_tolerance * g0) {
        traj.termination = "gradient tolerance";
        break;
      }
      if (it > config.max_iterations) {
        traj.termination = "iteration limit";
        break;
      }
      Eigen::VectorXd d = lbfgs_direction(g, memory);
      if (!(g.dot(d) < 0.0)) {
        memory.clear();
        d = -g;
      }
      double alpha = 1.0;
      if (memory.empty()) alpha = config.initial_step / d.cwiseAbs().maxCoeff();

      bool accepted = false, tiny = false;
      int backtracks = 0;
      Eigen::VectorXd x_new, s;
      std::unique_ptr<DesignPoint> trial;
      double phi_new = 0.0;
      for (; backtracks <= config.max_backtracks; ++backtracks, alpha *= config.backtrack) {
        x_new = drv.project(x + alpha * d);
        s = x_new - x;
        if (s.norm() < config.step_tolerance) {
          tiny = true;
          break;
        }
        try {
          trial = drv.evaluate(drv.scene_at(x_new));
        } catch (const GeometryError& e) {
          spdlog::debug("trial step rejected: {}", e.what());
          continue;
        }
        phi_new = drv.sign() * trial->cost(spec);
        if (phi_new <= phi + config.armijo_c1 * g.dot(s)) {
          accepted = true;
          break;
        }
      }
      if (tiny) {
        traj.termination = "step tolerance";
        break;
      }
      if (!accepted) {
        traj.termination = "line search failure";
        spdlog::warn("line search failed at iteration {}", it);
        break;
      }
      const Eigen::VectorXd g_new = drv.scaled_gradient(grad_at(*trial));
      const Eigen::VectorXd y = g_new - g;
      if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
        memory.emplace_back(s, y);
        if (static_cast<int>(memory.size()) > std::max(1, config.history)) memory.pop_front();
      }
      x = drv.wrap(x_new);
      current = drv.scene_at(x);
      point = std::move(trial);
      phi = phi_new;
      g = g_new;
      record(it, s.norm(), backtracks);
    }
  }
  result.scene = current;
  return result;
}

}  // namespace metasurf
