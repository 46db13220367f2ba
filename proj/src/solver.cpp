#include "metasurf/solver.hpp"

#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>

#include "kernels.hpp"
#include "metasurf/error.hpp"
#include "metasurf/quadrature.hpp"
#include "metasurf/special.hpp"

namespace metasurf {

namespace {

constexpr cplx kJ{0.0, 1.0};

std::atomic<long> n_assemblies{0};
std::atomic<long> n_factorizations{0};
std::atomic<long> n_forward{0};
std::atomic<long> n_adjoint{0};

// Contribution of one point current (density j, quadrature weight w) at y.
void add_point_current(HField& out, const Vec2& x, const Vec2& y, const CVec2& j, double w,
                       double k) {
  const Vec2 d = x - y;
  const double rho = d.norm();
  if (rho < 1e-12) throw SingularityError("incident field evaluated on its source");
  const Bessel b = bessel(k * rho);
  const cplx f = b.h1 / rho;
  const Vec2 grad_f_dir = d / (rho * rho);
  const cplx c = d.x() * j.y() - d.y() * j.x();
  const cplx pre = kJ * k / 4.0 * w;
  out.h += pre * f * c;
  out.grad += pre * (-k * b.h2 * grad_f_dir * c + f * CVec2(j.y(), -j.x()));
}

std::size_t atom_of_point(const BoundaryMesh& mesh, const Vec2& x, Side side) {
  const std::size_t none = mesh.atom_count();
  if (side == Side::Exterior) return none;
  for (std::size_t a = 0; a < mesh.atom_count(); ++a)
    if (inside(mesh.atom_panels(a), x)) return a;
  if (side == Side::Interior) {
    std::size_t best = none;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mesh.atom_count(); ++a)
      for (const auto& p : mesh.atom_panels(a))
        if (double d = (p.point - x).norm(); d < dist) dist = d, best = a;
    return best;
  }
  return none;
}

}  // namespace

HField incident_h(const IncidentSpec& spec, const Scene& scene, const Vec2& x) {
  const double k0 = scene.k0();
  HField out{0.0, CVec2::Zero()};
  if (const auto* pw = std::get_if<PlaneWave>(&spec)) {
    const cplx h = pw->amplitude / phys::eta0 * std::exp(-kJ * k0 * x.x());
    out.h = h;
    out.grad = CVec2(-kJ * k0 * h, 0.0);
  } else if (const auto* lc = std::get_if<LineCurrent>(&spec)) {
    const ExitLine& line = scene.exit_line;
    if (lc->samples.size() != line.size())
      throw Error("line current sample count does not match the exit-line quadrature");
    for (std::size_t k = 0; k < line.size(); ++k)
      add_point_current(out, x, line.points[k], lc->samples[k], line.weights[k], k0);
  } else {
    const auto& dp = std::get<Dipole>(spec);
    add_point_current(out, x, dp.position, dp.current(), 1.0, k0);
  }
  return out;
}

std::vector<CVec2> incident_field(const IncidentSpec& spec, const Scene& scene,
                                  std::span<const Vec2> points) {
  const double k0 = scene.k0();
  const double omega = scene.omega();
  std::vector<CVec2> out(points.size(), CVec2::Zero());
  if (const auto* pw = std::get_if<PlaneWave>(&spec)) {
    for (std::size_t i = 0; i < points.size(); ++i)
      out[i] = CVec2(0.0, pw->amplitude * std::exp(-kJ * k0 * points[i].x()));
  } else if (const auto* lc = std::get_if<LineCurrent>(&spec)) {
    const ExitLine& line = scene.exit_line;
    if (lc->samples.size() != line.size())
      throw Error("line current sample count does not match the exit-line quadrature");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (line.size() > 0 && segment_distance(points[i], line.a, line.b) < 1e-9 * line.length())
        spdlog::warn("incident field evaluated on the source line; result is a principal value");
      for (std::size_t k = 0; k < line.size(); ++k) {
        if ((points[i] - line.points[k]).norm() < 1e-12) continue;
        out[i] += green_tensor(points[i], line.points[k], k0, omega, phys::eps0).apply(
                      lc->samples[k]) *
                  line.weights[k];
      }
    }
  } else {
    const auto& dp = std::get<Dipole>(spec);
    const CVec2 j = dp.current();
    for (std::size_t i = 0; i < points.size(); ++i)
      out[i] = green_tensor(points[i], dp.position, k0, omega, phys::eps0).apply(j);
  }
  return out;
}

SolverCounters solver_counters() {
  return {n_assemblies.load(), n_factorizations.load(), n_forward.load(), n_adjoint.load()};
}

void reset_solver_counters() {
  n_assemblies = 0;
  n_factorizations = 0;
  n_forward = 0;
  n_adjoint = 0;
}

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

LinearSystem::LinearSystem(const Scene& scene, BoundaryMesh mesh)
    : scene_(scene), mesh_(std::move(mesh)) {
  if (scene_.atoms.size() != mesh_.atom_count())
    throw Error("mesh and scene disagree on the number of atoms");
  const std::size_t n = mesh_.panels.size();
  const double k0 = scene_.k0();
  matrix_.setZero(2 * n, 2 * n);
  const int order = mesh_.order;
  const auto& panels = mesh_.panels;
  const auto& elements = mesh_.elements;
  std::exception_ptr error;

#pragma omp parallel
  {
    NearWeights near;
    std::vector<QuadPoint> rule;
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
      try {
        const std::size_t i = static_cast<std::size_t>(ii);
        const Panel& pi = panels[i];
        const int row_atom = pi.atom;
        const double e = scene_.atoms[row_atom].eps_r;
        const double k1 = k0 * std::sqrt(e);
        for (std::size_t el = 0; el < elements.size(); ++el) {
          const Element& E = elements[el];
          const bool same = E.atom == row_atom;
          const bool self = static_cast<int>(el) == pi.element;
          const std::size_t c0 = E.first_panel;
          if (self || (pi.point - E.midpoint).norm() < near_factor(E.order) * E.length) {
            const double t_i = self ? gauss_legendre(order).nodes[i - c0] : 0.0;
            near_matrix_weights(E, pi.point, pi.normal, self, t_i, k0, same ? k1 : 0.0, e, near,
                                rule);
            for (int j = 0; j < order; ++j) {
              matrix_(i, c0 + j) += near.du[j];
              matrix_(i, n + c0 + j) += near.dq[j];
              matrix_(n + i, c0 + j) += near.nu[j];
              matrix_(n + i, n + c0 + j) += near.nq[j];
            }
            continue;
          }
          for (int j = 0; j < order; ++j) {
            const Panel& pj = panels[c0 + j];
            const Vec2 d = pi.point - pj.point;
            const double rho = d.norm();
            const Kern g0 = kernel(k0, bessel(k0 * rho), d, rho, pi.normal, pj.normal);
            const double w = pj.length;
            if (same) {
              const Kern g1 = kernel(k1, bessel(k1 * rho), d, rho, pi.normal, pj.normal);
              matrix_(i, c0 + j) += (g1.D - e * g0.D) * w;
              matrix_(i, n + c0 + j) += e * (g0.S - g1.S) * w;
              matrix_(n + i, c0 + j) += (g1.Hreg - g0.Hreg) * w;
              matrix_(n + i, n + c0 + j) += (g0.Kp - e * g1.Kp) * w;
            } else {
              matrix_(i, c0 + j) += -e * g0.D * w;
              matrix_(i, n + c0 + j) += e * g0.S * w;
              matrix_(n + i, c0 + j) += -(g0.Hreg + g0.Hsing) * w;
              matrix_(n + i, n + c0 + j) += g0.Kp * w;
            }
          }
        }
        matrix_(i, i) += 0.5 * (1.0 + e);
        matrix_(n + i, n + i) += 0.5 * (1.0 + e);
      } catch (...) {
#pragma omp critical(metasurf_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  // Unknowns (u, q / k0) and flux rows divided by k0 give O(1) blocks.
  matrix_.rightCols(n) *= k0;
  matrix_.bottomRows(n) /= k0;
  ++n_assemblies;
  if (!matrix_.allFinite()) throw NumericalError("boundary system contains non-finite entries");

  if (n == 0) return;  // free space: nothing to factorize
  lu_.compute(matrix_);
  ++n_factorizations;
  const double rc = lu_.rcond();
  if (!std::isfinite(rc) || rc < 1e-14)
    throw NumericalError("boundary system is numerically singular (rcond " + std::to_string(rc) +
                         "); refine the mesh or check the geometry");
}

Eigen::VectorXcd LinearSystem::rhs(const IncidentSpec& spec) const {
  const std::size_t n = mesh_.panels.size();
  Eigen::VectorXcd b(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Panel& p = mesh_.panels[i];
    const HField f = incident_h(spec, scene_, p.point);
    b[i] = scene_.atoms[p.atom].eps_r * f.h;
    b[n + i] = (f.grad[0] * p.normal.x() + f.grad[1] * p.normal.y()) / scene_.k0();
  }
  return b;
}

BoundarySolution LinearSystem::solve(const IncidentSpec& spec, Excitation kind, int index) const {
  const Eigen::VectorXcd b = rhs(spec);
  const Eigen::VectorXcd x = b.size() > 0 ? Eigen::VectorXcd(lu_.solve(b)) : b;
  if (!x.allFinite()) throw NumericalError("boundary solve produced non-finite values");
  (kind == Excitation::Forward ? n_forward : n_adjoint)++;
  const std::size_t n = mesh_.panels.size();
  BoundarySolution s;
  s.mesh_id = mesh_.id;
  s.h = x.head(n);
  s.dh_dn_ext = x.tail(n) * scene_.k0();
  s.incident = spec;
  s.excitation = kind;
  s.index = index;
  return s;
}

double LinearSystem::residual(const BoundarySolution& solution) const {
  if (solution.mesh_id != mesh_.id) throw Error("solution belongs to a different mesh");
  const Eigen::VectorXcd b = rhs(solution.incident);
  Eigen::VectorXcd x(b.size());
  x << solution.h, solution.dh_dn_ext / scene_.k0();
  const double nb = b.norm();
  return nb > 0.0 ? (matrix_ * x - b).norm() / nb : (matrix_ * x).norm();
}

namespace {

struct PointField {
  cplx h;
  CVec2 grad;
};

PointField field_at(const LinearSystem& system, const BoundarySolution& sol, const Vec2& x,
                    Side side, bool include_incident, std::vector<QuadPoint>& rule) {
  const BoundaryMesh& mesh = system.mesh();
  const Scene& scene = system.scene();
  const double k0 = scene.k0();
  const std::size_t atom = atom_of_point(mesh, x, side);
  const bool interior = atom < mesh.atom_count();
  const double e = interior ? scene.atoms[atom].eps_r : 1.0;
  const double k = interior ? k0 * std::sqrt(e) : k0;
  // Interior: u = S1 (e q) - D1 u.  Exterior: u = u_inc + D0 u - S0 q.
  const double s_sign = interior ? e : -1.0;
  const double d_sign = interior ? -1.0 : 1.0;

  PointField out{0.0, CVec2::Zero()};
  if (!interior && include_incident) {
    const HField f = incident_h(sol.incident, scene, x);
    out.h = f.h;
    out.grad = f.grad;
  }
  const std::size_t first = interior ? mesh.element_offsets[atom] : 0;
  const std::size_t last = interior ? mesh.element_offsets[atom + 1] : mesh.elements.size();
  const int order = mesh.order;
  std::array<double, 32> basis{};
  for (std::size_t el = first; el < last; ++el) {
    const Element& E = mesh.elements[el];
    const std::size_t c0 = E.first_panel;
    if ((x - E.midpoint).norm() < near_factor(E.order) * E.length) {
      const auto [t_star, dist] = closest_parameter(E, x);
      const double min_len = [&] {
        double m = std::numeric_limits<double>::infinity();
        for (int j = 0; j < order; ++j) m = std::min(m, mesh.panels[c0 + j].length);
        return m;
      }();
      if (dist < 1e-14 * E.length)
        throw SingularityError("field evaluated on a meta-atom boundary");
      if (dist < 0.1 * min_len)
        spdlog::warn("field point within 0.1 panel length of a boundary; using graded quadrature");
      graded_rule(t_star, dist / E.velocity(t_star).norm(), rule);
      const LagrangeBasis& lb = gauss_lagrange_basis(order);
      for (const auto& qp : rule) {
        const Vec2 y = E.position(qp.t);
        const Vec2 vel = E.velocity(qp.t);
        const double sp = vel.norm();
        const Vec2 ny(vel.y() / sp, -vel.x() / sp);
        const Vec2 d = x - y;
        const double rho = d.norm();
        const GradKern g = grad_kernel(k, bessel(k * rho), d, rho, ny);
        lb.evaluate(qp.t, std::span(basis.data(), order));
        cplx u = 0.0, q = 0.0;
        for (int j = 0; j < order; ++j) {
          u += basis[j] * sol.h[c0 + j];
          q += basis[j] * sol.dh_dn_ext[c0 + j];
        }
        const double w = qp.w * sp;
        out.h += (d_sign * g.D * u + s_sign * g.S * q) * w;
        out.grad += (d_sign * g.gradD * u + s_sign * g.gradS * q) * w;
      }
      continue;
    }
    for (int j = 0; j < order; ++j) {
      const Panel& p = mesh.panels[c0 + j];
      const Vec2 d = x - p.point;
      const double rho = d.norm();
      const GradKern g = grad_kernel(k, bessel(k * rho), d, rho, p.normal);
      const cplx u = sol.h[c0 + j], q = sol.dh_dn_ext[c0 + j];
      out.h += (d_sign * g.D * u + s_sign * g.S * q) * p.length;
      out.grad += (d_sign * g.gradD * u + s_sign * g.gradS * q) * p.length;
    }
  }
  if (interior) out.grad /= e;  // E uses eps0 * eps_r inside
  return out;
}

void check_solution(const LinearSystem& system, const BoundarySolution& sol) {
  if (sol.mesh_id != system.mesh().id) throw Error("solution belongs to a different mesh");
}

}  // namespace

std::vector<CVec2> evaluate_E(const LinearSystem& system, const BoundarySolution& solution,
                              std::span<const Vec2> points, Side side, bool include_incident) {
  check_solution(system, solution);
  const cplx inv = 1.0 / (kJ * system.scene().omega() * phys::eps0);
  std::vector<CVec2> out(points.size());
  std::exception_ptr error;
#pragma omp parallel
  {
    std::vector<QuadPoint> rule;
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.size()); ++i) {
      try {
        const PointField f = field_at(system, solution, points[i], side, false, rule);
        out[i] = inv * CVec2(f.grad[1], -f.grad[0]);
        if (include_incident && atom_of_point(system.mesh(), points[i], side) == system.mesh().atom_count())
          out[i] += incident_field(solution.incident, system.scene(), std::span(&points[i], 1))[0];
      } catch (...) {
#pragma omp critical(metasurf_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<cplx> evaluate_H(const LinearSystem& system, const BoundarySolution& solution,
                             std::span<const Vec2> points, Side side) {
  check_solution(system, solution);
  std::vector<cplx> out(points.size());
  std::vector<QuadPoint> rule;
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] = field_at(system, solution, points[i], side, true, rule).h;
  return out;
}

BoundaryTraces boundary_E(const BoundaryMesh& mesh, const Scene& scene,
                          const BoundarySolution& solution) {
  if (solution.mesh_id != mesh.id) throw Error("solution belongs to a different mesh");
  const std::size_t n = mesh.panels.size();
  const int order = mesh.order;
  const cplx inv = 1.0 / (kJ * scene.omega() * phys::eps0);
  const GaussRule& rule = gauss_legendre(order);
  const std::vector<double>& dm = gauss_lagrange_basis(order).differentiation();
  BoundaryTraces tr;
  tr.en_ext.resize(n);
  tr.en_int.resize(n);
  tr.et.resize(n);
  for (const Element& E : mesh.elements) {
    const std::size_t c0 = E.first_panel;
    for (int i = 0; i < order; ++i) {
      cplx dudt = 0.0;
      for (int j = 0; j < order; ++j) dudt += dm[i * order + j] * solution.h[c0 + j];
      const cplx dus = dudt / E.velocity(rule.nodes[i]).norm();
      const std::size_t p = c0 + i;
      tr.en_ext[p] = inv * dus;
      tr.en_int[p] = tr.en_ext[p] / scene.atoms[mesh.panels[p].atom].eps_r;
      tr.et[p] = -inv * solution.dh_dn_ext[p];
    }
  }
  return tr;
}

}  // namespace metasurf
