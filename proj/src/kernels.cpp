#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>

#include "metasurf/quadrature.hpp"

namespace metasurf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kJ{0.0, 1.0};
using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

constexpr int kSubOrder = 16;

}  // namespace

double y1_regular(double z) {
  const double j1 = boost::math::cyl_bessel_j(1, z, Policy());
  if (z >= 2.0) return boost::math::cyl_neumann(1, z, Policy()) + 2.0 / (kPi * z);
  // Y1 = -2/(pi z) + (2/pi) ln(z/2) J1 - (1/pi)(z/2) sum (psi(k+1)+psi(k+2)) (-z^2/4)^k / (k!(k+1)!)
  const double euler = 0.57721566490153286061;
  const double q = -0.25 * z * z;
  double psi1 = -euler;        // psi(k+1)
  double psi2 = 1.0 - euler;   // psi(k+2)
  double term = 1.0;           // q^k / (k!(k+1)!)
  double sum = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double add = (psi1 + psi2) * term;
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    psi1 += 1.0 / (k + 1);
    psi2 += 1.0 / (k + 2);
    term *= q / ((k + 1.0) * (k + 2.0));
  }
  return (2.0 / kPi) * std::log(0.5 * z) * j1 - 0.5 * z / kPi * sum;
}

Bessel bessel(double z) {
  const double j0 = boost::math::cyl_bessel_j(0, z, Policy());
  const double j1 = boost::math::cyl_bessel_j(1, z, Policy());
  const double y0 = boost::math::cyl_neumann(0, z, Policy());
  const double r1 = y1_regular(z);
  const double y1 = r1 - 2.0 / (kPi * z);
  Bessel b;
  b.h0 = {j0, -y0};
  b.h1 = {j1, -y1};
  b.h1r = {j1, -r1};
  // Y2 + 4/(pi z^2) = (2/z) R1 - Y0
  b.h2r = {2.0 * j1 / z - j0, -(2.0 * r1 / z - y0)};
  b.h2 = 2.0 * b.h1 / z - b.h0;
  return b;
}

Kern kernel(double k, const Bessel& b, const Vec2& d, double rho, const Vec2& nx, const Vec2& ny) {
  const double dnx = d.dot(nx);
  const double dny = d.dot(ny);
  const double r2 = rho * rho;
  const double p = -dnx * dny;
  const double nn = nx.dot(ny);
  const cplx pre = kJ * k / 4.0;
  Kern g;
  g.S = -0.25 * kJ * b.h0;
  g.D = -pre * b.h1 * dny / rho;
  g.Kp = pre * b.h1 * dnx / rho;
  g.Hreg = pre * (-k * b.h2r * p / r2 - b.h1r * nn / rho);
  g.Hsing = p / (kPi * r2 * r2) + nn / (2.0 * kPi * r2);
  return g;
}

GradKern grad_kernel(double k, const Bessel& b, const Vec2& d, double rho, const Vec2& ny) {
  const double dny = d.dot(ny);
  const cplx pre = kJ * k / 4.0;
  const CVec2 dc = d.cast<cplx>();
  const CVec2 nc = ny.cast<cplx>();
  GradKern g;
  g.S = -0.25 * kJ * b.h0;
  g.D = -pre * b.h1 * dny / rho;
  g.gradS = pre * b.h1 / rho * dc;
  g.gradD = -pre * (-k * b.h2 * dny / (rho * rho) * dc + b.h1 / rho * nc);
  return g;
}

void graded_rule(double t_star, double delta, std::vector<QuadPoint>& rule) {
  rule.clear();
  const GaussRule& gl = gauss_legendre(kSubOrder);
  const double floor = std::max(delta, 1e-10);
  auto add = [&](double lo, double hi) {
    const double h = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
    for (std::size_t k = 0; k < gl.size(); ++k) rule.push_back({m + h * gl.nodes[k], h * gl.weights[k]});
  };
  for (int dir : {1, -1}) {
    const double span = dir > 0 ? 1.0 - t_star : t_star + 1.0;
    double a = 0.0;
    while (a < span) {
      double b = std::min(span, a + std::max(3.0 * a, floor));
      if (span - b < 0.5 * (b - a)) b = span;
      if (dir > 0) add(t_star + a, t_star + b);
      else add(t_star - b, t_star - a);
      a = b;
    }
  }
}

std::pair<double, double> closest_parameter(const Element& E, const Vec2& x) {
  constexpr int kSamples = 17;
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kSamples; ++s) {
    const double t = -1.0 + 2.0 * s / (kSamples - 1);
    const double d = (E.position(t) - x).squaredNorm();
    if (d < best_d) best_d = d, best = s;
  }
  const double step = 2.0 / (kSamples - 1);
  double lo = std::max(-1.0, -1.0 + (best - 1) * step);
  double hi = std::min(1.0, -1.0 + (best + 1) * step);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = (E.position(c) - x).squaredNorm(), fd = (E.position(d) - x).squaredNorm();
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      hi = d, d = c, fd = fc;
      c = hi - g * (hi - lo);
      fc = (E.position(c) - x).squaredNorm();
    } else {
      lo = c, c = d, fc = fd;
      d = lo + g * (hi - lo);
      fd = (E.position(d) - x).squaredNorm();
    }
  }
  double t = 0.5 * (lo + hi);
  double dist2 = (E.position(t) - x).squaredNorm();
  for (double end : {-1.0, 1.0}) {
    const double de = (E.position(end) - x).squaredNorm();
    if (de < dist2) dist2 = de, t = end;
  }
  return {t, std::sqrt(dist2)};
}

void near_matrix_weights(const Element& E, const Vec2& x, const Vec2& nx, bool self, double t_self,
                         double k0, double k1, double eps_r, NearWeights& out,
                         std::vector<QuadPoint>& rule) {
  const int order = E.order;
  const LagrangeBasis& lb = gauss_lagrange_basis(order);
  for (int j = 0; j < order; ++j) out.du[j] = out.dq[j] = out.nu[j] = out.nq[j] = 0.0;
  if (self) {
    graded_rule(t_self, 0.0, rule);
  } else {
    const auto [t_star, dist] = closest_parameter(E, x);
    graded_rule(t_star, dist / E.velocity(t_star).norm(), rule);
  }
  std::array<double, 32> basis{};
  const double e = eps_r;
  for (const auto& qp : rule) {
    const Vec2 vel = E.velocity(qp.t);
    const double sp = vel.norm();
    const Vec2 ny(vel.y() / sp, -vel.x() / sp);
    const Vec2 d = self ? E.chord(t_self, qp.t) : Vec2(x - E.position(qp.t));
    const double rho = d.norm();
    const Kern g0 = kernel(k0, bessel(k0 * rho), d, rho, nx, ny);
    cplx cdu, cdq, cnu, cnq;
    if (k1 > 0.0) {
      const Kern g1 = kernel(k1, bessel(k1 * rho), d, rho, nx, ny);
      cdu = g1.D - e * g0.D;
      cdq = e * (g0.S - g1.S);
      cnu = g1.Hreg - g0.Hreg;
      cnq = g0.Kp - e * g1.Kp;
    } else {
      cdu = -e * g0.D;
      cdq = e * g0.S;
      cnu = -(g0.Hreg + g0.Hsing);
      cnq = g0.Kp;
    }
    lb.evaluate(qp.t, std::span(basis.data(), order));
    const double w = qp.w * sp;
    for (int j = 0; j < order; ++j) {
      const double bw = basis[j] * w;
      out.du[j] += cdu * bw;
      out.dq[j] += cdq * bw;
      out.nu[j] += cnu * bw;
      out.nq[j] += cnq * bw;
    }
  }
}

}  // namespace metasurf
