#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "metasurf/error.hpp"
#include "metasurf/verify.hpp"

namespace metasurf {

namespace {

constexpr cplx kJ{0.0, 1.0};

struct Cyl {
  double j, y, dj, dy;
};

// Z_n and Z_n' via the standard library (independent of the solver's backend).
Cyl cyl(int n, double x) {
  const double j = std::cyl_bessel_j(n, x);
  const double y = std::cyl_neumann(n, x);
  double dj, dy;
  if (n == 0) {
    dj = -std::cyl_bessel_j(1, x);
    dy = -std::cyl_neumann(1, x);
  } else {
    dj = std::cyl_bessel_j(n - 1, x) - n / x * j;
    dy = std::cyl_neumann(n - 1, x) - n / x * y;
  }
  return {j, y, dj, dy};
}

}  // namespace

std::vector<CVec2> cylinder_series(double radius, double eps_r, double lambda0, double amplitude,
                                   std::span<const Vec2> points) {
  if (!(radius > 0.0) || !(eps_r > 0.0) || !(lambda0 > 0.0))
    throw DomainError("cylinder_series: radius, eps_r and wavelength must be positive");
  constexpr double kEps0 = 8.8541878128e-12;
  constexpr double kMu0 = 1.25663706212e-6;
  const double k0 = 2.0 * std::numbers::pi / lambda0;
  const double omega = k0 / std::sqrt(kMu0 * kEps0);
  const double k1 = k0 * std::sqrt(eps_r);
  const double h_amp = amplitude / std::sqrt(kMu0 / kEps0);
  const double x0 = k0 * radius, x1 = k1 * radius;
  const double sq = std::sqrt(eps_r);

  // Exterior: H = H0 sum eps_n (-j)^n [J_n(k0 r) + a_n H_n(k0 r)] cos(n phi)
  // Interior: H = H0 sum eps_n (-j)^n c_n J_n(k1 r) cos(n phi)
  std::vector<cplx> a, c;
  double rmax = 0.0;
  for (const auto& p : points) rmax = std::max(rmax, p.norm());
  const double xmax = std::max({x0, x1, k0 * rmax, k1 * std::min(rmax, radius)});
  int converged_at = -1;
  for (int n = 0; n <= 200; ++n) {
    const Cyl o = cyl(n, x0), i = cyl(n, x1);
    const cplx h = {o.j, -o.y}, dh = {o.dj, -o.dy};
    const cplx an = (i.dj * o.j / sq - o.dj * i.j) / (dh * i.j - i.dj * h / sq);
    const cplx cn = std::abs(i.j) > std::abs(i.dj)
                        ? (o.j + an * h) / i.j
                        : sq * (o.dj + an * dh) / i.dj;
    a.push_back(an);
    c.push_back(cn);
    if (n > xmax + 10 && std::abs(an) < 1e-14 * std::abs(a[0]) + 1e-300 &&
        std::abs(cn) * std::abs(std::cyl_bessel_j(n, std::min(xmax, k1 * radius))) <
            1e-14 * std::abs(c[0])) {
      converged_at = n;
      break;
    }
  }
  if (converged_at < 0) throw NumericalError("cylinder_series: no convergence by order 200");

  std::vector<CVec2> out(points.size());
  const cplx inv = 1.0 / (kJ * omega * kEps0);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double r = points[p].norm();
    if (std::abs(r - radius) < 1e-15 * radius)
      throw DomainError("cylinder_series: point on the cylinder surface");
    const double phi = std::atan2(points[p].y(), points[p].x());
    const bool interior = r < radius;
    const double k = interior ? k1 : k0;
    cplx dr = 0.0, dphi = 0.0;
    cplx mj = 1.0;  // (-j)^n
    for (int n = 0; n <= converged_at; ++n) {
      const double en = n == 0 ? 1.0 : 2.0;
      const Cyl z = cyl(n, k * r);
      cplx f, df;
      if (interior) {
        f = c[n] * z.j;
        df = c[n] * z.dj;
      } else {
        f = a[n] * cplx(z.j, -z.y);
        df = a[n] * cplx(z.dj, -z.dy);
      }
      dr += en * mj * k * df * std::cos(n * phi);
      dphi += -en * mj * f * double(n) * std::sin(n * phi);
      mj *= -kJ;
    }
    dr *= h_amp;
    dphi *= h_amp / r;
    // gradient in Cartesian coordinates
    const double cs = std::cos(phi), sn = std::sin(phi);
    CVec2 grad(dr * cs - dphi * sn, dr * sn + dphi * cs);
    const double eps = interior ? eps_r : 1.0;
    CVec2 e = inv / eps * CVec2(grad[1], -grad[0]);
    if (!interior)
      e += CVec2(0.0, amplitude * std::exp(-kJ * k0 * points[p].x()));
    out[p] = e;
  }
  return out;
}

}  // namespace metasurf
