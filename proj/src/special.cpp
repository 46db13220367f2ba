#include "metasurf/special.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <string>

#include "metasurf/error.hpp"

namespace metasurf {

namespace {

using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

void check_argument(double z) {
  if (!(z > 0.0) || !std::isfinite(z))
    throw DomainError("hankel2: argument must be positive and finite, got " + std::to_string(z));
}

}  // namespace

cplx hankel2(int order, double z) {
  if (order != 0 && order != 1) throw DomainError("hankel2: order must be 0 or 1");
  check_argument(z);
  const double j = boost::math::cyl_bessel_j(order, z, Policy());
  const double y = boost::math::cyl_neumann(order, z, Policy());
  return {j, -y};
}

std::pair<cplx, cplx> hankel2_01(double z) {
  check_argument(z);
  const double j0 = boost::math::cyl_bessel_j(0, z, Policy());
  const double j1 = boost::math::cyl_bessel_j(1, z, Policy());
  const double y0 = boost::math::cyl_neumann(0, z, Policy());
  const double y1 = boost::math::cyl_neumann(1, z, Policy());
  return {{j0, -y0}, {j1, -y1}};
}

GreenTensor green_tensor(const Eigen::Vector2d& obs, const Eigen::Vector2d& src, double k,
                         double omega, double eps) {
  const double x = obs.x() - src.x();
  const double y = obs.y() - src.y();
  const double rho = std::hypot(x, y);
  if (rho < 1e-12) throw SingularityError("green_tensor: observation point coincides with source");
  const double kr = k * rho;
  const auto [h0, h1] = hankel2_01(kr);
  const cplx pre = -k / (4.0 * omega * eps * rho * rho * rho);
  GreenTensor g;
  g.g11 = pre * (kr * y * y * h0 + (x * x - y * y) * h1);
  g.g12 = pre * (2.0 * h1 - kr * h0) * (x * y);
  g.g21 = g.g12;
  g.g22 = pre * (kr * x * x * h0 + (y * y - x * x) * h1);
  return g;
}

}  // namespace metasurf
