#pragma once

// Hankel functions of the second kind and the TEz dyadic Green's tensor.
// Time convention e^{+jwt}; outgoing waves behave as H^(2).

#include <Eigen/Dense>

#include <complex>
#include <utility>

namespace metasurf {

using cplx = std::complex<double>;

/// H_n^(2)(z) = J_n(z) - i Y_n(z) for n in {0, 1}, z > 0.
cplx hankel2(int order, double z);

/// {H_0^(2)(z), H_1^(2)(z)} in one call.
std::pair<cplx, cplx> hankel2_01(double z);

/// Maps a line-current density at the source to E at the observer.
struct GreenTensor {
  cplx g11, g12, g21, g22;

  Eigen::Matrix2cd matrix() const {
    Eigen::Matrix2cd m;
    m << g11, g12, g21, g22;
    return m;
  }
  Eigen::Vector2cd apply(const Eigen::Vector2cd& j) const {
    return {g11 * j[0] + g12 * j[1], g21 * j[0] + g22 * j[1]};
  }
};

/// Throws SingularityError when |obs - src| < 1e-12 m.
GreenTensor green_tensor(const Eigen::Vector2d& obs, const Eigen::Vector2d& src, double k,
                         double omega, double eps);

}  // namespace metasurf
