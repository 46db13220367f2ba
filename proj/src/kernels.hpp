#pragma once

// Helmholtz kernels and near-singular quadrature shared by the solver.
// g(x, y) = -(j/4) H0(k |x - y|) solves (lap + k^2) g = -delta.

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "metasurf/geometry.hpp"

namespace metasurf {

/// Element pairs closer than near_factor(order) element lengths use product
/// integration; beyond it the plain Gauss rule is accurate to about 1e-14.
inline double near_factor(int order) { return std::max(2.0, 0.25 * std::pow(10.0, 7.0 / order)); }

/// Hankel values plus versions with their leading singular terms removed:
/// h1r = h1 - 2j/(pi z), h2r = h2 - 4j/(pi z^2).
struct Bessel {
  cplx h0, h1, h2, h1r, h2r;
};
Bessel bessel(double z);

/// Y1(z) + 2/(pi z) without cancellation.
double y1_regular(double z);

/// d = x - y; nx at the observer, ny at the source.
/// S = g, D = dg/dn_y, Kp = dg/dn_x, H = d2g/dn_x dn_y = Hreg + Hsing where
/// Hsing is the k-independent Laplace part.
struct Kern {
  cplx S, D, Kp, Hreg;
  double Hsing;
};
Kern kernel(double k, const Bessel& b, const Vec2& d, double rho, const Vec2& nx, const Vec2& ny);

/// Kernels and observer gradients for field evaluation.
struct GradKern {
  cplx S, D;
  CVec2 gradS, gradD;
};
GradKern grad_kernel(double k, const Bessel& b, const Vec2& d, double rho, const Vec2& ny);

struct QuadPoint {
  double t;
  double w;
};

/// Composite Gauss rule on [-1, 1] graded toward t_star; `delta` is the
/// distance of the singularity from the real axis in parameter units.
void graded_rule(double t_star, double delta, std::vector<QuadPoint>& rule);

/// Parameter of the point of E closest to x, and that distance.
std::pair<double, double> closest_parameter(const Element& E, const Vec2& x);

/// Product-integration weights of one element for one collocation row.
struct NearWeights {
  std::array<cplx, 32> du, dq, nu, nq;  // field row vs u / q, flux row vs u / q
};

/// k1 = 0 marks an element of another atom (exterior kernels only).
void near_matrix_weights(const Element& E, const Vec2& x, const Vec2& nx, bool self, double t_self,
                         double k0, double k1, double eps_r, NearWeights& out,
                         std::vector<QuadPoint>& rule);

}  // namespace metasurf
