#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "metasurf/error.hpp"
#include "metasurf/special.hpp"

using namespace metasurf;

namespace {

using ld = long double;
using lcplx = std::complex<long double>;
constexpr ld kPiL = 3.141592653589793238462643383279502884L;
constexpr ld kGammaL = 0.577215664901532860606512090082402431L;

// Ascending series for J0, J1, Y0, Y1 in extended precision (z <= 20).
lcplx series_h2(int n, ld z) {
  const ld q = z * z / 4;
  ld j = 0, y_sum = 0, term = (n == 0) ? 1 : z / 2;
  ld harmonic = 0;  // H_k
  for (int k = 0; k < 200; ++k) {
    if (k > 0) {
      term *= -q / (static_cast<ld>(k) * (k + n));
      harmonic += 1.0L / k;
    }
    j += term;
    if (n == 0) {
      if (k > 0) y_sum -= harmonic * term;  // (-1)^(k+1) H_k q^k/(k!)^2
    } else {
      // psi(k+1) + psi(k+2) = -2 gamma + H_k + H_{k+1}
      y_sum += (-2 * kGammaL + 2 * harmonic + 1.0L / (k + 1)) * term;
    }
    if (std::abs(term) < 1e-30L * std::abs(j) && k > 5) break;
  }
  ld y;
  if (n == 0)
    y = 2 / kPiL * ((std::log(z / 2) + kGammaL) * j + y_sum);
  else
    y = -2 / (kPiL * z) + 2 / kPiL * std::log(z / 2) * j - y_sum / kPiL;
  return {j, -y};
}

// Hankel large-argument expansion (z > 20), terms down to the smallest.
lcplx asymptotic_h2(int n, ld z) {
  const ld mu = 4.0L * n * n;
  lcplx sum = 0, term = 1;
  ld prev = 1e300L;
  for (int k = 0; k < 60; ++k) {
    if (k > 0) {
      term *= lcplx(0, -1) * ((mu - (2 * k - 1) * (2 * k - 1)) / (k * 8.0L * z));
      if (std::abs(term) > prev) break;
    }
    prev = std::abs(term);
    sum += term;
  }
  const ld w = z - n * kPiL / 2 - kPiL / 4;
  return std::sqrt(2 / (kPiL * z)) * std::polar(1.0L, -w) * sum;
}

std::complex<double> oracle_h2(int n, double z) {
  const lcplx v = (z <= 20) ? series_h2(n, z) : asymptotic_h2(n, z);
  return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
}

}  // namespace

TEST(Special, ReferenceValueAtOne) {
  const cplx h0 = hankel2(0, 1.0);
  EXPECT_NEAR(h0.real(), 0.7651976866, 1e-10);
  EXPECT_NEAR(h0.imag(), -0.0882569642, 1e-10);
}

TEST(Special, MatchesIndependentOracleOnLogGrid) {
  double worst = 0.0, worst_z = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double z = std::pow(10.0, -6.0 + 10.0 * i / 999.0);
    for (int n : {0, 1}) {
      const cplx ref = oracle_h2(n, z);
      const double rel = std::abs(hankel2(n, z) - ref) / std::abs(ref);
      if (rel > worst) worst = rel, worst_z = z;
    }
  }
  EXPECT_LT(worst, 1e-10) << "at z = " << worst_z;
}

TEST(Special, PairedEvaluationAgrees) {
  for (double z : {1e-5, 0.3, 7.0, 123.0}) {
    const auto [h0, h1] = hankel2_01(z);
    EXPECT_EQ(h0, hankel2(0, z));
    EXPECT_EQ(h1, hankel2(1, z));
  }
}

TEST(Special, SmallArgumentAsymptote) {
  const double z = 1e-4;
  const cplx expect(0.0, 2.0 / (std::numbers::pi * z));
  EXPECT_NEAR(std::abs(hankel2(1, z) / expect), 1.0, 1e-7);
}

TEST(Special, Wronskian) {
  for (double z : {0.5, 5.0, 50.0}) {
    const cplx h0 = hankel2(0, z), h1 = hankel2(1, z);
    const double j0 = h0.real(), y0 = -h0.imag(), j1 = h1.real(), y1 = -h1.imag();
    const double w = j1 * y0 - j0 * y1;
    EXPECT_NEAR(w / (2.0 / (std::numbers::pi * z)), 1.0, 1e-10) << z;
  }
}

TEST(Special, DomainErrors) {
  EXPECT_THROW(hankel2(0, 0.0), DomainError);
  EXPECT_THROW(hankel2(1, -1.0), DomainError);
  EXPECT_THROW(hankel2(2, 1.0), DomainError);
}

namespace {

const double kLambda = 660e-9;
const double kK = 2 * std::numbers::pi / kLambda;
const double kEps0 = 8.8541878128e-12;
const double kOmega = kK * 299792458.0;

GreenTensor G(const Eigen::Vector2d& obs, const Eigen::Vector2d& src) {
  return green_tensor(obs, src, kK, kOmega, kEps0);
}

}  // namespace

TEST(Special, GreenTensorSymmetryAndTranspose) {
  const Eigen::Vector2d a(120e-9, -340e-9), b(-510e-9, 230e-9);
  const GreenTensor g = G(a, b), h = G(b, a);
  EXPECT_EQ(g.g12, g.g21);
  const double scale = g.matrix().norm();
  EXPECT_LT((g.matrix() - h.matrix().transpose()).norm(), 1e-12 * scale);
}

TEST(Special, GreenTensorSingularity) {
  const Eigen::Vector2d a(1e-7, 1e-7);
  EXPECT_THROW(G(a, a), SingularityError);
}

TEST(Special, GreenTensorFarFieldDecay) {
  const Eigen::Vector2d src(0, 0);
  const Eigen::Vector2d dir = Eigen::Vector2d(0.3, 1.0).normalized();
  // Least-squares slope of log|g11| against log rho over [50, 500] wavelengths,
  // sampled at whole wavelengths to sit on the envelope of the oscillation.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int m = 50; m <= 500; m += 10) {
    const double rho = m * kLambda + 0.125 * kLambda;
    const double x = std::log(rho), y = std::log(G(src + rho * dir, src).matrix().norm());
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, -0.5, 0.02);
}

TEST(Special, GreenTensorFieldIsSourceFreeAndSolvesHelmholtz) {
  // E = G J must satisfy div E = 0 and (lap + k^2) E = 0 away from the source.
  const Eigen::Vector2d src(0, 0);
  const Eigen::Vector2cd J(cplx(0.3, -0.1), cplx(1.0, 0.4));
  auto E = [&](double x, double y) { return G(Eigen::Vector2d(x, y), src).apply(J); };
  const double h = kLambda / 2000;
  for (const Eigen::Vector2d p : {Eigen::Vector2d(0.7 * kLambda, 0.4 * kLambda),
                                  Eigen::Vector2d(-1.3 * kLambda, 2.1 * kLambda)}) {
    const auto c = E(p.x(), p.y());
    const auto ex1 = E(p.x() + h, p.y()), ex0 = E(p.x() - h, p.y());
    const auto ey1 = E(p.x(), p.y() + h), ey0 = E(p.x(), p.y() - h);
    const cplx div = (ex1[0] - ex0[0]) / (2 * h) + (ey1[1] - ey0[1]) / (2 * h);
    EXPECT_LT(std::abs(div), 1e-5 * kK * c.norm());
    const Eigen::Vector2cd lap = (ex1 + ex0 + ey1 + ey0 - 4.0 * c) / (h * h);
    EXPECT_LT((lap + kK * kK * c).norm(), 1e-4 * kK * kK * c.norm());
  }
}
