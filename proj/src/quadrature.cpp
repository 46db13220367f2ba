#include "metasurf/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace metasurf {

namespace {

GaussRule make_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-like initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GaussRule>(make_rule(n));
  return *slot;
}

LagrangeBasis::LagrangeBasis(std::span<const double> nodes)
    : nodes_(nodes.begin(), nodes.end()), bary_(nodes.size(), 1.0) {
  const std::size_t n = nodes_.size();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) bary_[j] /= (nodes_[j] - nodes_[k]);

  diff_.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
      diff_[i * n + j] = d;
      diag -= d;
    }
    diff_[i * n + i] = diag;
  }
}

void LagrangeBasis::evaluate(double t, std::span<double> out) const {
  const std::size_t n = nodes_.size();
  double denom = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double dt = t - nodes_[j];
    if (dt == 0.0) {
      for (std::size_t k = 0; k < n; ++k) out[k] = (k == j) ? 1.0 : 0.0;
      return;
    }
    out[j] = bary_[j] / dt;
    denom += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= denom;
}

const LagrangeBasis& gauss_lagrange_basis(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<LagrangeBasis>> cache;
  const GaussRule& rule = gauss_legendre(n);
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<LagrangeBasis>(rule.nodes);
  return *slot;
}

}  // namespace metasurf
