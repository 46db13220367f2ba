#pragma once

#include <span>
#include <vector>

namespace metasurf {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

/// Returns the n-point rule; results are cached per n and thread-safe.
const GaussRule& gauss_legendre(int n);

/// Barycentric Lagrange interpolation through fixed nodes.
class LagrangeBasis {
 public:
  explicit LagrangeBasis(std::span<const double> nodes);

  /// Fills out[j] = L_j(t).
  void evaluate(double t, std::span<double> out) const;
  /// Differentiation matrix D(i, j) = L_j'(t_i), row-major, size n*n.
  const std::vector<double>& differentiation() const { return diff_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<double> nodes_;
  std::vector<double> bary_;
  std::vector<double> diff_;
};

/// Basis cached per Gauss order.
const LagrangeBasis& gauss_lagrange_basis(int n);

}  // namespace metasurf
