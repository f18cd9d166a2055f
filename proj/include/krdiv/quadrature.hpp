#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace krdiv {

/// Weighted point cloud in R^n used to approximate integrals against mu.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> coords;   // row-major, size() * dim
  std::vector<double> weights;  // sum to 1
  std::string description;

  std::size_t size() const { return weights.size(); }
  std::span<const double> point(std::size_t j) const {
    return {coords.data() + j * dim, dim};
  }
};

/// Tensorized Gauss-Hermite rule for the standard Gaussian weight.
class QuadratureGrid : public PointSet {
 public:
  unsigned nodes_per_axis = 0;

  /// Per-axis polynomial degree integrated exactly.
  unsigned exactness_degree() const { return 2 * nodes_per_axis - 1; }
};

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// One-dimensional q-point rule for N(0,1). Nodes come from the eigenvalues
/// of the Jacobi matrix, then Newton-polished on h_q; weights are the
/// Christoffel numbers 1 / sum_k h_k(x)^2.
GaussRule gauss_hermite_rule(unsigned q);

QuadratureGrid gauss_hermite_grid(std::size_t dim, unsigned nodes_per_axis);

/// Uniformly weighted iid N(0, I) draws.
PointSet monte_carlo_points(std::size_t dim, std::size_t count, std::uint64_t seed);

}  // namespace krdiv
