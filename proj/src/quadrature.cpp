#include "krdiv/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "krdiv/chaos.hpp"

namespace krdiv {

GaussRule gauss_hermite_rule(unsigned q) {
  if (q == 0) throw std::invalid_argument("gauss_hermite_rule: q must be >= 1");

  // Jacobi matrix of the orthonormal recurrence x h_k = sqrt(k+1) h_{k+1} + sqrt(k) h_{k-1}.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(q, q);
  for (unsigned k = 1; k < q; ++k) {
    jacobi(k, k - 1) = std::sqrt(double(k));
    jacobi(k - 1, k) = std::sqrt(double(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("gauss_hermite_rule: eigenvalue iteration failed for q=" +
                             std::to_string(q));

  GaussRule rule;
  rule.nodes.resize(q);
  rule.weights.resize(q);
  std::vector<double> h(q + 1);
  for (unsigned j = 0; j < q; ++j) {
    double x = eig.eigenvalues()(j);
    // Newton on h_q, using h_q' = sqrt(q) h_{q-1}.
    for (int it = 0; it < 8; ++it) {
      hermite_table(q, x, h);
      const double step = h[q] / (std::sqrt(double(q)) * h[q - 1]);
      if (!std::isfinite(step))
        throw std::runtime_error("gauss_hermite_rule: node refinement diverged for q=" +
                                 std::to_string(q));
      x -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    hermite_table(q - 1, x, h);
    double s = 0.0;
    for (unsigned k = 0; k < q; ++k) s += h[k] * h[k];
    if (!std::isfinite(s) || s <= 0.0)
      throw std::runtime_error("gauss_hermite_rule: weight computation overflowed for q=" +
                               std::to_string(q));
    rule.nodes[j] = x;
    rule.weights[j] = 1.0 / s;
  }
  // Symmetrize to remove the last ulp of asymmetry from the eigensolver.
  for (unsigned j = 0; j < q / 2; ++j) {
    const unsigned r = q - 1 - j;
    const double x = 0.5 * (rule.nodes[r] - rule.nodes[j]);
    const double w = 0.5 * (rule.weights[r] + rule.weights[j]);
    rule.nodes[j] = -x;
    rule.nodes[r] = x;
    rule.weights[j] = rule.weights[r] = w;
  }
  if (q % 2 == 1) rule.nodes[q / 2] = 0.0;

  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

QuadratureGrid gauss_hermite_grid(std::size_t dim, unsigned nodes_per_axis) {
  if (dim == 0) throw std::invalid_argument("gauss_hermite_grid: dim must be positive");
  const GaussRule rule = gauss_hermite_rule(nodes_per_axis);
  std::size_t count = 1;
  for (std::size_t i = 0; i < dim; ++i) count *= nodes_per_axis;

  QuadratureGrid grid;
  grid.dim = dim;
  grid.nodes_per_axis = nodes_per_axis;
  grid.description = "gauss-hermite q=" + std::to_string(nodes_per_axis) + " per axis";
  grid.coords.resize(count * dim);
  grid.weights.resize(count);
  std::vector<unsigned> idx(dim, 0);
  for (std::size_t j = 0; j < count; ++j) {
    double w = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      grid.coords[j * dim + i] = rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    grid.weights[j] = w;
    // last axis fastest
    for (std::size_t i = dim; i-- > 0;) {
      if (++idx[i] < nodes_per_axis) break;
      idx[i] = 0;
    }
  }
  return grid;
}

PointSet monte_carlo_points(std::size_t dim, std::size_t count, std::uint64_t seed) {
  if (dim == 0 || count == 0) throw std::invalid_argument("monte_carlo_points: empty request");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  PointSet ps;
  ps.description = "monte-carlo N=" + std::to_string(count);
  ps.dim = dim;
  ps.coords.resize(dim * count);
  for (double& c : ps.coords) c = normal(rng);
  ps.weights.assign(count, 1.0 / double(count));
  return ps;
}

}  // namespace krdiv
