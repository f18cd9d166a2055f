#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "krdiv/chaos.hpp"
#include "krdiv/quadrature.hpp"

namespace krdiv {

/// Thrown when a measure spec violates an invariant; the message names the field.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Finite Gaussian mixture on R^n. Components may have singular covariance
/// (point masses are allowed in storage); density evaluation rejects them.
class GaussianMixture {
 public:
  GaussianMixture(std::size_t dim, std::vector<GaussianComponent> components);

  static GaussianMixture standard(std::size_t dim);
  static GaussianMixture gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  std::size_t dim() const { return dim_; }
  const std::vector<GaussianComponent>& components() const { return components_; }

 private:
  std::size_t dim_;
  std::vector<GaussianComponent> components_;
};

/// Weighted atom cloud.
struct DiscreteMeasure {
  std::size_t dim = 0;
  std::vector<double> atoms;  // row-major
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  std::span<const double> atom(std::size_t i) const { return {atoms.data() + i * dim, dim}; }
  /// Throws unless weights are positive and sum to one within 1e-12.
  void validate() const;
};

/// d nu / d mu for a mixture nu, with per-component Cholesky factors cached.
class DensityRatio {
 public:
  explicit DensityRatio(const GaussianMixture& m);
  double operator()(std::span<const double> x) const;

 private:
  struct Term {
    double log_weight;
    Eigen::VectorXd mean;
    Eigen::LLT<Eigen::MatrixXd> chol;
    double half_log_det;
  };
  std::size_t dim_;
  std::vector<Term> terms_;
};

double density_vs_mu(const GaussianMixture& m, std::span<const double> x);

/// Action of T_t on a measure: (w, m, S) -> (w, e^-t m, e^-2t S + (1 - e^-2t) I).
GaussianMixture ou_smooth_measure(const GaussianMixture& m, double t);

/// (m + eps mu) / (1 + eps).
GaussianMixture epsilon_mix(const GaussianMixture& m, double eps);

/// Pushforward under x -> (x_1..x_k).
GaussianMixture project_measure(const GaussianMixture& m, std::size_t k);

/// E_mu[f | x_1..x_k]: keeps the coefficients whose index vanishes beyond k.
ChaosFn conditional_expectation(const ChaosFn& f, std::size_t k);

/// Reads the first k coordinates of a function that only depends on them.
/// Throws if f has a coefficient involving later coordinates.
ChaosFn restrict_to_leading(const ChaosFn& f, std::size_t k);

/// iid draws with uniform weights; component chosen by weight, then Gaussian.
DiscreteMeasure sample(const GaussianMixture& m, std::size_t count, std::uint64_t seed);

/// Chaos projection of d nu / d mu.
ChaosFn density_projection(const GaussianMixture& m, unsigned max_degree,
                           const QuadratureGrid& grid);

struct DifferenceDensity {
  ChaosFn alpha;
  /// Mean coefficient removed from the projection (quadrature error of the total mass).
  double mean_adjustment = 0.0;
};

/// Projection of d(nu1 - nu0)/d mu with its mean coefficient re-zeroed.
DifferenceDensity difference_density(const GaussianMixture& nu0, const GaussianMixture& nu1,
                                     unsigned max_degree, const QuadratureGrid& grid);

/// E_mu[(da/dmu)(db/dmu)] in closed form. Infinite when the product is not
/// mu-integrable (some pair of components has S_a^-1 + S_b^-1 - I not positive definite).
double density_inner(const GaussianMixture& a, const GaussianMixture& b);

/// Integral of f against the mixture using a Gauss-Hermite rule mapped
/// onto each component.
double integrate_mixture(const GaussianMixture& m, const Sampler& f, unsigned nodes_per_axis);

}  // namespace krdiv
