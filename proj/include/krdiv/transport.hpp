#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "krdiv/measures.hpp"

namespace krdiv {

/// Default arc budget for the exact transportation solver.
inline constexpr std::size_t kArcBudget = 4'000'000;

double euclidean_distance(std::span<const double> x, std::span<const double> y);

/// Optimal coupling of two discrete measures under Euclidean ground cost.
struct TransportPlan {
  struct Arc {
    std::size_t src;
    std::size_t dst;
    double flow;
    double cost_contrib;
  };
  std::vector<Arc> arcs;
  double cost = 0.0;
  /// Kantorovich potentials with u_i + v_j <= |x_i - y_j|.
  std::vector<double> source_potential;
  std::vector<double> target_potential;
  double dual_objective = 0.0;
  /// max(u_i + v_j - c_ij) over all pairs, and |c_ij - u_i - v_j| over used arcs.
  double certificate_violation = 0.0;
  /// Largest deviation of a row or column sum from its marginal.
  double marginal_error = 0.0;
};

/// Exact balanced transportation by successive shortest paths with potentials.
TransportPlan w1_lp(const DiscreteMeasure& a, const DiscreteMeasure& b,
                    std::size_t arc_budget = kArcBudget);

/// 1-Lipschitz potential on the union support of two discrete measures.
struct DualPotential {
  std::size_t dim = 0;
  std::vector<double> support;  // row-major atoms
  std::vector<double> values;
  /// max |f(x) - f(y)| / |x - y| over all support pairs.
  double lipschitz_cert = 0.0;

  std::size_t size() const { return values.size(); }
  std::span<const double> atom(std::size_t i) const { return {support.data() + i * dim, dim}; }
  /// McShane extension min_i (f_i + |x - z_i|); 1-Lipschitz on all of R^n.
  double extend(std::span<const double> x) const;
};

struct DualBound {
  double value = 0.0;
  DualPotential potential;
  std::size_t lp_iterations = 0;
  std::size_t constraint_rounds = 0;
};

/// Maximizes sum_i f_i (b_i - a_i) over 1-Lipschitz f on the union support.
/// Solved as a transshipment LP by the revised simplex; all pair constraints up
/// to `full_pair_limit` atoms, constraint generation beyond.
DualBound w1_dual_lb(const DiscreteMeasure& a, const DiscreteMeasure& b,
                     std::size_t full_pair_limit = 300);

/// W1 of two one-dimensional mixtures: trapezoid rule on |F0 - F1| over an
/// interval covering +-8 sigma of every component.
double w1_exact_1d(const GaussianMixture& nu0, const GaussianMixture& nu1,
                   std::size_t resolution = 20001);

/// Replication seed: splitmix64(seed + 2 r + side), side 0 for nu0 and 1 for nu1.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep, unsigned side);

struct W1Estimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<double> replications;
};

/// Mean and standard error of the exact LP cost over R independent sample pairs.
W1Estimate w1_estimate(const GaussianMixture& nu0, const GaussianMixture& nu1,
                       std::size_t samples, std::size_t replications, std::uint64_t seed);

/// W1 estimates of the projections onto the first k coordinates, k = 1..n.
/// Every replication projects the same full-dimensional samples, so each
/// replication's values are non-decreasing in k.
struct ProjectedCurve {
  std::vector<W1Estimate> by_k;
  /// Largest decrease from k to k + 1 within any single replication.
  double worst_decrease = 0.0;
};

ProjectedCurve projected_w1_curve(const GaussianMixture& nu0, const GaussianMixture& nu1,
                                  std::size_t samples, std::size_t replications, std::uint64_t seed);

/// Certified lower bound: max over unit directions theta of the exact 1-D W1
/// of the projected mixtures (x -> <theta, x> is 1-Lipschitz).
double w1_sliced_lower_bound(const GaussianMixture& nu0, const GaussianMixture& nu1,
                             std::size_t directions = 64);

/// Integral of the extended potential against nu1 - nu0.
double dual_potential_bound(const DualPotential& f, const GaussianMixture& nu0,
                            const GaussianMixture& nu1, unsigned nodes_per_axis);

struct SmoothingStability {
  double t = 0.0;
  double bound = 0.0;      // sqrt(n) ||alpha - T_t alpha||
  double measured = 0.0;   // |W1(T_t nu0, T_t nu1) - W1(nu0, nu1)|
  double std_error = 0.0;  // zero when the 1-D exact oracle is used
  double tolerance = 0.0;
  bool pass = false;
};

struct SmoothingOptions {
  unsigned degree = 12;
  unsigned nodes_per_axis = 40;
  std::size_t samples = 500;
  std::size_t replications = 20;
  std::uint64_t seed = 0;
};

SmoothingStability smoothing_stability(const GaussianMixture& nu0, const GaussianMixture& nu1,
                                       double t, const SmoothingOptions& options);

void write_plan_csv(std::ostream& os, const TransportPlan& plan);
void write_dual_csv(std::ostream& os, const DualPotential& potential);

}  // namespace krdiv
