#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "krdiv/chaos.hpp"
#include "krdiv/measures.hpp"
#include "krdiv/quadrature.hpp"

namespace krdiv {

/// sum_j w_j |u(x_j)|.
double objective(const VectorField& u, const PointSet& points);

/// E|f| under N(0,1) for a one-dimensional chaos polynomial, without quadrature:
/// the line is split at the sign changes of f (scanned on [-12, 12], then bisected)
/// and each piece is integrated in closed form.
double abs_mean_1d(const ChaosFn& f);

struct MinimizeOptions {
  std::size_t budget = 400;  // reweighting iterations
  double tolerance = 1e-7;   // relative certified gap
};

/// Result of minimizing E|u| over {u : Iu = alpha - E alpha, deg u <= d}.
struct MinimizeResult {
  VectorField u_star = VectorField::zero(1);
  double value = 0.0;
  /// Accepted objective values, non-increasing.
  std::vector<double> trace;
  double residual = 0.0;
  unsigned degree = 0;
  std::string quadrature;
  double mean_adjustment = 0.0;
  std::size_t kernel_dim = 0;
  /// Lower bound from a feasible dual point; value - dual_value certifies accuracy.
  double dual_value = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// max over iterates of value - sqrt(sum_j w_j |u(x_j)|^2); must stay <= 0.
  double l1_l2_excess = 0.0;
};

/// Reweighted least squares on the kernel coordinates of the solution family.
/// Each iterate is feasible by construction; a dual certificate built from the
/// current residual field bounds the distance to the restricted optimum.
MinimizeResult minimize_l1(const ChaosFn& alpha, unsigned max_degree, const PointSet& points,
                           const MinimizeOptions& options = {});

struct ContinuityCheck {
  double n_alpha = 0.0, n_beta = 0.0;
  double lhs = 0.0;             // |N(alpha) - N(beta)|
  double rhs = 0.0;             // ||alpha - beta|| by Parseval
  double rhs_quadrature = 0.0;  // same norm by quadrature
  double tolerance = 0.0;
  bool pass = false;
};

ContinuityCheck n_continuity_check(const ChaosFn& alpha, const ChaosFn& beta, unsigned max_degree,
                                   const PointSet& points, const MinimizeOptions& options = {});

struct GapOptions {
  unsigned degree = 8;
  double epsilon = 0.05;  // recorded; callers apply epsilon_mix themselves
  unsigned nodes_per_axis = 40;
  std::size_t mc_points = 200000;
  std::size_t samples = 150;  // per side for the dual potential
  std::uint64_t seed = 0;
  /// When positive, the same alpha is also minimized over fields of degree
  /// degree + extra_degree (a larger feasible set).
  unsigned extra_degree = 0;
  MinimizeOptions minimize;
};

struct GapReport {
  std::size_t n = 0;
  unsigned d = 0;
  double epsilon = 0.0;
  double lower = 0.0;
  std::string lower_method;
  double lower_exact_1d = 0.0;  // n = 1 only
  double lower_sliced = 0.0;
  double lower_dual_potential = 0.0;
  double dual_lp_value = 0.0;  // on the samples, diagnostic
  double upper_v = 0.0;
  double upper_fu = 0.0;
  double upper_min = 0.0;
  std::optional<double> upper_min_raised;
  /// n = 1: the three upper bounds are evaluated by abs_mean_1d; these are
  /// the Gauss-Hermite values of E|v| and E|u*| for comparison.
  std::optional<double> upper_v_quadrature;
  std::optional<double> upper_min_quadrature;
  std::optional<double> rel_gap;
  double residual = 0.0;
  double mean_adjustment = 0.0;
  double optimizer_gap = 0.0;
  /// ||alpha - alpha_d||, from the closed-form norm of the full difference density.
  /// N is 1-Lipschitz, so W1 <= upper + truncation_tail.
  double truncation_tail = 0.0;
  double tolerance = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool sandwich_pass = false;
  bool fu_pass = false;
  std::string quadrature;
};

/// Lower bounds on W1 from the transport side against the three upper bounds
/// E|v(alpha)|, E|(1+L)^-1 D alpha| and the minimized E|u|.
GapReport theorem_gap(const GaussianMixture& nu0, const GaussianMixture& nu1,
                      const GapOptions& options);

struct ReductionCheck {
  std::size_t n = 0, k = 0;
  double n_full_on_conditional = 0.0;  // N of E[alpha | P_k] in R^n
  double n_marginal = 0.0;             // N of the same function on R^k
  double n_full = 0.0;                 // N of alpha in R^n
  double projected_value = 0.0;        // E|E[u* | P_k]| of the full minimizer
  double projected_residual = 0.0;
  double tolerance = 0.0;
  bool equality_pass = false;
  bool jensen_pass = false;
};

/// Compares the n- and k-dimensional problems for the conditional expectation
/// of alpha on the first k coordinates. Uses Gauss-Hermite grids in both.
ReductionCheck finite_dim_reduction_check(const ChaosFn& alpha, std::size_t k, unsigned max_degree,
                                          unsigned nodes_per_axis,
                                          const MinimizeOptions& options = {});

}  // namespace krdiv
