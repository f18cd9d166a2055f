#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "krdiv/chaos.hpp"
#include "krdiv/measures.hpp"
#include "krdiv/quadrature.hpp"

namespace krdiv {

/// Interpolated density dropped below half the floor at an evaluation point.
class FlowGuardError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Discretized flow between nu0 and nu1 with densities alpha0, alpha1 vs mu
/// and a field u with Iu = alpha1 - alpha0.
struct FlowConfig {
  unsigned m = 8;
  double epsilon = 0.0;  // density floor on the evaluation points
  VectorField u = VectorField::zero(1);
  ChaosFn alpha0 = ChaosFn(1, 0);
  ChaosFn alpha1 = ChaosFn(1, 0);
  PointSet points;
  bool monte_carlo = false;
  std::string quadrature;
};

struct FlowSetup {
  unsigned degree = 10;
  unsigned nodes_per_axis = 20;
  std::size_t mc_points = 200000;  // used when dim >= 3
  std::uint64_t seed = 0;
};

/// Projects both densities, takes u = D L^-1 (alpha1 - alpha0) and sets alpha1 =
/// alpha0 + Iu so the divergence constraint holds exactly. The floor is the
/// smallest of alpha0 and alpha1 over the evaluation points. On grids (n <= 2)
/// the rule must integrate degree + 1 exactly.
FlowConfig make_flow_config(const GaussianMixture& nu0, const GaussianMixture& nu1, unsigned m,
                            const FlowSetup& setup = {});

/// alpha0 + t (alpha1 - alpha0).
ChaosFn interp_density(const FlowConfig& cfg, double t);

/// phi_k(x) = x + u(x) / (m alpha_{k/m}(x)).
std::vector<double> flow_step(const FlowConfig& cfg, unsigned k, std::span<const double> x);

/// Axis-aligned box containing the evaluation points and their images under
/// every phi_k at the coarsest step count.
struct Region {
  std::vector<double> lo, hi;
};
Region evaluation_region(const FlowConfig& cfg, unsigned coarsest_m);

/// Smooth test function with derivatives bounded on a region.
struct TestFunction {
  std::string label;
  ChaosFn f = ChaosFn(1, 0);
  VectorField grad = VectorField::zero(1);
  std::vector<ChaosFn> hessian;  // row-major n x n
  double lipschitz = 0.0;        // certified bound of |Df| on the region
  double hessian_bound = 0.0;    // C: max Hessian operator norm on a dense grid
};

/// Wraps f, computing gradient and Hessian by exact differentiation.
TestFunction make_test_function(std::string label, const ChaosFn& f, const Region& region);

/// x_1 plus `random_count` random chaos polynomials of degree 2..5, each
/// smoothed by T_{t_f} and scaled so |Df| <= 1 on the region.
std::vector<TestFunction> make_test_family(std::size_t dim, std::size_t random_count,
                                           std::uint64_t seed, const Region& region,
                                           double t_f = 0.05);

struct StepError {
  unsigned k = 0;
  double taylor_err = 0.0;
  double taylor_bound = 0.0;
  double move_cost = 0.0;
  double move_bound = 0.0;
  double taylor_stderr = 0.0;  // Monte Carlo mode only
  /// int f o phi_k dnu_{k/m} - int f dnu_{k/m}, signed.
  double move_signed = 0.0;
  /// int f o phi_k dnu_{k/m} - int f dnu_{(k+1)/m}, signed.
  double taylor_signed = 0.0;
};

StepError step_error_pair(const FlowConfig& cfg, unsigned k, const TestFunction& f);

struct FlowReport {
  std::string label;
  unsigned m = 0;
  double epsilon = 0.0;
  double E_abs_u = 0.0;
  double E_sq_u = 0.0;
  double C = 0.0;
  std::vector<StepError> per_step;
  double total_gap = 0.0;       // |int f dnu0 - int f dnu1|
  double telescoped = 0.0;      // same difference rebuilt from the steps
  double total_taylor = 0.0;
  double total_move = 0.0;
  double combined_bound = 0.0;  // E|u| + C/(m eps) E|u|^2
  double tolerance = 0.0;
  std::size_t guard_trips = 0;
  bool steps_pass = false;
  bool pass = false;
};

FlowReport run_flow(const FlowConfig& cfg, const TestFunction& f);

}  // namespace krdiv
