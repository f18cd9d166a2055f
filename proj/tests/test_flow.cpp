#include <cmath>

#include "doctest.h"
#include "krdiv/flow.hpp"
#include "krdiv/malliavin.hpp"
#include "krdiv/transport.hpp"

using namespace krdiv;

namespace {
GaussianMixture mixed_shift(double m) {
  return epsilon_mix(GaussianMixture::gaussian(Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Identity(1, 1)),
                     0.05);
}
}  // namespace

TEST_CASE("flow configuration interpolates between the two densities") {
  const auto cfg = make_flow_config(mixed_shift(0.0), mixed_shift(0.4), 8);
  CHECK(cfg.epsilon > 0.0);
  CHECK(max_coeff_diff(interp_density(cfg, 0.0), cfg.alpha0) == 0.0);
  CHECK(max_coeff_diff(interp_density(cfg, 1.0), cfg.alpha1) < 1e-15);
  CHECK(max_coeff_diff(divergence(cfg.u), cfg.alpha1 - cfg.alpha0) < 1e-15);
  CHECK_THROWS(interp_density(cfg, 1.5));
  CHECK_THROWS(flow_step(cfg, 8, std::vector<double>{0.0}));

  // mass moves toward the shifted mean
  const auto y = flow_step(cfg, 0, std::vector<double>{0.0});
  CHECK(y[0] > 0.0);
}

TEST_CASE("identical measures give the identity flow") {
  const auto nu = mixed_shift(0.3);
  const auto cfg = make_flow_config(nu, nu, 8);
  CHECK(cfg.u.l2_norm_sq() < 1e-28);
  const auto y = flow_step(cfg, 3, std::vector<double>{0.7});
  CHECK(y[0] == doctest::Approx(0.7).epsilon(1e-14));
  const Region region = evaluation_region(cfg, 8);
  const auto family = make_test_family(1, 3, 1, region);
  for (const auto& f : family) {
    const auto rep = run_flow(cfg, f);
    CHECK(rep.total_gap < 1e-12);
    CHECK(rep.total_taylor < 1e-12);
    CHECK(rep.pass);
  }
}

TEST_CASE("test family is rescaled to unit Lipschitz constant") {
  const auto cfg = make_flow_config(mixed_shift(0.0), mixed_shift(0.4), 8);
  const Region region = evaluation_region(cfg, 8);
  REQUIRE(region.lo.size() == 1);
  CHECK(region.lo[0] < region.hi[0]);
  const auto family = make_test_family(1, 6, 2, region);
  REQUIRE(family.size() == 7);
  CHECK(family[0].label == "x1");
  CHECK(family[0].hessian_bound == 0.0);
  for (const auto& f : family) {
    CHECK(f.lipschitz == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(f.hessian_bound >= 0.0);
  }
  // T_t x_1 = e^{-t} x_1, so smoothing leaves the linear member untouched after rescaling
  CHECK(ou_semigroup(ChaosFn::basis(MultiIndex({1})), 0.05).coeff(MultiIndex({1})) ==
        doctest::Approx(std::exp(-0.05)));
}

TEST_CASE("per-step errors respect their bounds and shrink with m") {
  const auto nu0 = mixed_shift(0.0), nu1 = mixed_shift(0.4);
  const auto c8 = make_flow_config(nu0, nu1, 8);
  const auto c16 = make_flow_config(nu0, nu1, 16);
  const Region region = evaluation_region(c8, 8);
  const auto family = make_test_family(1, 4, 3, region);
  for (const auto& f : family) {
    const auto r8 = run_flow(c8, f);
    const auto r16 = run_flow(c16, f);
    CHECK(r8.pass);
    CHECK(r16.pass);
    CHECK(r8.guard_trips == 0);
    CHECK(r8.telescoped == doctest::Approx(r8.total_gap).epsilon(1e-9).scale(1e-12));
    for (const auto& s : r8.per_step) {
      CHECK(s.taylor_err <= s.taylor_bound + 1e-12);
      CHECK(s.move_cost <= s.move_bound + 1e-12);
    }
    if (f.label != "x1") {
      // one step of size 1/m has Taylor error O(1/m^2)
      const double q = step_error_pair(c8, 0, f).taylor_err / step_error_pair(c16, 0, f).taylor_err;
      CHECK(q > 3.0);
      CHECK(q < 5.0);
    }
  }
}

TEST_CASE("linear test function recovers the mean shift") {
  const auto nu0 = mixed_shift(0.0), nu1 = mixed_shift(0.4);
  const auto cfg = make_flow_config(nu0, nu1, 16);
  const auto family = make_test_family(1, 0, 0, evaluation_region(cfg, 16));
  REQUIRE(family.size() == 1);
  const auto rep = run_flow(cfg, family[0]);
  // x_1 attains W1 between two shifted copies of the same law
  CHECK(rep.total_gap == doctest::Approx(w1_exact_1d(nu0, nu1)).epsilon(1e-5));
  CHECK(rep.total_taylor < 1e-10);
  CHECK(rep.total_gap <= rep.E_abs_u + 1e-12);
}

TEST_CASE("flow grid must integrate the divergence constraint exactly") {
  FlowSetup setup;
  setup.degree = 12;
  setup.nodes_per_axis = 6;
  CHECK_THROWS_AS(make_flow_config(mixed_shift(0.0), mixed_shift(0.4), 8, setup), std::invalid_argument);
  setup.nodes_per_axis = 7;
  CHECK_NOTHROW(make_flow_config(mixed_shift(0.0), mixed_shift(0.4), 8, setup));
}
