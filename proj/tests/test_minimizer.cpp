#include <cmath>
#include <random>

#include "doctest.h"
#include "krdiv/malliavin.hpp"
#include "krdiv/minimizer.hpp"
#include "krdiv/reports.hpp"

using namespace krdiv;

namespace {
ChaosFn scaled_random(std::size_t n, unsigned d, std::mt19937_64& rng, double s) {
  return random_chaos(n, d, rng) * s;
}
}  // namespace

TEST_CASE("objective on simple fields") {
  const auto grid = gauss_hermite_grid(2, 10);
  CHECK(objective(VectorField::zero(2, 3), grid) == 0.0);
  VectorField c = VectorField::zero(2, 0);
  c[0] = ChaosFn::basis(MultiIndex({0, 0}), 3.0);
  c[1] = ChaosFn::basis(MultiIndex({0, 0}), -4.0);
  CHECK(objective(c, grid) == doctest::Approx(5.0));
}

TEST_CASE("trivial and one-dimensional minimizations") {
  const auto g1 = gauss_hermite_grid(1, 20);
  const auto zero = minimize_l1(ChaosFn(1, 4), 4, g1);
  CHECK(zero.value == 0.0);
  CHECK(zero.converged);

  // in one dimension the field is unique: u = 1 for alpha = h_1
  const auto lin = minimize_l1(ChaosFn::basis(MultiIndex({1})), 4, g1);
  CHECK(lin.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lin.kernel_dim == 0);
}

TEST_CASE("two-dimensional linear alpha attains the dual bound exactly") {
  // any u with Iu = x_1 has E|u| >= E<u, e_1> = E[x_1^2] = 1, and u = e_1 attains it
  const auto grid = gauss_hermite_grid(2, 12);
  const auto r = minimize_l1(ChaosFn::basis(MultiIndex({1, 0})), 4, grid);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.dual_value <= r.value + 1e-12);
  CHECK(r.residual < 1e-12);
  CHECK(r.converged);
}

TEST_CASE("minimizer is feasible, certified and below the minimal-norm field") {
  std::mt19937_64 rng(41);
  const auto grid = gauss_hermite_grid(2, 14);
  for (int rep = 0; rep < 3; ++rep) {
    const ChaosFn a = scaled_random(2, 4, rng, 0.3).centered();
    const auto r = minimize_l1(a, 6, grid);
    CHECK(r.residual < 1e-8);
    CHECK(r.converged);
    CHECK(r.gap <= 1e-7 * r.value + 1e-15);
    CHECK(r.dual_value <= r.value + 1e-12);
    CHECK(r.l1_l2_excess <= 1e-12);
    CHECK(r.value <= objective(min_norm_field(a), grid) + 1e-12);
    CHECK(objective(r.u_star, grid) == doctest::Approx(r.value).epsilon(1e-12));
    CHECK(max_coeff_diff(divergence(r.u_star), a) < 1e-8);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] + 1e-15);
  }
}

TEST_CASE("raising the field degree can only lower the minimum") {
  std::mt19937_64 rng(43);
  const auto grid = gauss_hermite_grid(2, 14);
  const ChaosFn a = scaled_random(2, 4, rng, 0.3);
  const auto r4 = minimize_l1(a, 4, grid);
  const auto r6 = minimize_l1(a, 6, grid);
  CHECK(r6.value <= r4.value + r4.gap + r6.gap + 1e-12);
}

TEST_CASE("minimization is deterministic") {
  std::mt19937_64 rng(47);
  const auto grid = gauss_hermite_grid(2, 12);
  const ChaosFn a = scaled_random(2, 4, rng, 0.3);
  const auto x = minimize_l1(a, 5, grid);
  const auto y = minimize_l1(a, 5, grid);
  CHECK(x.value == y.value);
  CHECK(x.iterations == y.iterations);
  CHECK(max_coeff_diff(x.u_star[0], y.u_star[0]) == 0.0);
}

TEST_CASE("minimal value is 1-Lipschitz in alpha") {
  std::mt19937_64 rng(53);
  const auto grid = gauss_hermite_grid(2, 14);
  const ChaosFn a = scaled_random(2, 4, rng, 0.3);
  const ChaosFn b = a + scaled_random(2, 4, rng, 0.05);
  const auto c = n_continuity_check(a, b, 6, grid);
  CHECK(c.pass);
  CHECK(c.lhs <= c.rhs + c.tolerance);
  CHECK(c.rhs_quadrature == doctest::Approx(c.rhs).epsilon(1e-10));
}

TEST_CASE("reduction to leading coordinates") {
  std::mt19937_64 rng(59);
  const ChaosFn a = scaled_random(2, 4, rng, 0.3);
  const auto r = finite_dim_reduction_check(a, 1, 6, 14);
  CHECK(r.equality_pass);
  CHECK(r.jensen_pass);
  CHECK(r.n_marginal <= r.n_full + r.tolerance);
  // k = n leaves alpha unchanged
  const auto same = finite_dim_reduction_check(a, 2, 6, 14);
  CHECK(same.equality_pass);
  CHECK(same.n_marginal == doctest::Approx(same.n_full).epsilon(1e-6));
  CHECK_THROWS(finite_dim_reduction_check(a, 3, 6, 14));
}

TEST_CASE("one-dimensional sandwich is tight") {
  const auto nu0 = GaussianMixture::standard(1);
  const auto nu1 = epsilon_mix(
      GaussianMixture::gaussian(Eigen::VectorXd::Constant(1, 0.4), Eigen::MatrixXd::Identity(1, 1)), 0.05);
  GapOptions opt;
  opt.degree = 6;
  const auto r = theorem_gap(epsilon_mix(nu0, 0.05), nu1, opt);
  CHECK(r.sandwich_pass);
  CHECK(r.fu_pass);
  CHECK(r.lower == doctest::Approx(r.lower_exact_1d));
  // shifted mean by 0.4/1.05
  CHECK(r.lower_exact_1d == doctest::Approx(0.4 / 1.05).epsilon(1e-6));
  REQUIRE(r.rel_gap);
  CHECK(*r.rel_gap < 0.10);
  CHECK(r.upper_min <= r.upper_v + 1e-12);
}

TEST_CASE("exact one-dimensional absolute mean") {
  // E|x| = sqrt(2/pi), E|x^2 - 1| = 4 phi(1) = 4 e^{-1/2} / sqrt(2 pi)
  CHECK(abs_mean_1d(ChaosFn::basis(MultiIndex({1}))) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-14));
  CHECK(abs_mean_1d(ChaosFn::basis(MultiIndex({2}), std::sqrt(2.0))) ==
        doctest::Approx(4.0 * std::exp(-0.5) / std::sqrt(2.0 * M_PI)).epsilon(1e-13));
  CHECK(abs_mean_1d(ChaosFn::constant(1, -2.5)) == doctest::Approx(2.5));
  // a positive polynomial matches any exact quadrature
  ChaosFn p(1, 2);
  p.set(MultiIndex({0}), 2.0);
  p.set(MultiIndex({2}), 0.5);
  VectorField u(std::vector<ChaosFn>{p});
  CHECK(abs_mean_1d(p) == doctest::Approx(objective(u, gauss_hermite_grid(1, 10))).epsilon(1e-13));
  CHECK_THROWS(abs_mean_1d(ChaosFn(2, 1)));
}

TEST_CASE("sign-changing one-dimensional field stays above the exact distance") {
  // the Gauss-Hermite value of E|v| falls below W1 here because |v| has kinks
  const auto nu0 = epsilon_mix(GaussianMixture::standard(1), 0.05);
  const auto nu1 = epsilon_mix(
      GaussianMixture(1, {{0.5, Eigen::VectorXd::Constant(1, -0.5), Eigen::MatrixXd::Constant(1, 1, 0.8)},
                          {0.5, Eigen::VectorXd::Constant(1, 0.7), Eigen::MatrixXd::Constant(1, 1, 1.2)}}),
      0.05);
  GapOptions opt;
  opt.degree = 10;
  const auto r = theorem_gap(nu0, nu1, opt);
  REQUIRE(r.upper_v_quadrature);
  CHECK(*r.upper_v_quadrature < r.lower);
  CHECK(r.sandwich_pass);
  CHECK(r.fu_pass);
  CHECK(r.upper_v >= r.lower - r.tolerance);
}
