#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "krdiv/malliavin.hpp"
#include "krdiv/transport.hpp"

using namespace krdiv;

namespace {
DiscreteMeasure uniform_atoms(std::size_t dim, std::vector<double> atoms) {
  DiscreteMeasure m;
  m.dim = dim;
  m.atoms = std::move(atoms);
  m.weights.assign(m.atoms.size() / dim, 1.0 / double(m.atoms.size() / dim));
  return m;
}

DiscreteMeasure random_atoms(std::size_t dim, std::size_t count, std::mt19937_64& rng, double shift) {
  std::normal_distribution<double> normal;
  std::vector<double> a(dim * count);
  for (auto& v : a) v = normal(rng) + shift;
  return uniform_atoms(dim, std::move(a));
}

GaussianMixture gauss1(double m, double var) {
  return GaussianMixture::gaussian(Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Constant(1, 1, var));
}
}  // namespace

TEST_CASE("hand-sized transport problem") {
  // mass 1/2 at 0 and 1/2 at 2 moved to 1: each half travels 1
  DiscreteMeasure a = uniform_atoms(1, {0.0, 2.0});
  DiscreteMeasure b = uniform_atoms(1, {1.0});
  const auto plan = w1_lp(a, b);
  CHECK(plan.cost == doctest::Approx(1.0));
  CHECK(plan.dual_objective == doctest::Approx(1.0));
  CHECK(plan.marginal_error < 1e-14);
  CHECK(plan.certificate_violation < 1e-12);

  DiscreteMeasure c = uniform_atoms(1, {0.0, 1.0});
  c.weights = {0.25, 0.75};
  CHECK(w1_lp(c, b).cost == doctest::Approx(0.25));
  CHECK_THROWS_AS(w1_lp(c, uniform_atoms(2, {0.0, 0.0})), std::invalid_argument);
}

TEST_CASE("one-dimensional LP equals sorted matching") {
  std::mt19937_64 rng(1);
  for (int r = 0; r < 5; ++r) {
    const auto a = random_atoms(1, 60, rng, 0.0);
    const auto b = random_atoms(1, 60, rng, 0.7);
    auto x = a.atoms, y = b.atoms;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double ref = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ref += std::abs(x[i] - y[i]) / 60.0;
    const auto plan = w1_lp(a, b);
    CHECK(plan.cost == doctest::Approx(ref).epsilon(1e-12));
    const auto dual = w1_dual_lb(a, b);
    CHECK(std::abs(dual.value - plan.cost) < 1e-6);
    CHECK(dual.potential.lipschitz_cert <= 1.0 + 1e-9);
  }
}

TEST_CASE("two-dimensional LP equals brute force over permutations") {
  std::mt19937_64 rng(2);
  for (int r = 0; r < 4; ++r) {
    const auto a = random_atoms(2, 6, rng, 0.0);
    const auto b = random_atoms(2, 6, rng, 0.3);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double s = 0.0;
      for (std::size_t i = 0; i < 6; ++i) s += euclidean_distance(a.atom(i), b.atom(perm[i])) / 6.0;
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(w1_lp(a, b).cost == doctest::Approx(best).epsilon(1e-12));
    CHECK(w1_dual_lb(a, b).value == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("LP and dual agree with constraint generation") {
  std::mt19937_64 rng(4);
  const auto a = random_atoms(2, 120, rng, 0.0);
  const auto b = random_atoms(2, 80, rng, 0.5);
  const auto plan = w1_lp(a, b);
  const auto dual = w1_dual_lb(a, b, 50);
  CHECK(dual.constraint_rounds >= 1);
  CHECK(std::abs(dual.value - plan.cost) < 1e-6);
  CHECK(dual.potential.lipschitz_cert <= 1.0 + 1e-9);
  // extension stays 1-Lipschitz away from the support
  const double p[2] = {3.0, -1.0}, q[2] = {-2.0, 0.5};
  CHECK(std::abs(dual.potential.extend(p) - dual.potential.extend(q)) <= euclidean_distance(p, q) + 1e-12);
}

TEST_CASE("arc budget is enforced") {
  std::mt19937_64 rng(5);
  const auto a = random_atoms(1, 100, rng, 0.0);
  CHECK_THROWS_AS(w1_lp(a, a, 5000), ResourceGuardError);
  CHECK_NOTHROW(w1_lp(a, a, 10000));
}

TEST_CASE("exact one-dimensional W1 of Gaussians") {
  CHECK(w1_exact_1d(gauss1(0.0, 1.0), gauss1(0.5, 1.0)) == doctest::Approx(0.5).epsilon(1e-6));
  // monotone coupling x -> 2x costs E|X|
  CHECK(w1_exact_1d(gauss1(0.0, 1.0), gauss1(0.0, 4.0)) ==
        doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-5));
  CHECK_THROWS(w1_exact_1d(GaussianMixture::standard(2), GaussianMixture::standard(2)));
}

TEST_CASE("sliced bound and replication estimates") {
  const auto nu0 = GaussianMixture::standard(2);
  const auto nu1 = GaussianMixture::gaussian(Eigen::Vector2d(0.3, 0.4), Eigen::Matrix2d::Identity());
  // a pure shift: every certified bound is at most the shift length and the best slice attains it
  CHECK(w1_sliced_lower_bound(nu0, nu1) <= 0.5 + 1e-6);
  CHECK(w1_sliced_lower_bound(nu0, nu1) >= 0.49);
  CHECK(replication_seed(7, 0, 0) != replication_seed(7, 0, 1));
  CHECK(replication_seed(7, 1, 0) == replication_seed(7, 1, 0));

  const auto est = w1_estimate(gauss1(0.0, 1.0), gauss1(0.5, 1.0), 200, 6, 3);
  CHECK(est.replications.size() == 6);
  CHECK(est.std_error > 0.0);
  const auto again = w1_estimate(gauss1(0.0, 1.0), gauss1(0.5, 1.0), 200, 6, 3);
  CHECK(again.estimate == est.estimate);
}

TEST_CASE("projected curve is monotone in k within every replication") {
  const auto nu0 = GaussianMixture::standard(3);
  const auto nu1 =
      GaussianMixture::gaussian(Eigen::Vector3d(0.4, 0.3, 0.2), Eigen::Vector3d(0.9, 1.1, 1.0).asDiagonal());
  const auto curve = projected_w1_curve(nu0, nu1, 80, 4, 11);
  REQUIRE(curve.by_k.size() == 3);
  CHECK(curve.worst_decrease <= 1e-12);
  CHECK(curve.by_k[0].estimate <= curve.by_k[2].estimate);
}

TEST_CASE("CSV writers emit headers") {
  const auto plan = w1_lp(uniform_atoms(1, {0.0, 2.0}), uniform_atoms(1, {1.0}));
  std::ostringstream os;
  write_plan_csv(os, plan);
  CHECK(os.str().rfind("src_idx,dst_idx,flow,cost_contrib\n", 0) == 0);
  const auto dual = w1_dual_lb(uniform_atoms(1, {0.0, 2.0}), uniform_atoms(1, {1.0}));
  std::ostringstream ds;
  write_dual_csv(ds, dual.potential);
  CHECK(ds.str().rfind("atom,potential\n", 0) == 0);
}

TEST_CASE("smoothing stability bound for a shifted pair") {
  const auto nu0 = gauss1(0.0, 1.0), nu1 = gauss1(0.5, 1.0);
  SmoothingOptions opt;
  const auto zero = smoothing_stability(nu0, nu1, 0.0, opt);
  CHECK(zero.bound == 0.0);
  CHECK(zero.measured < 1e-9);

  double prev = 0.0;
  for (double t : {0.05, 0.2, 1.0}) {
    const auto s = smoothing_stability(nu0, nu1, t, opt);
    // alpha = sum_k 0.5^k / sqrt(k!) h_k; the semigroup damps level k by e^{-kt}
    double ref = 0.0, term = 1.0;
    for (unsigned k = 1; k <= opt.degree; ++k) {
      term *= 0.25 / k;
      ref += std::pow(1.0 - std::exp(-double(k) * t), 2) * term;
    }
    CHECK(s.bound == doctest::Approx(std::sqrt(ref)).epsilon(1e-10));
    // smoothing shrinks the mean shift to 0.5 e^{-t}
    CHECK(s.measured == doctest::Approx(0.5 * (1.0 - std::exp(-t))).epsilon(1e-5));
    CHECK(s.pass);
    CHECK(s.bound >= prev);
    prev = s.bound;
  }
}

TEST_CASE("replicated estimate is shift equivariant") {
  const auto a = w1_estimate(gauss1(0.0, 1.0), gauss1(0.5, 1.0), 300, 5, 8);
  const auto b = w1_estimate(gauss1(2.0, 1.0), gauss1(2.5, 1.0), 300, 5, 8);
  CHECK(std::abs(a.estimate - b.estimate) <= 3.0 * std::hypot(a.std_error, b.std_error));
}
