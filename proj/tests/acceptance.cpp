// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "krdiv/flow.hpp"
#include "krdiv/malliavin.hpp"
#include "krdiv/measures.hpp"
#include "krdiv/minimizer.hpp"
#include "krdiv/reports.hpp"
#include "krdiv/transport.hpp"

using namespace krdiv;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

GaussianMixture gauss1(double m, double var) {
  return GaussianMixture::gaussian(Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Constant(1, 1, var));
}

GaussianMixture mixture_1d() {
  return GaussianMixture(1, {{0.5, Eigen::VectorXd::Constant(1, -0.5), Eigen::MatrixXd::Constant(1, 1, 0.8)},
                             {0.5, Eigen::VectorXd::Constant(1, 0.7), Eigen::MatrixXd::Constant(1, 1, 1.2)}});
}

GaussianMixture mixture_2d() {
  Eigen::Matrix2d s;
  s << 1.2, 0.3, 0.3, 0.9;
  return GaussianMixture(2, {{0.6, Eigen::Vector2d(0.5, -0.2), Eigen::Matrix2d::Identity() * 0.8},
                             {0.4, Eigen::Vector2d(-0.4, 0.6), s}});
}

GaussianMixture product_3d() {
  return GaussianMixture::gaussian(Eigen::Vector3d(0.5, 0.25, 0.15),
                                   Eigen::Vector3d(0.9, 1.1, 1.0).asDiagonal());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

VectorField random_field(std::size_t n, unsigned d, std::mt19937_64& rng) {
  VectorField u = VectorField::zero(n, d);
  for (std::size_t i = 0; i < n; ++i) u[i] = random_chaos(n, d, rng);
  return u;
}

Outcome operator_identities() {
  std::mt19937_64 rng(101);
  double adj = 0.0, idl = 0.0, rep = 0.0;
  for (int r = 0; r < 200; ++r) {
    const std::size_t n = 1 + std::size_t(r % 3);
    const unsigned d = 1 + unsigned(r % 8);
    const ChaosFn f = random_chaos(n, d, rng);
    const VectorField u = random_field(n, d - 1, rng);
    adj = std::max(adj, std::abs(inner_product(u, derivative(f)) - inner_product(divergence(u), f)));
    idl = std::max(idl, max_coeff_diff(divergence(derivative(f)), number_operator(f)));
    rep = std::max(rep, max_coeff_diff(divergence(min_norm_field(f)), f.centered()));
  }
  const double worst = std::max({adj, idl, rep});
  return {worst < 1e-10, "adjointness=" + fmt(adj) + " ID-L=" + fmt(idl) + " representation=" + fmt(rep) +
                             " (tol 1e-10)"};
}

Outcome norm_bound() {
  std::mt19937_64 rng(202);
  double excess = -1.0, order1 = 0.0, strict = 1e300;
  for (int r = 0; r < 500; ++r) {
    const std::size_t n = 1 + std::size_t(r % 3);
    const unsigned d = 1 + unsigned(r % 8);
    ChaosFn a = random_chaos(n, d, rng);
    const bool first_order_only = r % 5 == 0 || d == 1;
    if (first_order_only) a = a.truncated(1);
    const double vn = std::sqrt(min_norm_field(a).l2_norm_sq());
    const double an = a.centered().norm();
    excess = std::max(excess, vn - an);
    if (first_order_only) order1 = std::max(order1, std::abs(vn - an));
    else strict = std::min(strict, an - vn);
  }
  const bool pass = excess <= 1e-10 && order1 <= 1e-10 && strict > 1e-10;
  return {pass, "max(|v|-|a|)=" + fmt(excess) + " order1 |diff|=" + fmt(order1) +
                    " min strict gap=" + fmt(strict)};
}

Outcome semigroup_crosscheck() {
  std::mt19937_64 rng(303);
  const std::vector<double> times{0.05, 0.2, 1.0};
  double mehler = 0.0, law = 0.0;
  for (std::size_t n : {1u, 2u}) {
    const auto grid = gauss_hermite_grid(n, 40);
    const ChaosFn f = random_chaos(n, 8, rng);
    for (double t : times) {
      const ChaosFn once = mehler_apply(f, t, grid);
      mehler = std::max(mehler, max_coeff_diff(ou_semigroup(f, t), once));
      for (double s : times)
        law = std::max(law, max_coeff_diff(mehler_apply(once, s, grid), mehler_apply(f, s + t, grid)));
    }
  }
  return {mehler < 1e-6 && law < 1e-6,
          "spectral-vs-Mehler=" + fmt(mehler) + " semigroup law=" + fmt(law) + " (q=40, d=8, tol 1e-6)"};
}

Outcome transport_oracles() {
  const auto nu0 = gauss1(0.0, 1.0), nu1 = gauss1(0.5, 1.0);
  const double exact = w1_exact_1d(nu0, nu1);
  const auto est = w1_estimate(nu0, nu1, 500, 20, 404);
  double worst_gap = 0.0;
  std::size_t instances = 0;
  for (std::size_t dim : {1u, 2u, 3u})
    for (std::size_t size : {20u, 60u, 100u}) {
      const auto a = sample(GaussianMixture::standard(dim), size,
                            replication_seed(404 + dim, size, 0));
      const auto target = dim == 1 ? nu1 : dim == 2 ? mixture_2d() : product_3d();
      const auto b = sample(target, size, replication_seed(404 + dim, size, 1));
      worst_gap = std::max(worst_gap, std::abs(w1_lp(a, b).cost - w1_dual_lb(a, b).value));
      ++instances;
    }
  const bool pass = std::abs(exact - 0.5) <= 1e-3 && std::abs(est.estimate - exact) <= 3.0 * est.std_error &&
                    worst_gap < 1e-6;
  return {pass, "cdf=" + fmt(exact) + " lp=" + fmt(est.estimate) + "+-" + fmt(est.std_error) +
                    " max LP-dual gap=" + fmt(worst_gap) + " over " + std::to_string(instances) +
                    " instances (<=200 atoms)"};
}

std::vector<GapReport> g_gap_reports;

Outcome sandwich() {
  const auto nu0 = epsilon_mix(GaussianMixture::standard(1), 0.05);
  const auto nu1 = epsilon_mix(gauss1(0.4, 1.0), 0.05);
  std::vector<GapReport> series;
  for (unsigned d : {4u, 6u, 8u}) {
    GapOptions opt;
    opt.degree = d;
    opt.seed = 505;
    series.push_back(theorem_gap(nu0, nu1, opt));
    g_gap_reports.push_back(series.back());
  }
  bool pass = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& r = series[i];
    pass = pass && r.sandwich_pass && r.lower <= r.upper_min + r.tolerance && r.upper_min <= r.upper_v + 1e-12;
    if (i > 0) {
      const double g0 = series[i - 1].upper_min - series[i - 1].lower;
      const double g1 = r.upper_min - r.lower;
      pass = pass && g1 <= g0 + 1e-9 + r.optimizer_gap + series[i - 1].optimizer_gap;
    }
    os << " d=" << r.d << ":gap=" << fmt(r.upper_min - r.lower);
  }
  const auto& last = series.back();
  const double rel = last.rel_gap ? *last.rel_gap : 1e300;
  pass = pass && rel <= 0.10;
  return {pass, "lower=" + fmt(last.lower) + " upper_min=" + fmt(last.upper_min) + " upper_v=" +
                    fmt(last.upper_v) + " rel_gap=" + fmt(rel) + os.str()};
}

Outcome feyel_ustunel() {
  GapOptions opt;
  opt.degree = 6;
  opt.seed = 606;
  g_gap_reports.push_back(theorem_gap(epsilon_mix(GaussianMixture::standard(2), 0.05),
                                      epsilon_mix(mixture_2d(), 0.05), opt));
  g_gap_reports.push_back(theorem_gap(epsilon_mix(GaussianMixture::standard(1), 0.05),
                                      epsilon_mix(mixture_1d(), 0.05), opt));
  bool pass = true;
  std::ostringstream os;
  for (const auto& r : g_gap_reports) {
    pass = pass && r.upper_fu >= r.lower - r.tolerance;
    os << " [n=" << r.n << " d=" << r.d << " lower=" << fmt(r.lower) << " fu=" << fmt(r.upper_fu)
       << " v=" << fmt(r.upper_v) << " tol=" << fmt(r.tolerance) << "]";
  }
  return {pass, std::to_string(g_gap_reports.size()) + " instances" + os.str()};
}

Outcome flow_bounds() {
  struct Case {
    GaussianMixture nu0, nu1;
    unsigned degree, nodes;
  };
  const std::vector<Case> cases{
      {epsilon_mix(GaussianMixture::standard(1), 0.05), epsilon_mix(gauss1(0.4, 1.0), 0.05), 10, 20},
      {epsilon_mix(GaussianMixture::standard(2), 0.05), epsilon_mix(mixture_2d(), 0.05), 12, 8}};
  bool pass = true;
  std::ostringstream os;
  for (const auto& cs : cases) {
    FlowSetup setup;
    setup.seed = 707;
    setup.degree = cs.degree;
    setup.nodes_per_axis = cs.nodes;
    const FlowConfig base = make_flow_config(cs.nu0, cs.nu1, 8, setup);
    const auto family = make_test_family(cs.nu0.dim(), 6, 707, evaluation_region(base, 8));
    std::vector<double> totals;
    for (unsigned m : {8u, 16u, 32u, 64u}) {
      FlowConfig c = base;
      c.m = m;
      double total = 0.0;
      for (const auto& f : family) {
        const FlowReport r = run_flow(c, f);
        total += r.total_taylor;
        for (const auto& s : r.per_step)
          pass = pass && s.move_cost <= s.move_bound + 1e-8 && s.taylor_err <= s.taylor_bound + r.tolerance;
        pass = pass && r.guard_trips == 0;
      }
      totals.push_back(total);
    }
    os << " [n=" << cs.nu0.dim() << " d=" << cs.degree << " q=" << cs.nodes << " floor=" << fmt(base.epsilon) << " taylor ratios m->2m:";
    for (std::size_t i = 1; i < totals.size(); ++i) {
      const double ratio = totals[i - 1] / totals[i];
      pass = pass && ratio >= 1.8 && ratio <= 2.2;
      os << " " << fmt(ratio);
    }
    os << "]";
  }
  return {pass, "m in {8,16,32,64}, per-step move and Taylor bounds checked" + os.str()};
}

Outcome smoothing() {
  const std::vector<std::pair<GaussianMixture, GaussianMixture>> pairs{
      {gauss1(0.0, 1.0), gauss1(0.5, 1.0)},
      {GaussianMixture::standard(1), mixture_1d()},
      {GaussianMixture::standard(2), mixture_2d()}};
  bool pass = true;
  std::ostringstream os;
  for (std::size_t p = 0; p < pairs.size(); ++p)
    for (double t : {0.05, 0.2}) {
      SmoothingOptions opt;
      opt.degree = pairs[p].first.dim() == 1 ? 12 : 8;
      opt.nodes_per_axis = pairs[p].first.dim() == 1 ? 40 : 24;
      opt.seed = 808 + p;
      const auto s = smoothing_stability(pairs[p].first, pairs[p].second, t, opt);
      pass = pass && s.pass;
      os << " [pair" << p << " t=" << t << " " << fmt(s.measured) << "<=" << fmt(s.bound) << "+"
         << fmt(s.tolerance) << "]";
    }
  return {pass, os.str().substr(1)};
}

Outcome continuity() {
  std::mt19937_64 rng(909);
  const auto grid = gauss_hermite_grid(2, 14);
  bool pass = true;
  double worst = -1e300;
  for (int r = 0; r < 20; ++r) {
    const ChaosFn a = random_chaos(2, 4, rng) * 0.3;
    const double scale = 0.01 * std::pow(30.0, r / 19.0);
    const ChaosFn b = a + random_chaos(2, 4, rng) * scale;
    const auto c = n_continuity_check(a, b, 6, grid);
    pass = pass && c.pass;
    worst = std::max(worst, c.lhs - c.rhs);
  }
  return {pass, "20 pairs (n=2, d=6), max |N(a)-N(b)| - ||a-b|| = " + fmt(worst)};
}

Outcome reduction() {
  const auto nu0 = GaussianMixture::standard(2), nu1 = mixture_2d();
  const auto grid = gauss_hermite_grid(2, 20);
  const ChaosFn alpha = difference_density(nu0, nu1, 6, grid).alpha;
  const auto red = finite_dim_reduction_check(alpha, 1, 6, 20);
  const auto curve = projected_w1_curve(GaussianMixture::standard(3), product_3d(), 300, 20, 1010);
  bool monotone = true;
  std::ostringstream os;
  for (std::size_t k = 0; k < curve.by_k.size(); ++k) {
    if (k > 0) {
      const auto& lo = curve.by_k[k - 1];
      const auto& hi = curve.by_k[k];
      monotone = monotone && lo.estimate <= hi.estimate + 3.0 * std::hypot(lo.std_error, hi.std_error);
    }
    os << " " << fmt(curve.by_k[k].estimate);
  }
  const bool pass = red.equality_pass && monotone;
  return {pass, "|N_n(E[a|P1]) - N_1| = " + fmt(std::abs(red.n_full_on_conditional - red.n_marginal)) +
                    " (tol " + fmt(red.tolerance) + "), W1 by k:" + os.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_seconds;  // zero when no runtime limit applies
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"operator identities", 10.0, operator_identities},
      {"norm bound of the minimal-norm field", 5.0, norm_bound},
      {"spectral vs Mehler semigroup", 0.0, semigroup_crosscheck},
      {"transport oracles", 60.0, transport_oracles},
      {"one-dimensional sandwich", 300.0, sandwich},
      {"Feyel-Ustunel direction", 0.0, feyel_ustunel},
      {"flow error bounds", 120.0, flow_bounds},
      {"smoothing stability", 0.0, smoothing},
      {"continuity of N", 0.0, continuity},
      {"finite-dimensional reduction", 0.0, reduction},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = criteria[i].limit_seconds <= 0.0 || secs < criteria[i].limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::cout << "AC" << (i + 1) << " " << (pass ? "PASS" : "FAIL") << " " << criteria[i].name << ": "
              << o.detail << " [" << fmt(secs) << " s";
    if (criteria[i].limit_seconds > 0.0) std::cout << ", limit " << criteria[i].limit_seconds << " s";
    std::cout << "]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
