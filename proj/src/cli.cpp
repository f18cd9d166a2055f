#include "krdiv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "krdiv/flow.hpp"
#include "krdiv/malliavin.hpp"
#include "krdiv/measures.hpp"
#include "krdiv/minimizer.hpp"
#include "krdiv/reports.hpp"
#include "krdiv/transport.hpp"

namespace krdiv::cli {

namespace {

using nlohmann::json;

struct RunConfig {
  std::string command;
  std::string spec0, spec1;
  std::optional<std::size_t> dim;
  std::optional<unsigned> degree;
  std::optional<unsigned> nodes;
  unsigned m = 8;
  double epsilon = 0.05;
  double t = 0.2;
  std::optional<std::size_t> samples;
  std::size_t reps = 20;
  std::optional<std::uint64_t> seed;
  std::size_t budget = 400;
  std::string out;
  std::string format = "json";
  bool inject_fault = false;
};

/// Usage problems detected after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Outcome {
  std::string body;
  bool pass = true;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string checks_csv(const std::vector<Check>& checks) {
  std::string s = "name,value,relation,reference,tolerance,pass\n";
  for (const auto& c : checks)
    s += c.name + "," + csv_number(c.value) + "," + c.relation + "," + csv_number(c.reference) + "," +
         csv_number(c.tolerance) + "," + (c.pass ? "true" : "false") + "\n";
  return s;
}

json config_json(const RunConfig& cfg) {
  json j{{"command", cfg.command}, {"format", cfg.format}};
  if (!cfg.spec0.empty()) j["spec0"] = cfg.spec0;
  if (!cfg.spec1.empty()) j["spec1"] = cfg.spec1;
  if (cfg.seed) j["seed"] = *cfg.seed;
  return j;
}

/// nu0 from --spec0 (standard Gaussian when absent), nu1 from --spec1.
std::pair<GaussianMixture, GaussianMixture> load_pair(const RunConfig& cfg, bool spec1_required,
                                                      std::size_t default_dim) {
  std::optional<GaussianMixture> nu1;
  if (!cfg.spec1.empty()) nu1 = load_mixture(cfg.spec1);
  else if (spec1_required) throw UsageError("--spec1 is required for " + cfg.command);
  std::optional<GaussianMixture> nu0;
  if (!cfg.spec0.empty()) nu0 = load_mixture(cfg.spec0);
  std::size_t n = nu1 ? nu1->dim() : nu0 ? nu0->dim() : cfg.dim.value_or(default_dim);
  if (nu0 && nu1 && nu0->dim() != nu1->dim())
    throw UsageError("--spec0 and --spec1 have different dimensions");
  if (cfg.dim && *cfg.dim != n)
    throw UsageError("--dim " + std::to_string(*cfg.dim) + " disagrees with the spec dimension " +
                     std::to_string(n));
  if (!nu0) nu0 = GaussianMixture::standard(n);
  if (!nu1) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(Eigen::Index(n));
    Eigen::VectorXd var = Eigen::VectorXd::Ones(Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) {
      mean(Eigen::Index(i)) = 0.5 / double(i + 1);
      var(Eigen::Index(i)) = 1.0 + 0.2 * (double(i % 2) - 0.5);
    }
    nu1 = GaussianMixture::gaussian(mean, var.asDiagonal());
  }
  return {*nu0, *nu1};
}

Outcome cmd_verify_operators(const RunConfig& cfg) {
  OperatorSuiteConfig suite;
  suite.dim = cfg.dim.value_or(2);
  suite.degree = cfg.degree.value_or(6);
  suite.nodes_per_axis = cfg.nodes.value_or(20);
  suite.seed = cfg.seed.value_or(0);
  suite.inject_fault = cfg.inject_fault;
  if (suite.dim > 4) throw UsageError("--dim must be at most 4 for verify-operators");
  const auto checks = verify_operators(suite);
  Outcome o;
  o.pass = all_pass(checks);
  if (cfg.format == "csv") {
    o.body = checks_csv(checks);
  } else {
    json j{{"config", config_json(cfg)},
           {"n", suite.dim},
           {"d", suite.degree},
           {"q", suite.nodes_per_axis},
           {"seed", suite.seed},
           {"checks", to_json(checks)},
           {"pass", o.pass}};
    o.body = dump(j);
  }
  return o;
}

Outcome cmd_w1(const RunConfig& cfg) {
  if (cfg.spec0.empty() || cfg.spec1.empty()) throw UsageError("w1 needs --spec0 and --spec1");
  const auto [nu0, nu1] = load_pair(cfg, true, 1);
  const std::size_t n = nu0.dim();
  const std::size_t N = cfg.samples.value_or(500);
  const std::uint64_t seed = *cfg.seed;

  const W1Estimate est = w1_estimate(nu0, nu1, N, cfg.reps, seed);
  const double sliced = w1_sliced_lower_bound(nu0, nu1);
  std::optional<double> exact;
  if (n == 1) exact = w1_exact_1d(nu0, nu1);
  const double lower = exact ? *exact : sliced;

  // one instance at full size for the plan, one of at most 200 atoms for the dual LP
  const auto a = sample(nu0, N, replication_seed(seed, 0, 0));
  const auto b = sample(nu1, N, replication_seed(seed, 0, 1));
  const TransportPlan plan = w1_lp(a, b);
  const std::size_t Nd = std::min<std::size_t>(N, 100);
  const auto ad = sample(nu0, Nd, replication_seed(seed, 0, 0));
  const auto bd = sample(nu1, Nd, replication_seed(seed, 0, 1));
  const double lp_small = w1_lp(ad, bd).cost;
  const DualBound dual = w1_dual_lb(ad, bd);
  const double potential = dual_potential_bound(dual.potential, nu0, nu1, n == 1 ? 60 : n == 2 ? 24 : 8);

  std::vector<Check> checks;
  checks.push_back(check_le("plan_certificate_violation", plan.certificate_violation, 0.0, 1e-9));
  checks.push_back(check_le("plan_marginal_error", plan.marginal_error, 0.0, 1e-12));
  checks.push_back(check_near("lp_dual_gap", lp_small, dual.value, 1e-6));
  checks.push_back(check_le("dual_lipschitz", dual.potential.lipschitz_cert, 1.0, 1e-9));
  checks.push_back(check_le("sliced_below_estimate", sliced, est.estimate, 3.0 * est.std_error));
  const bool bias_flag = lower < 3.0 * est.std_error;
  if (exact && !bias_flag)
    checks.push_back(check_near("lp_vs_exact_1d", est.estimate, *exact, 3.0 * est.std_error));

  SmoothingOptions so;
  so.degree = cfg.degree.value_or(n == 1 ? 12 : n == 2 ? 8 : 6);
  so.nodes_per_axis = cfg.nodes.value_or(n == 1 ? 40 : n == 2 ? 24 : 10);
  so.samples = N;
  so.replications = cfg.reps;
  so.seed = seed;
  const SmoothingStability smooth = smoothing_stability(nu0, nu1, cfg.t, so);
  checks.push_back(check_le("smoothing_stability", smooth.measured, smooth.bound, smooth.tolerance));

  Outcome o;
  o.pass = all_pass(checks);
  if (cfg.format == "csv") {
    std::ostringstream os;
    write_plan_csv(os, plan);
    o.body = os.str();
    if (!cfg.out.empty()) {
      std::ostringstream ds;
      write_dual_csv(ds, dual.potential);
      write_atomic(cfg.out + ".dual.csv", ds.str());
    }
    return o;
  }
  json j{{"config", config_json(cfg)},
         {"n", n},
         {"samples", N},
         {"replications", cfg.reps},
         {"lp_estimate", {{"value", est.estimate}, {"std_error", est.std_error}}},
         {"sliced_lower_bound", sliced},
         {"plan_cost", plan.cost},
         {"plan_dual_objective", plan.dual_objective},
         {"dual_lp", {{"atoms_per_side", Nd}, {"lp_value", lp_small}, {"dual_value", dual.value},
                      {"iterations", dual.lp_iterations}, {"constraint_rounds", dual.constraint_rounds}}},
         {"dual_potential_bound", potential},
         {"sampling_bias_dominates", bias_flag},
         {"smoothing", {{"t", smooth.t}, {"bound", smooth.bound}, {"measured", smooth.measured},
                        {"std_error", smooth.std_error}, {"degree", so.degree}}},
         {"checks", to_json(checks)},
         {"pass", o.pass}};
  if (exact) j["exact_1d"] = *exact;
  o.body = dump(j);
  return o;
}

Outcome cmd_theorem(const RunConfig& cfg) {
  const auto [raw0, raw1] = load_pair(cfg, true, 1);
  const GaussianMixture nu0 = epsilon_mix(raw0, cfg.epsilon);
  const GaussianMixture nu1 = epsilon_mix(raw1, cfg.epsilon);
  const std::size_t n = nu0.dim();
  if (n > 3) throw UsageError("theorem supports dimensions 1 to 3");
  GapOptions opts;
  opts.degree = cfg.degree.value_or(8);
  opts.epsilon = cfg.epsilon;
  opts.nodes_per_axis = cfg.nodes.value_or(40);
  opts.samples = cfg.samples.value_or(150);
  opts.seed = *cfg.seed;
  opts.minimize.budget = cfg.budget;

  std::vector<unsigned> degrees;
  for (unsigned d = 4; d < opts.degree; d += 2) degrees.push_back(d);
  degrees.push_back(opts.degree);
  std::vector<GapReport> series;
  for (unsigned d : degrees) {
    GapOptions o = opts;
    o.degree = d;
    if (d == opts.degree && n <= 2) o.extra_degree = 2;
    series.push_back(theorem_gap(nu0, nu1, o));
  }
  const GapReport& rep = series.back();
  std::vector<Check> checks;
  checks.push_back(check_le("lower_le_upper_min", rep.lower, rep.upper_min, rep.tolerance));
  checks.push_back(check_le("upper_min_le_upper_v", rep.upper_min, rep.upper_v, 1e-9));
  checks.push_back(check_le("upper_min_le_upper_fu", rep.upper_min, rep.upper_fu, 1e-9));
  checks.push_back(check_le("lower_le_upper_fu", rep.lower, rep.upper_fu, rep.tolerance));
  checks.push_back(check_le("residual", rep.residual, 0.0, 1e-8));
  if (rep.upper_min_raised)
    checks.push_back(check_le("upper_min_raised_degree_le_upper_min", *rep.upper_min_raised,
                              rep.upper_min, rep.optimizer_gap + 1e-9));

  Outcome o;
  o.pass = all_pass(checks);
  if (cfg.format == "csv") {
    o.body = "d,lower,upper_v,upper_fu,upper_min,rel_gap,optimizer_gap,converged\n";
    for (const auto& r : series)
      o.body += std::to_string(r.d) + "," + csv_number(r.lower) + "," + csv_number(r.upper_v) + "," +
                csv_number(r.upper_fu) + "," + csv_number(r.upper_min) + "," +
                (r.rel_gap ? csv_number(*r.rel_gap) : std::string()) + "," +
                csv_number(r.optimizer_gap) + "," + (r.converged ? "true" : "false") + "\n";
    return o;
  }
  json j = to_json(rep);
  json s = json::array();
  for (const auto& r : series) s.push_back(to_json(r));
  j["config"] = config_json(cfg);
  j["degree_series"] = s;
  j["checks"] = to_json(checks);
  j["pass"] = o.pass;
  o.body = dump(j);
  return o;
}

Outcome cmd_flow(const RunConfig& cfg) {
  const auto [raw0, raw1] = load_pair(cfg, true, 1);
  const GaussianMixture nu0 = epsilon_mix(raw0, cfg.epsilon);
  const GaussianMixture nu1 = epsilon_mix(raw1, cfg.epsilon);
  FlowSetup setup;
  setup.degree = cfg.degree.value_or(10);
  setup.nodes_per_axis = cfg.nodes.value_or(raw0.dim() == 1 ? 20 : 8);
  setup.mc_points = cfg.samples.value_or(200000);
  setup.seed = *cfg.seed;
  if (nu0.dim() > 3) throw UsageError("flow supports dimensions 1 to 3");

  FlowConfig base = make_flow_config(nu0, nu1, cfg.m, setup);
  const Region region = evaluation_region(base, cfg.m);
  const auto family = make_test_family(nu0.dim(), 6, *cfg.seed, region);

  std::vector<FlowReport> reports;
  std::vector<Check> checks;
  double total_m = 0.0, total_2m = 0.0, noise_2m = 0.0;
  for (unsigned m : {cfg.m, 2 * cfg.m}) {
    FlowConfig c = base;
    c.m = m;
    for (const auto& f : family) {
      FlowReport r = run_flow(c, f);
      checks.push_back(Check{"flow_" + f.label + "_m" + std::to_string(m), r.total_gap,
                             r.combined_bound, r.tolerance, r.pass, "<="});
      (m == cfg.m ? total_m : total_2m) += r.total_taylor;
      if (m != cfg.m) noise_2m += r.tolerance - 1e-8;
      reports.push_back(std::move(r));
    }
  }
  const double ratio = total_2m > 0.0 ? total_m / total_2m : 0.0;
  const bool ratio_checked = total_2m > 1e-12 && total_2m > 10.0 * noise_2m;
  if (ratio_checked) {
    Check c{"taylor_total_ratio", ratio, 2.0, 0.2, ratio >= 1.8 && ratio <= 2.2, "in"};
    checks.push_back(c);
  }

  Outcome o;
  o.pass = all_pass(checks);
  if (cfg.format == "csv") {
    o.body = "test_function,m,k,taylor_err,taylor_bound,move_cost,move_bound\n";
    for (const auto& r : reports)
      for (const auto& s : r.per_step)
        o.body += r.label + "," + std::to_string(r.m) + "," + std::to_string(s.k) + "," +
                  csv_number(s.taylor_err) + "," + csv_number(s.taylor_bound) + "," +
                  csv_number(s.move_cost) + "," + csv_number(s.move_bound) + "\n";
    return o;
  }
  json rs = json::array();
  for (const auto& r : reports) rs.push_back(to_json(r));
  json j{{"config", config_json(cfg)},
         {"n", nu0.dim()},
         {"degree", setup.degree},
         {"quadrature", base.quadrature},
         {"mixing_epsilon", cfg.epsilon},
         {"density_floor", base.epsilon},
         {"reports", rs},
         {"taylor_total_ratio", ratio},
         {"taylor_ratio_checked", ratio_checked},
         {"checks", to_json(checks)},
         {"pass", o.pass}};
  o.body = dump(j);
  return o;
}

Outcome cmd_projection(const RunConfig& cfg) {
  const auto [nu0, nu1] = load_pair(cfg, false, 3);
  const std::size_t n = nu0.dim();
  if (n < 2 || n > 3) throw UsageError("projection supports dimensions 2 and 3");
  const std::size_t N = cfg.samples.value_or(300);
  const ProjectedCurve curve = projected_w1_curve(nu0, nu1, N, cfg.reps, *cfg.seed);

  const unsigned d = cfg.degree.value_or(4);
  const unsigned q = cfg.nodes.value_or(n == 2 ? 20 : 8);
  const QuadratureGrid grid = gauss_hermite_grid(n, std::max(q, d + 2));
  const ChaosFn alpha = difference_density(nu0, nu1, d, grid).alpha;
  MinimizeOptions mo;
  mo.budget = cfg.budget;
  const ReductionCheck red = finite_dim_reduction_check(alpha, 1, d, q, mo);

  std::vector<Check> checks;
  checks.push_back(check_near("reduction_equality", red.n_full_on_conditional, red.n_marginal,
                              red.tolerance));
  checks.push_back(check_le("reduction_jensen", red.n_marginal, red.n_full, red.tolerance));
  for (std::size_t k = 1; k < n; ++k) {
    const auto& lo = curve.by_k[k - 1];
    const auto& hi = curve.by_k[k];
    checks.push_back(check_le("w1_k" + std::to_string(k) + "_le_k" + std::to_string(k + 1),
                              lo.estimate, hi.estimate,
                              3.0 * std::hypot(lo.std_error, hi.std_error)));
  }

  Outcome o;
  o.pass = all_pass(checks);
  if (cfg.format == "csv") {
    o.body = "k,w1_estimate,std_error\n";
    for (std::size_t k = 0; k < n; ++k)
      o.body += std::to_string(k + 1) + "," + csv_number(curve.by_k[k].estimate) + "," +
                csv_number(curve.by_k[k].std_error) + "\n";
    return o;
  }
  json ks = json::array();
  for (std::size_t k = 0; k < n; ++k)
    ks.push_back({{"k", k + 1}, {"w1_estimate", curve.by_k[k].estimate},
                  {"std_error", curve.by_k[k].std_error}});
  json j{{"config", config_json(cfg)},
         {"n", n},
         {"samples", N},
         {"replications", cfg.reps},
         {"w1_by_k", ks},
         {"worst_replication_decrease", curve.worst_decrease},
         {"reduction", {{"k", red.k},
                        {"degree", d},
                        {"n_full_on_conditional", red.n_full_on_conditional},
                        {"n_marginal", red.n_marginal},
                        {"n_full", red.n_full},
                        {"projected_value", red.projected_value},
                        {"projected_residual", red.projected_residual},
                        {"tolerance", red.tolerance}}},
         {"checks", to_json(checks)},
         {"pass", o.pass}};
  o.body = dump(j);
  return o;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Kantorovich-Rubinstein distance and divergence representations on Gaussian space",
               "krdiv"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub, bool seed_required) {
    sub->add_option("--spec0", cfg.spec0, "measure spec for nu0 (JSON)");
    sub->add_option("--spec1", cfg.spec1, "measure spec for nu1 (JSON)");
    sub->add_option("--dim", cfg.dim, "dimension n")->check(CLI::Range(1, 6));
    sub->add_option("--degree", cfg.degree, "chaos truncation degree")->check(CLI::Range(0, 24));
    sub->add_option("--nodes", cfg.nodes, "Gauss-Hermite nodes per axis")->check(CLI::Range(1, 200));
    sub->add_option("--m", cfg.m, "flow step count")->check(CLI::Range(1, 4096));
    sub->add_option("--epsilon", cfg.epsilon, "mixing weight of mu")->check(CLI::Range(1e-6, 1.0));
    sub->add_option("--t", cfg.t, "smoothing time")->check(CLI::Range(0.0, 50.0));
    sub->add_option("--samples", cfg.samples, "sample size")->check(CLI::Range(2, 2000000));
    sub->add_option("--reps", cfg.reps, "replications")->check(CLI::Range(2, 10000));
    auto* seed = sub->add_option("--seed", cfg.seed, "random seed");
    if (seed_required) seed->required();
    sub->add_option("--budget", cfg.budget, "optimizer iteration budget")->check(CLI::Range(1, 1000000));
    sub->add_option("--out", cfg.out, "output file (written atomically)");
    sub->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* verify = app.add_subcommand("verify-operators", "operator identity and semigroup checks");
  common(verify, false);
  verify->add_flag("--inject-fault", cfg.inject_fault, "corrupt one coefficient (test hook)")
      ->group("");
  common(app.add_subcommand("w1", "W1 oracles for two measure specs"), true);
  common(app.add_subcommand("theorem", "lower and upper bounds on W1 via divergence fields"), true);
  common(app.add_subcommand("flow", "discretized transport flow error budget"), true);
  common(app.add_subcommand("projection", "W1 versus retained dimension and reduction check"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  Outcome outcome;
  try {
    if (cfg.command == "verify-operators") outcome = cmd_verify_operators(cfg);
    else if (cfg.command == "w1") outcome = cmd_w1(cfg);
    else if (cfg.command == "theorem") outcome = cmd_theorem(cfg);
    else if (cfg.command == "flow") outcome = cmd_flow(cfg);
    else outcome = cmd_projection(cfg);
  } catch (const SpecError& e) {
    err << "krdiv: spec error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "krdiv: " << e.what() << "\n";
    return kUsage;
  } catch (const ResourceGuardError& e) {
    err << "krdiv: resource limit: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "krdiv: " << cfg.command << " failed: " << e.what() << "\n";
    return kUsage;
  }

  if (cfg.out.empty()) {
    out << outcome.body;
  } else {
    try {
      write_atomic(cfg.out, outcome.body);
    } catch (const std::exception& e) {
      err << "krdiv: " << e.what() << "\n";
      return kUsage;
    }
  }
  if (!outcome.pass) err << "krdiv: " << cfg.command << ": at least one check failed\n";
  return outcome.pass ? kPass : kCheckFailed;
}

}  // namespace krdiv::cli
