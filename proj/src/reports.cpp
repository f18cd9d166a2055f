#include "krdiv/reports.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "krdiv/malliavin.hpp"

namespace krdiv {

using nlohmann::json;

Check check_le(std::string name, double value, double bound, double tol) {
  return Check{std::move(name), value, bound, tol, value <= bound + tol, "<="};
}

Check check_near(std::string name, double value, double reference, double tol) {
  return Check{std::move(name), value, reference, tol, std::abs(value - reference) <= tol, "=="};
}

bool all_pass(const std::vector<Check>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

namespace {

/// JSON has no infinity or NaN; those become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const Check& c) {
  return json{{"name", c.name},           {"value", number(c.value)},
              {"relation", c.relation},   {"reference", number(c.reference)},
              {"tolerance", c.tolerance}, {"pass", c.pass}};
}

json to_json(const std::vector<Check>& checks) {
  json out = json::array();
  for (const auto& c : checks) out.push_back(to_json(c));
  return out;
}

json to_json(const GaussianMixture& m) {
  json comps = json::array();
  for (const auto& c : m.components()) {
    json cov = json::array();
    for (Eigen::Index r = 0; r < c.cov.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index s = 0; s < c.cov.cols(); ++s) row.push_back(c.cov(r, s));
      cov.push_back(row);
    }
    comps.push_back({{"weight", c.weight},
                     {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                     {"cov", cov}});
  }
  return json{{"dim", m.dim()}, {"components", comps}};
}

json to_json(const GapReport& r) {
  json j{{"n", r.n},
         {"d", r.d},
         {"epsilon", r.epsilon},
         {"lower", r.lower},
         {"lower_method", r.lower_method},
         {"lower_sliced", r.lower_sliced},
         {"lower_dual_potential", r.lower_dual_potential},
         {"dual_lp_on_samples", r.dual_lp_value},
         {"upper_v", r.upper_v},
         {"upper_fu", r.upper_fu},
         {"upper_min", r.upper_min},
         {"rel_gap", r.rel_gap ? json(*r.rel_gap) : json(nullptr)},
         {"residual", r.residual},
         {"mean_adjustment", r.mean_adjustment},
         {"optimizer_gap", r.optimizer_gap},
         {"truncation_tail", number(r.truncation_tail)},
         {"tolerance", r.tolerance},
         {"iterations", r.iterations},
         {"converged", r.converged},
         {"sandwich_pass", r.sandwich_pass},
         {"fu_pass", r.fu_pass},
         {"quadrature", r.quadrature}};
  if (r.n == 1) j["lower_exact_1d"] = r.lower_exact_1d;
  if (r.upper_min_raised) j["upper_min_raised_degree"] = *r.upper_min_raised;
  if (r.upper_v_quadrature) j["upper_v_quadrature"] = *r.upper_v_quadrature;
  if (r.upper_min_quadrature) j["upper_min_quadrature"] = *r.upper_min_quadrature;
  return j;
}

json to_json(const FlowReport& r) {
  json steps = json::array();
  for (const auto& s : r.per_step) {
    json e{{"k", s.k},
           {"taylor_err", s.taylor_err},
           {"taylor_bound", s.taylor_bound},
           {"move_cost", s.move_cost},
           {"move_bound", s.move_bound}};
    if (s.taylor_stderr > 0.0) e["taylor_stderr"] = s.taylor_stderr;
    steps.push_back(e);
  }
  return json{{"test_function", r.label},
              {"m", r.m},
              {"epsilon", r.epsilon},
              {"E_abs_u", r.E_abs_u},
              {"E_sq_u", r.E_sq_u},
              {"C", r.C},
              {"per_step", steps},
              {"total_gap", r.total_gap},
              {"telescoped", r.telescoped},
              {"total_taylor", r.total_taylor},
              {"total_move", r.total_move},
              {"combined_bound", r.combined_bound},
              {"tolerance", r.tolerance},
              {"guard_trips", r.guard_trips},
              {"pass", r.pass}};
}

json to_json(const MinimizeResult& r) {
  return json{{"value", r.value},         {"dual_value", r.dual_value},
              {"gap", r.gap},             {"residual", r.residual},
              {"degree", r.degree},       {"quadrature", r.quadrature},
              {"kernel_dim", r.kernel_dim}, {"iterations", r.iterations},
              {"converged", r.converged}, {"trace_length", r.trace.size()}};
}

namespace {

std::vector<double> read_vector(const json& j, const std::string& field) {
  if (!j.is_array()) throw SpecError(field + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw SpecError(field + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

}  // namespace

GaussianMixture mixture_from_json(const json& j) {
  if (!j.is_object()) throw SpecError("spec: expected a JSON object");
  if (!j.contains("dim")) throw SpecError("dim: missing");
  if (!j["dim"].is_number_integer() || j["dim"].get<long long>() <= 0)
    throw SpecError("dim: must be a positive integer");
  const auto n = std::size_t(j["dim"].get<long long>());
  if (!j.contains("components")) throw SpecError("components: missing");
  const json& comps = j["components"];
  if (!comps.is_array()) throw SpecError("components: expected an array");
  std::vector<GaussianComponent> out;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string where = "components[" + std::to_string(k) + "]";
    const json& c = comps[k];
    if (!c.is_object()) throw SpecError(where + ": expected an object");
    for (const char* key : {"weight", "mean", "cov"})
      if (!c.contains(key)) throw SpecError(where + "." + key + ": missing");
    if (!c["weight"].is_number()) throw SpecError(where + ".weight: expected a number");
    GaussianComponent g;
    g.weight = c["weight"].get<double>();
    const auto mean = read_vector(c["mean"], where + ".mean");
    if (mean.size() != n)
      throw SpecError(where + ".mean: expected " + std::to_string(n) + " entries");
    g.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), Eigen::Index(n));
    const json& cov = c["cov"];
    if (!cov.is_array() || cov.size() != n)
      throw SpecError(where + ".cov: expected a " + std::to_string(n) + "x" + std::to_string(n) +
                      " matrix");
    g.cov.resize(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = read_vector(cov[r], where + ".cov[" + std::to_string(r) + "]");
      if (row.size() != n)
        throw SpecError(where + ".cov[" + std::to_string(r) + "]: expected " + std::to_string(n) +
                        " entries");
      for (std::size_t s = 0; s < n; ++s) g.cov(Eigen::Index(r), Eigen::Index(s)) = row[s];
    }
    out.push_back(std::move(g));
  }
  return GaussianMixture(n, std::move(out));
}

GaussianMixture load_mixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(path.string() + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
  try {
    return mixture_from_json(j);
  } catch (const SpecError& e) {
    throw SpecError(path.string() + ": " + e.what());
  }
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  const auto tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error(path.string() + ": write failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

ChaosFn random_chaos(std::size_t dim, unsigned max_degree, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  ChaosFn f(dim, max_degree);
  for (const auto& beta : indices_up_to(dim, max_degree)) f.set(beta, normal(rng));
  return f;
}

std::vector<Check> verify_operators(const OperatorSuiteConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = cfg.dim;
  const unsigned d = cfg.degree;
  double adj = 0.0, idl = 0.0, rep = 0.0, order1 = 0.0;
  double excess = -std::numeric_limits<double>::infinity();
  double strict_gap = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.count; ++r) {
    const ChaosFn f = random_chaos(n, d, rng);
    VectorField u = VectorField::zero(n, d > 0 ? d - 1 : 0);
    for (std::size_t i = 0; i < n; ++i) u[i] = random_chaos(n, d > 0 ? d - 1 : 0, rng);
    adj = std::max(adj, std::abs(inner_product(u, derivative(f)) - inner_product(divergence(u), f)));
    idl = std::max(idl, max_coeff_diff(divergence(derivative(f)), number_operator(f)));

    const VectorField v = min_norm_field(f);
    ChaosFn iv = divergence(v);
    if (cfg.inject_fault && r == 0 && d > 0) iv.add(MultiIndex::unit(n, 0), 1e-3);
    rep = std::max(rep, max_coeff_diff(iv, f.centered()));

    const double vn = std::sqrt(v.l2_norm_sq()), an = f.centered().norm();
    excess = std::max(excess, vn - an);
    if (d >= 2) strict_gap = std::min(strict_gap, an - vn);

    ChaosFn lin(n, 1);
    for (std::size_t i = 0; i < n; ++i) lin.set(MultiIndex::unit(n, i), f.coeff(MultiIndex::unit(n, i)));
    order1 = std::max(order1, std::abs(std::sqrt(min_norm_field(lin).l2_norm_sq()) - lin.norm()));
  }
  std::vector<Check> out;
  out.push_back(check_le("adjointness", adj, 0.0, cfg.identity_tol));
  out.push_back(check_le("id_equals_l", idl, 0.0, cfg.identity_tol));
  out.push_back(check_le("representation", rep, 0.0, cfg.identity_tol));
  out.push_back(check_le("norm_contraction", excess, 0.0, cfg.identity_tol));
  out.push_back(check_le("norm_equality_order1", order1, 0.0, cfg.identity_tol));
  if (d >= 2) {
    Check c{"norm_strict_higher_order", strict_gap, 0.0, cfg.identity_tol,
            strict_gap > cfg.identity_tol, ">"};
    out.push_back(c);
  }

  const QuadratureGrid grid = gauss_hermite_grid(n, cfg.nodes_per_axis);
  const ChaosFn f = random_chaos(n, d, rng);
  double mehler = 0.0, law = 0.0;
  for (double t : cfg.times) {
    mehler = std::max(mehler, max_coeff_diff(ou_semigroup(f, t), mehler_apply(f, t, grid)));
    for (double s : cfg.times) {
      const ChaosFn twice = mehler_apply(mehler_apply(f, s, grid), t, grid);
      law = std::max(law, max_coeff_diff(twice, mehler_apply(f, s + t, grid)));
    }
  }
  out.push_back(check_le("mehler_agreement", mehler, 0.0, cfg.mehler_tol));
  out.push_back(check_le("semigroup_law", law, 0.0, cfg.mehler_tol));
  return out;
}

}  // namespace krdiv
