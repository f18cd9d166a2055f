#include "krdiv/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>

#include "krdiv/lp_simplex.hpp"
#include "krdiv/malliavin.hpp"

namespace krdiv {

double euclidean_distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

double total_mass(const DiscreteMeasure& m) {
  double s = 0.0;
  for (double w : m.weights) s += w;
  return s;
}

void check_pair(const DiscreteMeasure& a, const DiscreteMeasure& b, const char* who) {
  a.validate();
  b.validate();
  if (a.dim != b.dim) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  if (std::abs(total_mass(a) - total_mass(b)) > 1e-9)
    throw std::invalid_argument(std::string(who) + ": unbalanced masses");
}

}  // namespace

// ---------------------------------------------------------------------------
// Successive shortest paths on the bipartite residual graph. Nodes 0..na-1 are
// sources, na..na+nb-1 targets. Potentials keep every residual reduced cost
// non-negative, so each phase is a Dijkstra search.

TransportPlan w1_lp(const DiscreteMeasure& a, const DiscreteMeasure& b, std::size_t arc_budget) {
  check_pair(a, b, "w1_lp");
  const std::size_t na = a.size(), nb = b.size();
  if (na * nb > arc_budget)
    throw ResourceGuardError("w1_lp: " + std::to_string(na * nb) + " arcs exceed the budget of " +
                             std::to_string(arc_budget));

  std::vector<double> cost(na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) cost[i * nb + j] = euclidean_distance(a.atom(i), b.atom(j));
  auto C = [&](std::size_t i, std::size_t j) { return cost[i * nb + j]; };

  std::vector<double> flow(na * nb, 0.0);
  std::vector<std::vector<std::size_t>> col_rows(nb);  // rows with positive flow into column j
  std::vector<double> supply = a.weights, demand = b.weights;
  constexpr double kMassTol = 1e-15;

  const std::size_t V = na + nb;
  std::vector<double> pot(V, 0.0);
  for (std::size_t j = 0; j < nb; ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < na; ++i) m = std::min(m, C(i, j));
    pot[na + j] = m;
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(V);
  std::vector<std::size_t> prev(V);
  std::vector<char> done(V);
  using Entry = std::pair<double, std::size_t>;

  for (;;) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    bool any_source = false;
    for (std::size_t i = 0; i < na; ++i)
      if (supply[i] > kMassTol) {
        dist[i] = 0.0;
        prev[i] = i;
        heap.emplace(0.0, i);
        any_source = true;
      }
    if (!any_source) break;

    std::size_t target = V;
    while (!heap.empty()) {
      auto [dv, v] = heap.top();
      heap.pop();
      if (done[v] || dv > dist[v]) continue;
      done[v] = 1;
      if (v < na) {
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t w = na + j;
          if (done[w]) continue;
          const double nd = dv + std::max(0.0, C(v, j) + pot[v] - pot[w]);
          if (nd < dist[w]) {
            dist[w] = nd;
            prev[w] = v;
            heap.emplace(nd, w);
          }
        }
      } else {
        const std::size_t j = v - na;
        if (demand[j] > kMassTol) {
          target = v;
          break;
        }
        auto& rows = col_rows[j];
        std::erase_if(rows, [&](std::size_t i) { return flow[i * nb + j] <= 0.0; });
        for (std::size_t i : rows) {
          if (done[i]) continue;
          const double nd = dv + std::max(0.0, -C(i, j) + pot[v] - pot[i]);
          if (nd < dist[i]) {
            dist[i] = nd;
            prev[i] = v;
            heap.emplace(nd, i);
          }
        }
      }
    }
    if (target == V) break;  // leftover mass is within the balance tolerance

    const double dt = dist[target];
    for (std::size_t v = 0; v < V; ++v) pot[v] += std::min(dist[v], dt);

    // bottleneck along the path
    double delta = demand[target - na];
    std::size_t v = target;
    while (prev[v] != v) {
      const std::size_t u = prev[v];
      if (u >= na) delta = std::min(delta, flow[v * nb + (u - na)]);  // backward arc col u -> row v
      v = u;
    }
    const std::size_t src = v;
    delta = std::min(delta, supply[src]);

    v = target;
    while (prev[v] != v) {
      const std::size_t u = prev[v];
      if (u < na) {
        double& f = flow[u * nb + (v - na)];
        if (f <= 0.0) col_rows[v - na].push_back(u);
        f += delta;
      } else {
        double& f = flow[v * nb + (u - na)];
        f -= delta;
        if (f < 1e-300) f = 0.0;
      }
      v = u;
    }
    supply[src] -= delta;
    demand[target - na] -= delta;
  }

  TransportPlan plan;
  plan.source_potential.resize(na);
  plan.target_potential.resize(nb);
  for (std::size_t i = 0; i < na; ++i) plan.source_potential[i] = -pot[i];
  for (std::size_t j = 0; j < nb; ++j) plan.target_potential[j] = pot[na + j];

  std::vector<double> row_sum(na, 0.0), col_sum(nb, 0.0);
  double violation = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      const double slack = C(i, j) - plan.source_potential[i] - plan.target_potential[j];
      violation = std::max(violation, -slack);
      const double f = flow[i * nb + j];
      if (f > 0.0) {
        violation = std::max(violation, std::abs(slack));
        plan.arcs.push_back({i, j, f, f * C(i, j)});
        plan.cost += f * C(i, j);
        row_sum[i] += f;
        col_sum[j] += f;
      }
    }
  plan.certificate_violation = violation;
  for (std::size_t i = 0; i < na; ++i) {
    plan.dual_objective += a.weights[i] * plan.source_potential[i];
    plan.marginal_error = std::max(plan.marginal_error, std::abs(row_sum[i] - a.weights[i]));
  }
  for (std::size_t j = 0; j < nb; ++j) {
    plan.dual_objective += b.weights[j] * plan.target_potential[j];
    plan.marginal_error = std::max(plan.marginal_error, std::abs(col_sum[j] - b.weights[j]));
  }
  return plan;
}

// ---------------------------------------------------------------------------

double DualPotential::extend(std::span<const double> x) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i)
    best = std::min(best, values[i] + euclidean_distance(x, atom(i)));
  return best;
}

namespace {

RevisedSimplex::Column arc_column(std::size_t i, std::size_t j, double cost) {
  // row r corresponds to node r + 1; node 0 is the dropped root
  RevisedSimplex::Column col;
  col.cost = cost;
  if (i != 0) col.entries.emplace_back(int(i - 1), 1.0);
  if (j != 0) col.entries.emplace_back(int(j - 1), -1.0);
  return col;
}

}  // namespace

DualBound w1_dual_lb(const DiscreteMeasure& a, const DiscreteMeasure& b,
                     std::size_t full_pair_limit) {
  check_pair(a, b, "w1_dual_lb");
  const std::size_t n = a.dim;

  // union support; supply s = a - b
  std::map<std::vector<double>, std::size_t> index_of;
  DualPotential pot;
  pot.dim = n;
  std::vector<double> supply;
  auto add_atoms = [&](const DiscreteMeasure& m, double sign) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      auto x = m.atom(i);
      std::vector<double> key(x.begin(), x.end());
      auto [it, inserted] = index_of.try_emplace(key, supply.size());
      if (inserted) {
        supply.push_back(0.0);
        pot.support.insert(pot.support.end(), x.begin(), x.end());
      }
      supply[it->second] += sign * m.weights[i];
    }
  };
  add_atoms(a, 1.0);
  add_atoms(b, -1.0);
  const std::size_t N = supply.size();
  pot.values.assign(N, 0.0);

  DualBound out;
  if (N == 1) {
    out.potential = std::move(pot);
    return out;
  }
  // exact balance keeps the star basis feasible
  double excess = 0.0;
  for (double s : supply) excess += s;
  supply[0] -= excess;

  auto dist = [&](std::size_t i, std::size_t j) { return euclidean_distance(pot.atom(i), pot.atom(j)); };

  std::vector<double> rhs(supply.begin() + 1, supply.end());
  RevisedSimplex lp(int(N - 1), rhs);
  std::vector<int> basis;
  std::vector<char> present(N * N, 0);
  for (std::size_t i = 1; i < N; ++i) {
    const std::size_t from = supply[i] >= 0.0 ? i : 0;
    const std::size_t to = supply[i] >= 0.0 ? 0 : i;
    basis.push_back(lp.add_column(arc_column(from, to, dist(from, to))));
    present[from * N + to] = 1;
  }
  auto add_arc = [&](std::size_t i, std::size_t j) {
    if (i == j || present[i * N + j]) return;
    present[i * N + j] = 1;
    lp.add_column(arc_column(i, j, dist(i, j)));
  };

  const bool generate = N > full_pair_limit;
  if (!generate) {
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) add_arc(i, j);
  } else {
    constexpr std::size_t kNeighbours = 16;
    std::vector<std::pair<double, std::size_t>> row(N);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) row[j] = {j == i ? std::numeric_limits<double>::infinity() : dist(i, j), j};
      std::partial_sort(row.begin(), row.begin() + std::ptrdiff_t(std::min(kNeighbours, N - 1)),
                        row.end());
      for (std::size_t k = 0; k < std::min(kNeighbours, N - 1); ++k) {
        add_arc(i, row[k].second);
        add_arc(row[k].second, i);
      }
    }
  }
  lp.set_basis(basis);

  auto node_dual = [&](std::size_t i) { return i == 0 ? 0.0 : lp.duals()(Eigen::Index(i - 1)); };
  for (;;) {
    ++out.constraint_rounds;
    const auto status = lp.solve(200 * N + 20000);
    if (status != RevisedSimplex::Status::Optimal)
      throw std::runtime_error("w1_dual_lb: simplex did not reach optimality");
    if (!generate) break;
    std::vector<std::tuple<double, std::size_t, std::size_t>> violated;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) {
        if (i == j || present[i * N + j]) continue;
        const double rc = dist(i, j) - (node_dual(i) - node_dual(j));
        if (rc < -1e-8) violated.emplace_back(rc, i, j);
      }
    if (violated.empty()) break;
    std::sort(violated.begin(), violated.end());
    const std::size_t take = std::min(violated.size(), 20 * N);
    for (std::size_t k = 0; k < take; ++k) add_arc(std::get<1>(violated[k]), std::get<2>(violated[k]));
  }
  out.lp_iterations = lp.iterations();

  for (std::size_t i = 0; i < N; ++i) pot.values[i] = -node_dual(i);
  double value = 0.0;
  for (std::size_t i = 0; i < N; ++i) value -= supply[i] * pot.values[i];
  double cert = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j)
      cert = std::max(cert, std::abs(pot.values[i] - pot.values[j]) / dist(i, j));
  pot.lipschitz_cert = cert;
  out.value = value;
  out.potential = std::move(pot);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Component1d {
  double weight, mean, sd;
};

std::vector<Component1d> as_1d(const GaussianMixture& m) {
  std::vector<Component1d> out;
  for (const auto& c : m.components())
    out.push_back({c.weight, c.mean(0), std::sqrt(std::max(0.0, c.cov(0, 0)))});
  return out;
}

double mixture_cdf(const std::vector<Component1d>& comps, double x) {
  double F = 0.0;
  for (const auto& c : comps) {
    if (c.sd > 0.0)
      F += c.weight * 0.5 * std::erfc(-(x - c.mean) / (c.sd * std::numbers::sqrt2));
    else if (x >= c.mean)
      F += c.weight;
  }
  return F;
}

double w1_1d(const std::vector<Component1d>& c0, const std::vector<Component1d>& c1,
             std::size_t resolution) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* comps : {&c0, &c1})
    for (const auto& c : *comps) {
      const double r = c.sd > 0.0 ? 8.0 * c.sd : 1.0;
      lo = std::min(lo, c.mean - r);
      hi = std::max(hi, c.mean + r);
    }
  const double h = (hi - lo) / double(resolution - 1);
  double s = 0.0;
  for (std::size_t k = 0; k < resolution; ++k) {
    const double x = lo + h * double(k);
    const double g = std::abs(mixture_cdf(c0, x) - mixture_cdf(c1, x));
    s += (k == 0 || k + 1 == resolution) ? 0.5 * g : g;
  }
  return s * h;
}

}  // namespace

double w1_exact_1d(const GaussianMixture& nu0, const GaussianMixture& nu1, std::size_t resolution) {
  if (nu0.dim() != 1 || nu1.dim() != 1)
    throw std::invalid_argument("w1_exact_1d: both measures must be one-dimensional");
  if (resolution < 2) throw std::invalid_argument("w1_exact_1d: resolution must be >= 2");
  return w1_1d(as_1d(nu0), as_1d(nu1), resolution);
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep, unsigned side) {
  std::uint64_t z = seed + 2 * std::uint64_t(rep) + side + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

W1Estimate w1_estimate(const GaussianMixture& nu0, const GaussianMixture& nu1,
                       std::size_t samples, std::size_t replications, std::uint64_t seed) {
  if (samples == 0 || replications == 0)
    throw std::invalid_argument("w1_estimate: samples and replications must be >= 1");
  W1Estimate est;
  for (std::size_t r = 0; r < replications; ++r) {
    const auto a = sample(nu0, samples, replication_seed(seed, r, 0));
    const auto b = sample(nu1, samples, replication_seed(seed, r, 1));
    est.replications.push_back(w1_lp(a, b).cost);
  }
  double mean = 0.0;
  for (double v : est.replications) mean += v;
  mean /= double(replications);
  double var = 0.0;
  for (double v : est.replications) var += (v - mean) * (v - mean);
  est.estimate = mean;
  est.std_error = replications > 1 ? std::sqrt(var / double(replications - 1) / double(replications)) : 0.0;
  return est;
}

namespace {

DiscreteMeasure leading_coords(const DiscreteMeasure& m, std::size_t k) {
  DiscreteMeasure out;
  out.dim = k;
  out.weights = m.weights;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t c = 0; c < k; ++c) out.atoms.push_back(m.atom(i)[c]);
  return out;
}

W1Estimate summarize(std::vector<double> values) {
  W1Estimate est;
  const double R = double(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= R;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  est.estimate = mean;
  est.std_error = values.size() > 1 ? std::sqrt(var / (R - 1.0) / R) : 0.0;
  est.replications = std::move(values);
  return est;
}

}  // namespace

ProjectedCurve projected_w1_curve(const GaussianMixture& nu0, const GaussianMixture& nu1,
                                  std::size_t samples, std::size_t replications, std::uint64_t seed) {
  if (nu0.dim() != nu1.dim()) throw std::invalid_argument("projected_w1_curve: dimension mismatch");
  if (samples == 0 || replications == 0)
    throw std::invalid_argument("projected_w1_curve: samples and replications must be >= 1");
  const std::size_t n = nu0.dim();
  std::vector<std::vector<double>> values(n);
  ProjectedCurve curve;
  for (std::size_t r = 0; r < replications; ++r) {
    const auto a = sample(nu0, samples, replication_seed(seed, r, 0));
    const auto b = sample(nu1, samples, replication_seed(seed, r, 1));
    for (std::size_t k = 1; k <= n; ++k) {
      const double v = k == n ? w1_lp(a, b).cost : w1_lp(leading_coords(a, k), leading_coords(b, k)).cost;
      if (k > 1) curve.worst_decrease = std::max(curve.worst_decrease, values[k - 2].back() - v);
      values[k - 1].push_back(v);
    }
  }
  for (auto& v : values) curve.by_k.push_back(summarize(std::move(v)));
  return curve;
}

double w1_sliced_lower_bound(const GaussianMixture& nu0, const GaussianMixture& nu1,
                             std::size_t directions) {
  if (nu0.dim() != nu1.dim()) throw std::invalid_argument("w1_sliced_lower_bound: dimension mismatch");
  const std::size_t n = nu0.dim();
  std::vector<Eigen::VectorXd> dirs;
  if (n == 1) {
    dirs.push_back(Eigen::VectorXd::Ones(1));
  } else if (n == 2) {
    for (std::size_t k = 0; k < directions; ++k) {
      const double th = std::numbers::pi * double(k) / double(directions);
      dirs.push_back((Eigen::VectorXd(2) << std::cos(th), std::sin(th)).finished());
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) dirs.push_back(Eigen::VectorXd::Unit(Eigen::Index(n), Eigen::Index(i)));
    std::mt19937_64 rng(0x51ced);
    std::normal_distribution<double> normal;
    while (dirs.size() < directions) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(n));
      for (auto& c : v) c = normal(rng);
      dirs.push_back(v.normalized());
    }
  }
  auto slice = [](const GaussianMixture& m, const Eigen::VectorXd& th) {
    std::vector<Component1d> out;
    for (const auto& c : m.components())
      out.push_back({c.weight, th.dot(c.mean), std::sqrt(std::max(0.0, th.dot(c.cov * th)))});
    return out;
  };
  double best = 0.0;
  for (const auto& th : dirs) best = std::max(best, w1_1d(slice(nu0, th), slice(nu1, th), 20001));
  return best;
}

double dual_potential_bound(const DualPotential& f, const GaussianMixture& nu0,
                            const GaussianMixture& nu1, unsigned nodes_per_axis) {
  Sampler ext = [&](std::span<const double> x) { return f.extend(x); };
  return integrate_mixture(nu1, ext, nodes_per_axis) - integrate_mixture(nu0, ext, nodes_per_axis);
}

SmoothingStability smoothing_stability(const GaussianMixture& nu0, const GaussianMixture& nu1,
                                       double t, const SmoothingOptions& options) {
  if (nu0.dim() != nu1.dim()) throw std::invalid_argument("smoothing_stability: dimension mismatch");
  const std::size_t n = nu0.dim();
  SmoothingStability out;
  out.t = t;
  const auto grid = gauss_hermite_grid(n, options.nodes_per_axis);
  const ChaosFn alpha = difference_density(nu0, nu1, options.degree, grid).alpha;
  out.bound = std::sqrt(double(n)) * (alpha - ou_semigroup(alpha, t)).norm();

  const auto s0 = ou_smooth_measure(nu0, t), s1 = ou_smooth_measure(nu1, t);
  if (n == 1) {
    out.measured = std::abs(w1_exact_1d(s0, s1) - w1_exact_1d(nu0, nu1));
  } else {
    const auto et = w1_estimate(s0, s1, options.samples, options.replications, options.seed);
    const auto e0 = w1_estimate(nu0, nu1, options.samples, options.replications, options.seed);
    out.measured = std::abs(et.estimate - e0.estimate);
    out.std_error = std::hypot(et.std_error, e0.std_error);
  }
  out.tolerance = 3.0 * out.std_error + 1e-9;
  out.pass = out.measured <= out.bound + out.tolerance;
  return out;
}

void write_plan_csv(std::ostream& os, const TransportPlan& plan) {
  os << "src_idx,dst_idx,flow,cost_contrib\n";
  os.precision(17);
  for (const auto& arc : plan.arcs)
    os << arc.src << ',' << arc.dst << ',' << arc.flow << ',' << arc.cost_contrib << '\n';
}

void write_dual_csv(std::ostream& os, const DualPotential& potential) {
  os << "atom,potential\n";
  os.precision(17);
  for (std::size_t i = 0; i < potential.size(); ++i) os << i << ',' << potential.values[i] << '\n';
}

}  // namespace krdiv
