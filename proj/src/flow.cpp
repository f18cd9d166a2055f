#include "krdiv/flow.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "krdiv/malliavin.hpp"

namespace krdiv {

namespace {

struct PointCache {
  std::vector<double> a0, a1;  // densities at the points
  std::vector<double> uval;    // row-major u(x_j)
  std::vector<double> unorm;
};

PointCache cache_points(const FlowConfig& cfg) {
  const std::size_t n = cfg.u.dim(), N = cfg.points.size();
  const unsigned d = std::max({cfg.u.max_degree(), cfg.alpha0.max_degree(), cfg.alpha1.max_degree()});
  PointCache c;
  c.a0.resize(N);
  c.a1.resize(N);
  c.uval.resize(N * n);
  c.unorm.resize(N);
  for (std::size_t j = 0; j < N; ++j) {
    const PointBasis basis(cfg.points.point(j), d);
    c.a0[j] = cfg.alpha0(basis);
    c.a1[j] = cfg.alpha1(basis);
    cfg.u.evaluate(basis, std::span<double>(c.uval.data() + j * n, n));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += c.uval[j * n + i] * c.uval[j * n + i];
    c.unorm[j] = std::sqrt(s);
  }
  return c;
}

double hessian_norm(const Eigen::MatrixXd& h) {
  if (h.rows() == 1) return std::abs(h(0, 0));
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

/// Dense tensor grid over the region; returns the spacing.
std::vector<std::vector<double>> dense_grid(const Region& region, double& spacing) {
  const std::size_t n = region.lo.size();
  const std::size_t per_axis =
      std::clamp<std::size_t>(std::size_t(std::pow(40000.0, 1.0 / double(n))), 3, 2001);
  std::vector<std::vector<double>> axes(n);
  spacing = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = (region.hi[i] - region.lo[i]) / double(per_axis - 1);
    spacing = std::max(spacing, h);
    for (std::size_t a = 0; a < per_axis; ++a) axes[i].push_back(region.lo[i] + double(a) * h);
  }
  std::vector<std::vector<double>> pts;
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = axes[i][idx[i]];
    pts.push_back(std::move(x));
    std::size_t i = n;
    while (i > 0 && ++idx[i - 1] == per_axis) idx[--i] = 0;
    if (i == 0) break;
  }
  return pts;
}

}  // namespace

FlowConfig make_flow_config(const GaussianMixture& nu0, const GaussianMixture& nu1, unsigned m,
                            const FlowSetup& setup) {
  if (nu0.dim() != nu1.dim()) throw std::invalid_argument("make_flow_config: dimension mismatch");
  if (m == 0) throw std::invalid_argument("make_flow_config: m must be positive");
  const std::size_t n = nu0.dim();
  const unsigned d = setup.degree;
  if (n <= 2 && 2 * setup.nodes_per_axis < d + 2)
    throw std::invalid_argument("make_flow_config: " + std::to_string(setup.nodes_per_axis) +
                                " nodes per axis cannot integrate degree " + std::to_string(d + 1) +
                                " exactly; need at least " + std::to_string((d + 3) / 2));
  const unsigned proj_q = n <= 2 ? std::max(40u, setup.nodes_per_axis) : std::max(d + 2, 10u);
  const QuadratureGrid proj = gauss_hermite_grid(n, proj_q);

  FlowConfig cfg;
  cfg.m = m;
  cfg.alpha0 = density_projection(nu0, d, proj);
  const ChaosFn alpha = difference_density(nu0, nu1, d, proj).alpha;
  cfg.u = min_norm_field(alpha);
  cfg.alpha1 = cfg.alpha0 + divergence(cfg.u);
  if (n <= 2) {
    const QuadratureGrid grid = gauss_hermite_grid(n, setup.nodes_per_axis);
    cfg.points = grid;
  } else {
    cfg.points = monte_carlo_points(n, setup.mc_points, setup.seed);
    cfg.monte_carlo = true;
  }
  cfg.quadrature = cfg.points.description;
  const PointCache c = cache_points(cfg);
  double floor = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cfg.points.size(); ++j) floor = std::min({floor, c.a0[j], c.a1[j]});
  if (!(floor > 0.0))
    throw FlowGuardError("make_flow_config: density is not positive at some evaluation point; use fewer nodes or a higher degree");
  cfg.epsilon = floor;
  return cfg;
}

ChaosFn interp_density(const FlowConfig& cfg, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interp_density: t must lie in [0, 1]");
  return cfg.alpha0 + t * (cfg.alpha1 - cfg.alpha0);
}

std::vector<double> flow_step(const FlowConfig& cfg, unsigned k, std::span<const double> x) {
  if (k >= cfg.m) throw std::invalid_argument("flow_step: k must be below m");
  const double t = double(k) / double(cfg.m);
  const double a = cfg.alpha0(x) + t * (cfg.alpha1(x) - cfg.alpha0(x));
  if (a < 0.5 * cfg.epsilon) throw FlowGuardError("flow_step: density below half the floor");
  std::vector<double> out = cfg.u(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + out[i] / (double(cfg.m) * a);
  return out;
}

Region evaluation_region(const FlowConfig& cfg, unsigned coarsest_m) {
  const std::size_t n = cfg.u.dim();
  const PointCache c = cache_points(cfg);
  Region r;
  r.lo.assign(n, std::numeric_limits<double>::infinity());
  r.hi.assign(n, -std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < cfg.points.size(); ++j) {
    const double amin = std::min(c.a0[j], c.a1[j]);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = cfg.points.point(j)[i];
      const double y = x + c.uval[j * n + i] / (double(coarsest_m) * amin);
      r.lo[i] = std::min({r.lo[i], x, y});
      r.hi[i] = std::max({r.hi[i], x, y});
    }
  }
  return r;
}

TestFunction make_test_function(std::string label, const ChaosFn& f, const Region& region) {
  const std::size_t n = f.dim();
  TestFunction tf;
  tf.label = std::move(label);
  tf.f = f;
  tf.grad = derivative(f);
  for (std::size_t i = 0; i < n; ++i) {
    const VectorField row = derivative(tf.grad[i]);
    for (std::size_t j = 0; j < n; ++j) tf.hessian.push_back(row[j]);
  }
  double h = 0.0;
  const auto pts = dense_grid(region, h);
  const unsigned d = std::max(f.max_degree(), 1u);
  double gmax = 0.0, cmax = 0.0;
  std::vector<double> g(n);
  const auto nn = Eigen::Index(n);
  Eigen::MatrixXd hess(nn, nn);
  for (const auto& x : pts) {
    const PointBasis basis(x, d);
    tf.grad.evaluate(basis, g);
    double s = 0.0;
    for (double v : g) s += v * v;
    gmax = std::max(gmax, std::sqrt(s));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        hess(Eigen::Index(i), Eigen::Index(j)) = tf.hessian[i * n + j](basis);
    cmax = std::max(cmax, hessian_norm(hess));
  }
  tf.hessian_bound = cmax;
  // any point of the box is within sqrt(n) h / 2 of a grid node
  tf.lipschitz = gmax + cmax * std::sqrt(double(n)) * h / 2.0;
  return tf;
}

std::vector<TestFunction> make_test_family(std::size_t dim, std::size_t random_count,
                                           std::uint64_t seed, const Region& region, double t_f) {
  std::vector<ChaosFn> raw;
  raw.push_back(ChaosFn::basis(MultiIndex::unit(dim, 0)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < random_count; ++r) {
    const unsigned deg = 2 + unsigned(r % 4);
    ChaosFn g(dim, deg);
    for (const auto& beta : indices_up_to(dim, deg))
      if (beta.degree() > 0) g.set(beta, normal(rng) * std::pow(0.5, double(beta.degree())));
    raw.push_back(ou_semigroup(g, t_f));
  }
  std::vector<TestFunction> out;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    const std::string label = r == 0 ? "x1" : "random_" + std::to_string(r - 1);
    const TestFunction probe = make_test_function(label, raw[r], region);
    if (probe.lipschitz <= 0.0) continue;
    out.push_back(make_test_function(label, raw[r] * (1.0 / probe.lipschitz), region));
  }
  return out;
}

namespace {

StepError step_error_cached(const FlowConfig& cfg, const PointCache& c, unsigned k,
                            const TestFunction& f, double e_abs, double e_sq,
                            std::size_t& guard_trips) {
  const std::size_t n = cfg.u.dim(), N = cfg.points.size();
  const double m = double(cfg.m);
  const double t0 = double(k) / m, t1 = double(k + 1) / m;
  const unsigned df = std::max(f.f.max_degree(), 1u);
  StepError s;
  s.k = k;
  double move = 0.0, taylor = 0.0, m1 = 0.0, m2 = 0.0;
  std::vector<double> y(n);
  for (std::size_t j = 0; j < N; ++j) {
    const auto x = cfg.points.point(j);
    const double a = c.a0[j] + t0 * (c.a1[j] - c.a0[j]);
    const double a_next = c.a0[j] + t1 * (c.a1[j] - c.a0[j]);
    if (a < 0.5 * cfg.epsilon) {
      ++guard_trips;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + c.uval[j * n + i] / (m * a);
    const double fy = f.f(PointBasis(y, df));
    const double fx = f.f(PointBasis(x, df));
    const double w = cfg.points.weights[j];
    move += w * a * (fy - fx);
    const double z = a * fy - a_next * fx;
    taylor += w * z;
    m1 += z;
    m2 += z * z;
  }
  s.move_signed = move;
  s.taylor_signed = taylor;
  s.move_cost = std::abs(move);
  s.taylor_err = std::abs(taylor);
  s.move_bound = e_abs / m;
  s.taylor_bound = f.hessian_bound / (m * m * cfg.epsilon) * e_sq;
  if (cfg.monte_carlo && N > 1) {
    const double mean = m1 / double(N);
    s.taylor_stderr = std::sqrt(std::max(0.0, m2 / double(N) - mean * mean) / double(N));
  }
  return s;
}

void moments(const FlowConfig& cfg, const PointCache& c, double& e_abs, double& e_sq) {
  e_abs = e_sq = 0.0;
  for (std::size_t j = 0; j < cfg.points.size(); ++j) {
    e_abs += cfg.points.weights[j] * c.unorm[j];
    e_sq += cfg.points.weights[j] * c.unorm[j] * c.unorm[j];
  }
}

}  // namespace

StepError step_error_pair(const FlowConfig& cfg, unsigned k, const TestFunction& f) {
  if (k >= cfg.m) throw std::invalid_argument("step_error_pair: k must be below m");
  const PointCache c = cache_points(cfg);
  double e_abs, e_sq;
  moments(cfg, c, e_abs, e_sq);
  std::size_t trips = 0;
  return step_error_cached(cfg, c, k, f, e_abs, e_sq, trips);
}

FlowReport run_flow(const FlowConfig& cfg, const TestFunction& f) {
  const PointCache c = cache_points(cfg);
  FlowReport r;
  r.label = f.label;
  r.m = cfg.m;
  r.epsilon = cfg.epsilon;
  r.C = f.hessian_bound;
  moments(cfg, c, r.E_abs_u, r.E_sq_u);

  const unsigned df = std::max(f.f.max_degree(), 1u);
  double int0 = 0.0, int1 = 0.0;
  for (std::size_t j = 0; j < cfg.points.size(); ++j) {
    const double fx = f.f(PointBasis(cfg.points.point(j), df));
    int0 += cfg.points.weights[j] * c.a0[j] * fx;
    int1 += cfg.points.weights[j] * c.a1[j] * fx;
  }
  r.total_gap = std::abs(int1 - int0);

  double signed_sum = 0.0, taylor_noise = 0.0;
  r.steps_pass = true;
  for (unsigned k = 0; k < cfg.m; ++k) {
    StepError s = step_error_cached(cfg, c, k, f, r.E_abs_u, r.E_sq_u, r.guard_trips);
    signed_sum += s.move_signed - s.taylor_signed;
    r.total_taylor += s.taylor_err;
    r.total_move += s.move_cost;
    const double tol = 1e-8 + 3.0 * s.taylor_stderr;
    taylor_noise += 3.0 * s.taylor_stderr;
    r.steps_pass = r.steps_pass && s.move_cost <= s.move_bound + 1e-8 &&
                   s.taylor_err <= s.taylor_bound + tol;
    r.per_step.push_back(s);
  }
  r.telescoped = std::abs(signed_sum);
  r.combined_bound = r.E_abs_u + r.C / (double(cfg.m) * cfg.epsilon) * r.E_sq_u;
  r.tolerance = 1e-8 + taylor_noise;
  r.pass = r.steps_pass && r.guard_trips == 0 && r.total_gap <= r.combined_bound + r.tolerance &&
           std::abs(r.telescoped - r.total_gap) <= 1e-9 * std::max(1.0, r.total_gap);
  return r;
}

}  // namespace krdiv
