#include "krdiv/minimizer.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "krdiv/malliavin.hpp"
#include "krdiv/transport.hpp"

namespace krdiv {

namespace {

constexpr std::size_t kEvalEntryLimit = 50'000'000;

/// Values of a field at every point, flattened as (point, component).
Eigen::VectorXd field_values(const VectorField& u, const PointSet& points) {
  const std::size_t n = u.dim();
  Eigen::VectorXd out(Eigen::Index(points.size() * n));
  const unsigned d = u.max_degree();
  std::vector<double> v(n);
  for (std::size_t j = 0; j < points.size(); ++j) {
    u.evaluate(PointBasis(points.point(j), d), v);
    for (std::size_t i = 0; i < n; ++i) out(Eigen::Index(j * n + i)) = v[i];
  }
  return out;
}

double l1_of(const Eigen::VectorXd& r, const PointSet& points, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j)
    s += points.weights[j] * r.segment(Eigen::Index(j * n), Eigen::Index(n)).norm();
  return s;
}

double l2_of(const Eigen::VectorXd& r, const PointSet& points, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j)
    s += points.weights[j] * r.segment(Eigen::Index(j * n), Eigen::Index(n)).squaredNorm();
  return std::sqrt(s);
}

}  // namespace

double objective(const VectorField& u, const PointSet& points) {
  if (u.dim() != points.dim) throw std::invalid_argument("objective: dimension mismatch");
  return l1_of(field_values(u, points), points, u.dim());
}

MinimizeResult minimize_l1(const ChaosFn& alpha, unsigned max_degree, const PointSet& points,
                           const MinimizeOptions& options) {
  if (alpha.dim() != points.dim) throw std::invalid_argument("minimize_l1: dimension mismatch");
  const std::size_t n = alpha.dim();
  const SolutionFamily family = solution_family(alpha.centered(), max_degree);
  const std::size_t L = family.kernel.size();
  const std::size_t rows = points.size() * n;
  if (rows * std::max<std::size_t>(L, 1) > kEvalEntryLimit)
    throw ResourceGuardError("minimize_l1: evaluation matrix with " + std::to_string(rows) + " x " +
                             std::to_string(L) + " entries exceeds the limit");

  MinimizeResult res;
  res.degree = max_degree;
  res.quadrature = points.description;
  res.mean_adjustment = alpha.mean();
  res.kernel_dim = L;

  const Eigen::VectorXd base = field_values(family.base, points);
  const auto R = Eigen::Index(rows);
  Eigen::MatrixXd K(R, Eigen::Index(L));
  for (std::size_t l = 0; l < L; ++l) K.col(Eigen::Index(l)) = field_values(family.kernel[l], points);

  // per-row quadrature weights
  Eigen::VectorXd w(R);
  for (std::size_t j = 0; j < points.size(); ++j)
    w.segment(Eigen::Index(j * n), Eigen::Index(n)).setConstant(points.weights[j]);

  Eigen::VectorXd c = Eigen::VectorXd::Zero(Eigen::Index(L));
  Eigen::VectorXd r = base;
  double value = l1_of(r, points, n);
  res.trace.push_back(value);
  res.l1_l2_excess = value - l2_of(r, points, n);

  // Dual point: lambda_j = r_j / max(|r_j|, delta), moved onto
  // {sum_j w_j K_j^T lambda_j = 0} in the metric diag(rho)^-1 and scaled into
  // the unit ball. Large rho lets the correction land on small residuals.
  auto unit_residuals = [&](const Eigen::VectorXd& resid, double delta) {
    Eigen::VectorXd lambda(resid.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
      auto seg = resid.segment(Eigen::Index(j * n), Eigen::Index(n));
      lambda.segment(Eigen::Index(j * n), Eigen::Index(n)) = seg / std::max(seg.norm(), delta);
    }
    return lambda;
  };
  auto dual_from = [&](Eigen::VectorXd lambda, const Eigen::VectorXd& rho,
                       const Eigen::LDLT<Eigen::MatrixXd>& gram) {
    if (L > 0) lambda -= rho.asDiagonal() * (K * gram.solve(K.transpose() * w.cwiseProduct(lambda)));
    double biggest = 1.0;
    for (std::size_t j = 0; j < points.size(); ++j)
      biggest = std::max(biggest, lambda.segment(Eigen::Index(j * n), Eigen::Index(n)).norm());
    const double v = w.cwiseProduct(lambda).dot(base) / biggest;
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  // 1 / (1 + |K_j|^2) keeps the correction away from tail nodes where the
  // kernel fields are large.
  Eigen::VectorXd damp(R);
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double kn = L > 0 ? K.middleRows(Eigen::Index(j * n), Eigen::Index(n)).squaredNorm() : 0.0;
    damp.segment(Eigen::Index(j * n), Eigen::Index(n)).setConstant(1.0 / (1.0 + kn));
  }
  auto rho_for = [&](const Eigen::VectorXd& resid, double floor) {
    Eigen::VectorXd rho(resid.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
      const double nr = resid.segment(Eigen::Index(j * n), Eigen::Index(n)).norm();
      rho.segment(Eigen::Index(j * n), Eigen::Index(n)).setConstant(1.0 / std::max(nr, floor));
    }
    return rho;
  };
  auto thorough_dual = [&](const Eigen::VectorXd& resid, double delta) {
    const Eigen::VectorXd lambda = unit_residuals(resid, delta);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(resid.size());
    double best = L > 0 ? dual_from(lambda, ones, Eigen::LDLT<Eigen::MatrixXd>(K.transpose() * w.asDiagonal() * K))
                        : dual_from(lambda, ones, Eigen::LDLT<Eigen::MatrixXd>());
    if (L == 0) return best;
    const double mean_r = l1_of(resid, points, n);
    auto attempt = [&](const Eigen::VectorXd& rho) {
      const Eigen::LDLT<Eigen::MatrixXd> gram(K.transpose() * w.cwiseProduct(rho).asDiagonal() * K);
      best = std::max(best, dual_from(lambda, rho, gram));
    };
    attempt(damp);
    for (double t : {1e-1, 1e-2, 1e-4, 1e-6}) {
      const Eigen::VectorXd rho = rho_for(resid, t * mean_r);
      attempt(rho);
      attempt(rho.cwiseProduct(damp));
    }
    return best;
  };

  const double scale = std::max(value, 1e-300);
  double delta = 1e-8 * scale;
  const double delta_min = 1e-14 * scale;
  double best_dual = thorough_dual(r, delta);
  auto gap_ok = [&] {
    return value - best_dual <= options.tolerance * std::max(value, 1e-12) || value <= 1e-14;
  };

  // Newton steps on sum_j w_j |r_j| (smooth wherever no residual vanishes),
  // with reweighted least squares as the fallback direction.
  auto try_step = [&](const Eigen::VectorXd& dir) {
    for (double s = 1.0; s >= 1.0 / 1048576.0; s *= 0.5) {
      const Eigen::VectorXd c_try = c + s * dir;
      const Eigen::VectorXd r_try = base + K * c_try;
      const double v_try = l1_of(r_try, points, n);
      if (v_try < value) {
        c = c_try;
        r = r_try;
        value = v_try;
        return true;
      }
    }
    return false;
  };

  std::size_t it = 0;
  if (L == 0) {
    res.converged = true;
  } else {
    for (; it < options.budget && !gap_ok(); ++it) {
      Eigen::VectorXd omega(R), lambda(R);
      Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(Eigen::Index(points.size()), Eigen::Index(L));
      for (std::size_t j = 0; j < points.size(); ++j) {
        const auto seg = r.segment(Eigen::Index(j * n), Eigen::Index(n));
        const double nr = seg.norm(), a = std::max(nr, delta);
        omega.segment(Eigen::Index(j * n), Eigen::Index(n)).setConstant(points.weights[j] / a);
        lambda.segment(Eigen::Index(j * n), Eigen::Index(n)) = seg / a;
        if (nr >= delta) {
          const double sw = std::sqrt(points.weights[j] / a);
          for (std::size_t i = 0; i < n; ++i)
            Z.row(Eigen::Index(j)) += sw * (seg(Eigen::Index(i)) / nr) * K.row(Eigen::Index(j * n + i));
        }
      }
      const Eigen::VectorXd grad = K.transpose() * w.cwiseProduct(lambda);
      const Eigen::MatrixXd G = K.transpose() * omega.asDiagonal() * K;
      Eigen::MatrixXd H = G - Z.transpose() * Z;
      H.diagonal().array() += 1e-12 * std::max(G.diagonal().maxCoeff(), 1e-300);

      bool accepted = false;
      const Eigen::LDLT<Eigen::MatrixXd> hf(H);
      if (hf.info() == Eigen::Success) {
        const Eigen::VectorXd dir = -hf.solve(grad);
        if (dir.allFinite() && dir.dot(grad) < 0.0) accepted = try_step(dir);
      }
      if (!accepted) accepted = try_step(-G.ldlt().solve(grad));
      if (accepted) {
        res.trace.push_back(value);
        res.l1_l2_excess = std::max(res.l1_l2_excess, value - l2_of(r, points, n));
      }
      const double progress = res.trace.size() > 1 ? res.trace[res.trace.size() - 2] - value : 0.0;
      if (!accepted || progress <= 1e-9 * value || it + 1 == options.budget)
        best_dual = std::max(best_dual, thorough_dual(r, delta));
      if (!accepted) {
        if (delta <= delta_min) break;
        delta = std::max(delta * 0.01, delta_min);
      }
    }
    res.converged = gap_ok();
  }

  res.iterations = it;
  res.value = value;
  res.dual_value = std::min(best_dual, value);
  res.gap = value - res.dual_value;

  VectorField u = family.base;
  for (std::size_t l = 0; l < L; ++l) {
    VectorField term = family.kernel[l];
    term *= c(Eigen::Index(l));
    u += term;
  }
  res.residual = max_coeff_diff(divergence(u), alpha.centered());
  res.u_star = std::move(u);
  return res;
}

ContinuityCheck n_continuity_check(const ChaosFn& alpha, const ChaosFn& beta, unsigned max_degree,
                                   const PointSet& points, const MinimizeOptions& options) {
  const auto ra = minimize_l1(alpha, max_degree, points, options);
  const auto rb = minimize_l1(beta, max_degree, points, options);
  ContinuityCheck out;
  out.n_alpha = ra.value;
  out.n_beta = rb.value;
  out.lhs = std::abs(ra.value - rb.value);
  const ChaosFn diff = alpha.centered() - beta.centered();
  out.rhs = diff.norm();
  const unsigned d = diff.max_degree();
  double q = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double v = diff(PointBasis(points.point(j), d));
    q += points.weights[j] * v * v;
  }
  out.rhs_quadrature = std::sqrt(q);
  out.tolerance = 2.0 * std::max(ra.gap, rb.gap) + 1e-12;
  out.pass = out.lhs <= out.rhs + out.tolerance;
  return out;
}

double abs_mean_1d(const ChaosFn& f) {
  if (f.dim() != 1) throw std::invalid_argument("abs_mean_1d: f must be one-dimensional");
  const unsigned d = f.max_degree();
  std::vector<double> c(d + 1, 0.0);
  for (const auto& [beta, v] : f.coeffs()) c[beta[0]] = v;
  std::vector<double> h(d + 1);
  const auto eval = [&](double x) {
    hermite_table(d, x, h);
    double s = 0.0;
    for (unsigned k = 0; k <= d; ++k) s += c[k] * h[k];
    return s;
  };
  // integral of f phi over (-inf, x]
  const auto primitive = [&](double x) {
    if (std::isinf(x)) return x > 0 ? c[0] : 0.0;
    hermite_table(d, x, h);
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    double s = c[0] * 0.5 * std::erfc(-x / std::sqrt(2.0));
    for (unsigned k = 1; k <= d; ++k) s -= c[k] * h[k - 1] * phi / std::sqrt(double(k));
    return s;
  };

  std::vector<double> cuts{-std::numeric_limits<double>::infinity()};
  constexpr double kReach = 12.0, kStep = 1e-3;
  const int steps = int(std::lround(2.0 * kReach / kStep));
  double x0 = -kReach, f0 = eval(x0);
  for (int i = 1; i <= steps; ++i) {
    const double x1 = -kReach + i * kStep, f1 = eval(x1);
    if (f0 == 0.0) {
      cuts.push_back(x0);
    } else if ((f0 < 0.0) != (f1 < 0.0) && f1 != 0.0) {
      double lo = x0, hi = x1, flo = f0;
      for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi), fm = eval(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      cuts.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    f0 = f1;
  }
  cuts.push_back(std::numeric_limits<double>::infinity());
  double total = 0.0, prev = primitive(cuts.front());
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    const double next = primitive(cuts[i]);
    total += std::abs(next - prev);
    prev = next;
  }
  return total;
}

GapReport theorem_gap(const GaussianMixture& nu0, const GaussianMixture& nu1,
                      const GapOptions& options) {
  if (nu0.dim() != nu1.dim()) throw std::invalid_argument("theorem_gap: dimension mismatch");
  const std::size_t n = nu0.dim();
  const unsigned d = options.degree;
  GapReport rep;
  rep.n = n;
  rep.d = d;
  rep.epsilon = options.epsilon;

  const bool use_grid = n <= 2;
  const unsigned proj_q = use_grid ? options.nodes_per_axis : std::max(d + 2, 10u);
  const QuadratureGrid proj_grid = gauss_hermite_grid(n, proj_q);
  const auto diff = difference_density(nu0, nu1, d, proj_grid);
  rep.mean_adjustment = diff.mean_adjustment;

  QuadratureGrid eval_grid;
  PointSet eval_points;
  const PointSet* points = nullptr;
  if (use_grid) {
    eval_grid = proj_grid;
    points = &eval_grid;
  } else {
    eval_points = monte_carlo_points(n, options.mc_points, replication_seed(options.seed, 0, 2));
    points = &eval_points;
  }
  rep.quadrature = points->description;

  const VectorField v = min_norm_field(diff.alpha);
  const VectorField fu = feyel_ustunel_field(diff.alpha);
  rep.upper_v = objective(v, *points);
  rep.upper_fu = objective(fu, *points);
  const auto mres = minimize_l1(diff.alpha, d, *points, options.minimize);
  rep.upper_min = mres.value;
  rep.residual = mres.residual;
  rep.iterations = mres.iterations;
  rep.converged = mres.converged;
  rep.optimizer_gap = mres.gap;
  std::optional<MinimizeResult> raised;
  if (options.extra_degree > 0) {
    raised = minimize_l1(diff.alpha, d + options.extra_degree, *points, options.minimize);
    rep.upper_min_raised = raised->value;
    rep.optimizer_gap = std::max(rep.optimizer_gap, raised->gap);
  }

  if (n == 1) {
    rep.upper_v_quadrature = rep.upper_v;
    rep.upper_min_quadrature = rep.upper_min;
    rep.upper_v = abs_mean_1d(v[0]);
    rep.upper_fu = abs_mean_1d(fu[0]);
    rep.upper_min = abs_mean_1d(mres.u_star[0]);
    if (raised) rep.upper_min_raised = abs_mean_1d(raised->u_star[0]);
    rep.quadrature += "; E|u| by exact root splitting";
  }

  // lower bounds
  rep.lower_sliced = w1_sliced_lower_bound(nu0, nu1);
  rep.lower = rep.lower_sliced;
  rep.lower_method = n == 1 ? "cdf_integral" : "sliced_1d";
  if (n == 1) {
    rep.lower_exact_1d = w1_exact_1d(nu0, nu1);
    rep.lower = rep.lower_exact_1d;
  }
  const auto a = sample(nu0, options.samples, replication_seed(options.seed, 0, 0));
  const auto b = sample(nu1, options.samples, replication_seed(options.seed, 0, 1));
  const auto dual = w1_dual_lb(a, b);
  rep.dual_lp_value = dual.value;
  const unsigned int_q = n == 1 ? 60 : (n == 2 ? 24 : 10);
  rep.lower_dual_potential = dual_potential_bound(dual.potential, nu0, nu1, int_q);
  if (rep.lower_dual_potential > rep.lower) {
    rep.lower = rep.lower_dual_potential;
    rep.lower_method = "dual_potential";
  }

  // Monte Carlo objectives carry sampling error; widen by three standard errors.
  double widen = 0.0;
  if (!use_grid) {
    const Eigen::VectorXd vals = field_values(mres.u_star, *points);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < points->size(); ++j) {
      const double a_j = vals.segment(Eigen::Index(j * n), Eigen::Index(n)).norm();
      m1 += a_j;
      m2 += a_j * a_j;
    }
    const double N = double(points->size());
    m1 /= N;
    widen = 3.0 * std::sqrt(std::max(0.0, m2 / N - m1 * m1) / N);
  }
  const double full_sq =
      density_inner(nu0, nu0) - 2.0 * density_inner(nu0, nu1) + density_inner(nu1, nu1);
  const double kept_sq = std::pow(diff.alpha.norm(), 2);
  rep.truncation_tail = std::sqrt(std::max(0.0, full_sq - kept_sq));
  rep.tolerance = 1e-6 + rep.optimizer_gap + widen + rep.truncation_tail;
  rep.sandwich_pass = rep.lower - rep.tolerance <= rep.upper_min && rep.upper_min <= rep.upper_v + 1e-9;
  rep.fu_pass = rep.upper_min <= rep.upper_fu + 1e-9 && rep.upper_fu >= rep.lower - rep.tolerance;
  if (rep.lower > 1e-12) rep.rel_gap = (rep.upper_min - rep.lower) / rep.lower;
  return rep;
}

ReductionCheck finite_dim_reduction_check(const ChaosFn& alpha, std::size_t k, unsigned max_degree,
                                          unsigned nodes_per_axis, const MinimizeOptions& options) {
  const std::size_t n = alpha.dim();
  if (k == 0 || k > n) throw std::invalid_argument("finite_dim_reduction_check: k must lie in [1, n]");
  ReductionCheck out;
  out.n = n;
  out.k = k;
  const auto grid_n = gauss_hermite_grid(n, nodes_per_axis);
  const auto grid_k = gauss_hermite_grid(k, nodes_per_axis);

  const ChaosFn alpha_k = conditional_expectation(alpha.centered(), k);
  const auto full_cond = minimize_l1(alpha_k, max_degree, grid_n, options);
  const auto marginal = minimize_l1(restrict_to_leading(alpha_k, k), max_degree, grid_k, options);
  const auto full = minimize_l1(alpha, max_degree, grid_n, options);
  out.n_full_on_conditional = full_cond.value;
  out.n_marginal = marginal.value;
  out.n_full = full.value;

  // E[u*_i | P_k] for i < k solves the k-dimensional problem for alpha_k.
  std::vector<ChaosFn> comps;
  for (std::size_t i = 0; i < k; ++i)
    comps.push_back(restrict_to_leading(conditional_expectation(full.u_star[i], k), k));
  const VectorField projected(std::move(comps));
  out.projected_value = objective(projected, grid_k);
  out.projected_residual =
      max_coeff_diff(divergence(projected), restrict_to_leading(alpha_k, k));

  out.tolerance = 2.0 * std::max({full_cond.gap, marginal.gap, full.gap}) + 1e-12;
  out.equality_pass = std::abs(out.n_full_on_conditional - out.n_marginal) <= out.tolerance;
  out.jensen_pass = out.n_marginal <= out.projected_value + out.tolerance &&
                    out.projected_value <= out.n_full + out.tolerance &&
                    out.projected_residual < 1e-8;
  return out;
}

}  // namespace krdiv
