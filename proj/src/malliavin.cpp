#include "krdiv/malliavin.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <map>
#include <string>

namespace krdiv {

VectorField derivative(const ChaosFn& f) {
  const std::size_t n = f.dim();
  const unsigned cap = f.max_degree() == 0 ? 0 : f.max_degree() - 1;
  VectorField u(n, cap);
  for (const auto& [beta, c] : f.coeffs()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (beta[i] == 0) continue;
      // coefficient at gamma = beta - e_i is sqrt(gamma_i + 1) f[beta] = sqrt(beta_i) f[beta]
      u[i].add(beta.lowered(i), std::sqrt(double(beta[i])) * c);
    }
  }
  return u;
}

ChaosFn divergence(const VectorField& u) {
  const std::size_t n = u.dim();
  ChaosFn out(n, u.max_degree() + 1);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [gamma, c] : u[i].coeffs()) {
      MultiIndex beta = gamma.raised(i);
      out.add(beta, std::sqrt(double(beta[i])) * c);
    }
  return out;
}

ChaosFn number_operator(const ChaosFn& f) {
  ChaosFn out(f.dim(), f.max_degree());
  for (const auto& [beta, c] : f.coeffs()) out.set(beta, double(beta.degree()) * c);
  return out;
}

ChaosFn ou_semigroup(const ChaosFn& f, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("ou_semigroup: t must be non-negative");
  ChaosFn out(f.dim(), f.max_degree());
  for (const auto& [beta, c] : f.coeffs())
    out.set(beta, std::exp(-t * double(beta.degree())) * c);
  return out;
}

VectorField ou_semigroup(const VectorField& u, double t) {
  std::vector<ChaosFn> comps;
  comps.reserve(u.dim());
  for (const auto& c : u.components()) comps.push_back(ou_semigroup(c, t));
  return VectorField(std::move(comps));
}

ChaosFn mehler_apply(const ChaosFn& f, double t, const QuadratureGrid& grid) {
  if (!(t > 0.0)) throw std::invalid_argument("mehler_apply: t must be positive");
  if (grid.dim != f.dim())
    throw std::invalid_argument("mehler_apply: grid dimension " + std::to_string(grid.dim) +
                                " does not match " + std::to_string(f.dim()));
  const double a = std::exp(-t);
  const double b = std::sqrt(-std::expm1(-2.0 * t));
  const std::size_t n = f.dim();
  const unsigned d = f.max_degree();
  std::vector<double> z(n);
  Sampler smoothed = [&](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      auto y = grid.point(j);
      for (std::size_t i = 0; i < n; ++i) z[i] = a * x[i] + b * y[i];
      s += grid.weights[j] * f(PointBasis(z, d));
    }
    return s;
  };
  return project(smoothed, n, d, grid);
}

VectorField min_norm_field(const ChaosFn& alpha) {
  ChaosFn inv(alpha.dim(), alpha.max_degree());
  for (const auto& [beta, c] : alpha.coeffs())
    if (beta.degree() > 0) inv.set(beta, c / double(beta.degree()));
  return derivative(inv);
}

VectorField feyel_ustunel_field(const ChaosFn& alpha) {
  VectorField du = derivative(alpha);
  for (std::size_t i = 0; i < du.dim(); ++i) {
    ChaosFn scaled(du[i].dim(), du[i].max_degree());
    for (const auto& [beta, c] : du[i].coeffs())
      scaled.set(beta, c / (1.0 + double(beta.degree())));
    du[i] = std::move(scaled);
  }
  return du;
}

std::vector<VectorField> kernel_basis(std::size_t dim, unsigned max_degree) {
  const std::size_t unknowns = dim * indices_up_to(dim, max_degree).size();
  if (unknowns > kKernelUnknownLimit)
    throw ResourceGuardError("kernel_basis: " + std::to_string(unknowns) +
                             " unknowns exceed the limit of " +
                             std::to_string(kKernelUnknownLimit));

  std::vector<VectorField> basis;
  for (unsigned k = 0; k <= max_degree; ++k) {
    const auto cols_idx = indices_of_degree(dim, k);
    const auto rows_idx = indices_of_degree(dim, k + 1);
    std::map<MultiIndex, Eigen::Index> row_of;
    for (std::size_t r = 0; r < rows_idx.size(); ++r) row_of.emplace(rows_idx[r], Eigen::Index(r));

    const Eigen::Index ncols = Eigen::Index(dim * cols_idx.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(Eigen::Index(rows_idx.size()), ncols);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t g = 0; g < cols_idx.size(); ++g) {
        MultiIndex beta = cols_idx[g].raised(i);
        A(row_of.at(beta), Eigen::Index(i * cols_idx.size() + g)) = std::sqrt(double(beta[i]));
      }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > cutoff) ++rank;

    const Eigen::MatrixXd& V = svd.matrixV();
    for (Eigen::Index c = rank; c < ncols; ++c) {
      VectorField w(dim, max_degree);
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t g = 0; g < cols_idx.size(); ++g) {
          const double v = V(Eigen::Index(i * cols_idx.size() + g), c);
          if (std::abs(v) > 1e-15) w[i].set(cols_idx[g], v);
        }
      basis.push_back(std::move(w));
    }
  }
  return basis;
}

SolutionFamily solution_family(const ChaosFn& alpha, unsigned max_degree) {
  if (alpha.degree() > max_degree)
    throw std::invalid_argument("solution_family: alpha has degree " +
                                std::to_string(alpha.degree()) + " > " +
                                std::to_string(max_degree));
  VectorField base = min_norm_field(alpha);
  for (std::size_t i = 0; i < base.dim(); ++i) base[i] = base[i].truncated(max_degree);
  const double residual = max_coeff_diff(divergence(base), alpha.centered());
  return SolutionFamily{std::move(base), kernel_basis(alpha.dim(), max_degree), residual};
}

}  // namespace krdiv
