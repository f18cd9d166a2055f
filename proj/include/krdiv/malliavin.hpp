#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "krdiv/chaos.hpp"
#include "krdiv/quadrature.hpp"

namespace krdiv {

/// Raised when a request would exceed a documented size limit.
class ResourceGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All operators act spectrally on the orthonormal Hermite basis:
// D lowers the degree by one, I raises it by one, L and T_t are diagonal.

/// Stochastic derivative. Component i carries sqrt(beta_i + 1) f[beta + e_i] at beta.
VectorField derivative(const ChaosFn& f);

/// Divergence (extended stochastic integral), the adjoint of `derivative`.
/// The result has capacity u.max_degree() + 1 and zero mean.
ChaosFn divergence(const VectorField& u);

/// L = ID: scales the degree-k chaos by k.
ChaosFn number_operator(const ChaosFn& f);

/// Ornstein-Uhlenbeck semigroup: scales the degree-k chaos by exp(-k t).
ChaosFn ou_semigroup(const ChaosFn& f, double t);
VectorField ou_semigroup(const VectorField& u, double t);

/// Mehler form of T_t: x -> sum_j w_j f(e^-t x + sqrt(1 - e^-2t) y_j), re-projected
/// on `grid` at the degree of f. Independent of the spectral route.
ChaosFn mehler_apply(const ChaosFn& f, double t, const QuadratureGrid& grid);

/// Minimal-norm solution of Iu = alpha - E alpha: D L^{-1} (alpha - E alpha).
VectorField min_norm_field(const ChaosFn& alpha);

/// (1 + L)^{-1} D alpha.
VectorField feyel_ustunel_field(const ChaosFn& alpha);

/// Maximum number of unknowns (dim x basis size) accepted by kernel_basis.
inline constexpr std::size_t kKernelUnknownLimit = 20000;

/// Orthonormal basis of ker I restricted to fields of degree <= max_degree.
/// Divergence maps the homogeneous degree-k fields into the degree-(k+1) chaos,
/// so the null space is computed block by block (SVD, cutoff 1e-10 * sigma_max).
std::vector<VectorField> kernel_basis(std::size_t dim, unsigned max_degree);

/// Affine solution set {base + span(kernel)} of Iu = alpha - E alpha.
struct SolutionFamily {
  VectorField base;
  std::vector<VectorField> kernel;
  /// Largest coefficient of I(base) - (alpha - E alpha).
  double residual = 0.0;
};

SolutionFamily solution_family(const ChaosFn& alpha, unsigned max_degree);

}  // namespace krdiv
