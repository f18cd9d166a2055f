#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace krdiv {

class QuadratureGrid;

/// Multi-index of a tensor Hermite basis element. Ordered by total degree,
/// then lexicographically, so iteration over coefficient maps is graded.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<unsigned> entries);

  static MultiIndex zero(std::size_t dim);
  static MultiIndex unit(std::size_t dim, std::size_t axis);

  std::size_t dim() const { return entries_.size(); }
  unsigned degree() const { return degree_; }
  unsigned operator[](std::size_t i) const { return entries_[i]; }
  std::span<const unsigned> entries() const { return entries_; }

  /// Index with entry `axis` raised by one.
  MultiIndex raised(std::size_t axis) const;
  /// Index with entry `axis` lowered by one. Throws if that entry is zero.
  MultiIndex lowered(std::size_t axis) const;

  /// True when every entry beyond the first `k` is zero.
  bool vanishes_beyond(std::size_t k) const;
  /// Leading `k` entries as a k-dimensional index.
  MultiIndex leading(std::size_t k) const;
  /// Pads with zeros up to `dim` entries.
  MultiIndex padded(std::size_t dim) const;

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;

 private:
  unsigned degree_ = 0;  // first member: drives the graded ordering
  std::vector<unsigned> entries_;
};

/// All multi-indices in `dim` variables of total degree exactly `degree`.
std::vector<MultiIndex> indices_of_degree(std::size_t dim, unsigned degree);
/// All multi-indices in `dim` variables of total degree <= `max_degree`.
std::vector<MultiIndex> indices_up_to(std::size_t dim, unsigned max_degree);

/// Normalized probabilists' Hermite polynomial h_k(x), E[h_j h_k] = delta_jk.
double hermite_eval(unsigned k, double x);

/// Fills out[0..kmax] with h_0(x)..h_kmax(x).
void hermite_table(unsigned kmax, double x, std::span<double> out);

/// Per-axis Hermite values at one point, reusable across many expansions.
class PointBasis {
 public:
  PointBasis(std::span<const double> x, unsigned max_degree);

  std::size_t dim() const { return dim_; }
  unsigned max_degree() const { return max_degree_; }
  double value(const MultiIndex& beta) const;

 private:
  std::size_t dim_;
  unsigned max_degree_;
  std::vector<double> table_;  // dim_ rows of (max_degree_+1)
};

/// Square-integrable function of an n-dimensional standard Gaussian, stored
/// by its coefficients on the orthonormal Hermite tensor basis.
class ChaosFn {
 public:
  using CoeffMap = std::map<MultiIndex, double>;

  ChaosFn(std::size_t dim, unsigned max_degree);

  static ChaosFn constant(std::size_t dim, double value, unsigned max_degree = 0);
  static ChaosFn basis(const MultiIndex& beta, double scale = 1.0);

  std::size_t dim() const { return dim_; }
  unsigned max_degree() const { return max_degree_; }
  /// Largest degree carrying a nonzero coefficient (0 for the zero function).
  unsigned degree() const;

  double coeff(const MultiIndex& beta) const;
  void set(const MultiIndex& beta, double value);
  void add(const MultiIndex& beta, double value);
  const CoeffMap& coeffs() const { return coeffs_; }

  double mean() const { return coeff(MultiIndex::zero(dim_)); }
  /// L2(mu) norm by Parseval.
  double norm() const;
  /// Same function with the zero-index coefficient removed.
  ChaosFn centered() const;

  /// Drops every coefficient of degree > d and lowers the capacity to d.
  ChaosFn truncated(unsigned d) const;
  /// Same coefficients with capacity raised to at least d.
  ChaosFn with_capacity(unsigned d) const;

  double operator()(std::span<const double> x) const;
  double operator()(const PointBasis& basis) const;

  ChaosFn& operator+=(const ChaosFn& other);
  ChaosFn& operator-=(const ChaosFn& other);
  ChaosFn& operator*=(double s);

  friend ChaosFn operator+(ChaosFn a, const ChaosFn& b) { return a += b; }
  friend ChaosFn operator-(ChaosFn a, const ChaosFn& b) { return a -= b; }
  friend ChaosFn operator*(ChaosFn a, double s) { return a *= s; }
  friend ChaosFn operator*(double s, ChaosFn a) { return a *= s; }

 private:
  void check_index(const MultiIndex& beta) const;

  std::size_t dim_;
  unsigned max_degree_;
  CoeffMap coeffs_;
};

/// H-valued field u: R^n -> R^n, one expansion per coordinate.
class VectorField {
 public:
  VectorField(std::size_t dim, unsigned max_degree);
  explicit VectorField(std::vector<ChaosFn> components);

  static VectorField zero(std::size_t dim, unsigned max_degree = 0);

  std::size_t dim() const { return components_.size(); }
  unsigned max_degree() const;
  const ChaosFn& operator[](std::size_t i) const { return components_[i]; }
  ChaosFn& operator[](std::size_t i) { return components_[i]; }
  const std::vector<ChaosFn>& components() const { return components_; }

  std::vector<double> operator()(std::span<const double> x) const;
  void evaluate(const PointBasis& basis, std::span<double> out) const;
  /// Euclidean (H-) norm of u(x).
  double norm_at(std::span<const double> x) const;
  /// E|u|^2 by Parseval.
  double l2_norm_sq() const;

  VectorField& operator+=(const VectorField& other);
  VectorField& operator-=(const VectorField& other);
  VectorField& operator*=(double s);
  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
  friend VectorField operator*(double s, VectorField a) { return a *= s; }

 private:
  std::vector<ChaosFn> components_;
};

double inner_product(const ChaosFn& f, const ChaosFn& g);
/// Sum of componentwise inner products, the L2(mu; H) pairing.
double inner_product(const VectorField& u, const VectorField& v);

/// Largest absolute coefficient of f - g.
double max_coeff_diff(const ChaosFn& f, const ChaosFn& g);

using Sampler = std::function<double(std::span<const double>)>;

/// Chaos coefficients of `sampler` up to degree `max_degree` by quadrature.
/// Nodes are visited in grid order, so results are bit-reproducible.
ChaosFn project(const Sampler& sampler, std::size_t dim, unsigned max_degree,
                const QuadratureGrid& grid);

}  // namespace krdiv
