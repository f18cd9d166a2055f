#include "krdiv/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "krdiv/quadrature.hpp"

namespace krdiv {

MultiIndex::MultiIndex(std::vector<unsigned> entries)
    : degree_(std::accumulate(entries.begin(), entries.end(), 0u)),
      entries_(std::move(entries)) {}

MultiIndex MultiIndex::zero(std::size_t dim) {
  return MultiIndex(std::vector<unsigned>(dim, 0));
}

MultiIndex MultiIndex::unit(std::size_t dim, std::size_t axis) {
  std::vector<unsigned> e(dim, 0);
  e.at(axis) = 1;
  return MultiIndex(std::move(e));
}

MultiIndex MultiIndex::raised(std::size_t axis) const {
  MultiIndex r = *this;
  ++r.entries_.at(axis);
  ++r.degree_;
  return r;
}

MultiIndex MultiIndex::lowered(std::size_t axis) const {
  if (entries_.at(axis) == 0) throw std::out_of_range("MultiIndex::lowered: entry is zero");
  MultiIndex r = *this;
  --r.entries_[axis];
  --r.degree_;
  return r;
}

bool MultiIndex::vanishes_beyond(std::size_t k) const {
  for (std::size_t i = k; i < entries_.size(); ++i)
    if (entries_[i] != 0) return false;
  return true;
}

MultiIndex MultiIndex::leading(std::size_t k) const {
  if (k > entries_.size()) throw std::out_of_range("MultiIndex::leading");
  return MultiIndex(std::vector<unsigned>(entries_.begin(), entries_.begin() + k));
}

MultiIndex MultiIndex::padded(std::size_t dim) const {
  if (dim < entries_.size()) throw std::out_of_range("MultiIndex::padded");
  std::vector<unsigned> e = entries_;
  e.resize(dim, 0);
  return MultiIndex(std::move(e));
}

namespace {

void compositions(std::size_t dim, unsigned remaining, std::vector<unsigned>& cur,
                  std::vector<MultiIndex>& out) {
  if (cur.size() + 1 == dim) {
    cur.push_back(remaining);
    out.emplace_back(cur);
    cur.pop_back();
    return;
  }
  for (unsigned v = remaining + 1; v-- > 0;) {
    cur.push_back(v);
    compositions(dim, remaining - v, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<MultiIndex> indices_of_degree(std::size_t dim, unsigned degree) {
  if (dim == 0) throw std::invalid_argument("indices_of_degree: dim must be positive");
  std::vector<MultiIndex> out;
  std::vector<unsigned> cur;
  compositions(dim, degree, cur, out);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MultiIndex> indices_up_to(std::size_t dim, unsigned max_degree) {
  std::vector<MultiIndex> out;
  for (unsigned k = 0; k <= max_degree; ++k) {
    auto level = indices_of_degree(dim, k);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

double hermite_eval(unsigned k, double x) {
  double prev = 0.0, cur = 1.0;
  for (unsigned j = 0; j < k; ++j) {
    double next = (x * cur - std::sqrt(double(j)) * prev) / std::sqrt(double(j + 1));
    prev = cur;
    cur = next;
  }
  return cur;
}

void hermite_table(unsigned kmax, double x, std::span<double> out) {
  out[0] = 1.0;
  if (kmax == 0) return;
  out[1] = x;
  for (unsigned j = 1; j < kmax; ++j)
    out[j + 1] = (x * out[j] - std::sqrt(double(j)) * out[j - 1]) / std::sqrt(double(j + 1));
}

PointBasis::PointBasis(std::span<const double> x, unsigned max_degree)
    : dim_(x.size()), max_degree_(max_degree), table_(x.size() * (max_degree + 1)) {
  for (std::size_t i = 0; i < dim_; ++i)
    hermite_table(max_degree_, x[i],
                  std::span<double>(table_.data() + i * (max_degree_ + 1), max_degree_ + 1));
}

double PointBasis::value(const MultiIndex& beta) const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim_; ++i) v *= table_[i * (max_degree_ + 1) + beta[i]];
  return v;
}

// ---------------------------------------------------------------------------

ChaosFn::ChaosFn(std::size_t dim, unsigned max_degree) : dim_(dim), max_degree_(max_degree) {
  if (dim == 0) throw std::invalid_argument("ChaosFn: dim must be positive");
}

ChaosFn ChaosFn::constant(std::size_t dim, double value, unsigned max_degree) {
  ChaosFn f(dim, max_degree);
  if (value != 0.0) f.set(MultiIndex::zero(dim), value);
  return f;
}

ChaosFn ChaosFn::basis(const MultiIndex& beta, double scale) {
  ChaosFn f(beta.dim(), beta.degree());
  f.set(beta, scale);
  return f;
}

unsigned ChaosFn::degree() const {
  unsigned d = 0;
  for (const auto& [beta, c] : coeffs_)
    if (c != 0.0) d = std::max(d, beta.degree());
  return d;
}

void ChaosFn::check_index(const MultiIndex& beta) const {
  if (beta.dim() != dim_)
    throw std::invalid_argument("ChaosFn: multi-index dimension " + std::to_string(beta.dim()) +
                                " does not match " + std::to_string(dim_));
  if (beta.degree() > max_degree_)
    throw std::invalid_argument("ChaosFn: index degree " + std::to_string(beta.degree()) +
                                " exceeds max_degree " + std::to_string(max_degree_));
}

double ChaosFn::coeff(const MultiIndex& beta) const {
  auto it = coeffs_.find(beta);
  return it == coeffs_.end() ? 0.0 : it->second;
}

void ChaosFn::set(const MultiIndex& beta, double value) {
  check_index(beta);
  if (value == 0.0)
    coeffs_.erase(beta);
  else
    coeffs_[beta] = value;
}

void ChaosFn::add(const MultiIndex& beta, double value) {
  check_index(beta);
  if (value == 0.0) return;
  auto [it, inserted] = coeffs_.try_emplace(beta, value);
  if (!inserted) {
    it->second += value;
    if (it->second == 0.0) coeffs_.erase(it);
  }
}

double ChaosFn::norm() const {
  double s = 0.0;
  for (const auto& [beta, c] : coeffs_) s += c * c;
  return std::sqrt(s);
}

ChaosFn ChaosFn::centered() const {
  ChaosFn f = *this;
  f.coeffs_.erase(MultiIndex::zero(dim_));
  return f;
}

ChaosFn ChaosFn::truncated(unsigned d) const {
  ChaosFn f(dim_, d);
  for (const auto& [beta, c] : coeffs_)
    if (beta.degree() <= d) f.coeffs_.emplace(beta, c);
  return f;
}

ChaosFn ChaosFn::with_capacity(unsigned d) const {
  ChaosFn f = *this;
  f.max_degree_ = std::max(max_degree_, d);
  return f;
}

double ChaosFn::operator()(std::span<const double> x) const {
  if (x.size() != dim_)
    throw std::invalid_argument("ChaosFn: point dimension " + std::to_string(x.size()) +
                                " does not match " + std::to_string(dim_));
  return (*this)(PointBasis(x, max_degree_));
}

double ChaosFn::operator()(const PointBasis& basis) const {
  if (basis.dim() != dim_) throw std::invalid_argument("ChaosFn: basis dimension mismatch");
  if (basis.max_degree() < degree())
    throw std::invalid_argument("ChaosFn: point basis degree too small");
  double s = 0.0;
  for (const auto& [beta, c] : coeffs_) s += c * basis.value(beta);
  return s;
}

ChaosFn& ChaosFn::operator+=(const ChaosFn& other) {
  if (other.dim_ != dim_) throw std::invalid_argument("ChaosFn: dimension mismatch");
  max_degree_ = std::max(max_degree_, other.max_degree_);
  for (const auto& [beta, c] : other.coeffs_) add(beta, c);
  return *this;
}

ChaosFn& ChaosFn::operator-=(const ChaosFn& other) {
  if (other.dim_ != dim_) throw std::invalid_argument("ChaosFn: dimension mismatch");
  max_degree_ = std::max(max_degree_, other.max_degree_);
  for (const auto& [beta, c] : other.coeffs_) add(beta, -c);
  return *this;
}

ChaosFn& ChaosFn::operator*=(double s) {
  if (s == 0.0) {
    coeffs_.clear();
    return *this;
  }
  for (auto& [beta, c] : coeffs_) c *= s;
  return *this;
}

// ---------------------------------------------------------------------------

VectorField::VectorField(std::size_t dim, unsigned max_degree)
    : components_(dim, ChaosFn(dim, max_degree)) {}

VectorField::VectorField(std::vector<ChaosFn> components) : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("VectorField: no components");
  for (const auto& c : components_)
    if (c.dim() != components_.size())
      throw std::invalid_argument("VectorField: component dimension must equal field dimension");
}

VectorField VectorField::zero(std::size_t dim, unsigned max_degree) {
  return VectorField(dim, max_degree);
}

unsigned VectorField::max_degree() const {
  unsigned d = 0;
  for (const auto& c : components_) d = std::max(d, c.max_degree());
  return d;
}

std::vector<double> VectorField::operator()(std::span<const double> x) const {
  std::vector<double> out(dim());
  evaluate(PointBasis(x, max_degree()), out);
  return out;
}

void VectorField::evaluate(const PointBasis& basis, std::span<double> out) const {
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i](basis);
}

double VectorField::norm_at(std::span<const double> x) const {
  auto v = (*this)(x);
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

double VectorField::l2_norm_sq() const {
  double s = 0.0;
  for (const auto& c : components_) {
    double n = c.norm();
    s += n * n;
  }
  return s;
}

VectorField& VectorField::operator+=(const VectorField& other) {
  if (other.dim() != dim()) throw std::invalid_argument("VectorField: dimension mismatch");
  for (std::size_t i = 0; i < dim(); ++i) components_[i] += other.components_[i];
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& other) {
  if (other.dim() != dim()) throw std::invalid_argument("VectorField: dimension mismatch");
  for (std::size_t i = 0; i < dim(); ++i) components_[i] -= other.components_[i];
  return *this;
}

VectorField& VectorField::operator*=(double s) {
  for (auto& c : components_) c *= s;
  return *this;
}

// ---------------------------------------------------------------------------

double inner_product(const ChaosFn& f, const ChaosFn& g) {
  if (f.dim() != g.dim()) throw std::invalid_argument("inner_product: dimension mismatch");
  const auto& small = f.coeffs().size() <= g.coeffs().size() ? f : g;
  const auto& large = &small == &f ? g : f;
  double s = 0.0;
  for (const auto& [beta, c] : small.coeffs()) s += c * large.coeff(beta);
  return s;
}

double inner_product(const VectorField& u, const VectorField& v) {
  if (u.dim() != v.dim()) throw std::invalid_argument("inner_product: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) s += inner_product(u[i], v[i]);
  return s;
}

double max_coeff_diff(const ChaosFn& f, const ChaosFn& g) {
  if (f.dim() != g.dim()) throw std::invalid_argument("max_coeff_diff: dimension mismatch");
  double m = 0.0;
  for (const auto& [beta, c] : f.coeffs()) m = std::max(m, std::abs(c - g.coeff(beta)));
  for (const auto& [beta, c] : g.coeffs())
    if (f.coeffs().find(beta) == f.coeffs().end()) m = std::max(m, std::abs(c));
  return m;
}

ChaosFn project(const Sampler& sampler, std::size_t dim, unsigned max_degree,
                const QuadratureGrid& grid) {
  if (grid.dim != dim)
    throw std::invalid_argument("project: grid dimension " + std::to_string(grid.dim) +
                                " does not match " + std::to_string(dim));
  if (grid.exactness_degree() < 2 * max_degree)
    std::clog << "krdiv: warning: quadrature with " << grid.nodes_per_axis
              << " nodes/axis is not exact for degree-" << max_degree << " projections\n";

  const auto indices = indices_up_to(dim, max_degree);
  std::vector<double> acc(indices.size(), 0.0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    auto x = grid.point(j);
    const double v = sampler(x);
    if (!std::isfinite(v))
      throw std::domain_error("project: sampler returned a non-finite value at node " +
                              std::to_string(j));
    PointBasis basis(x, max_degree);
    const double wv = grid.weights[j] * v;
    for (std::size_t b = 0; b < indices.size(); ++b) acc[b] += wv * basis.value(indices[b]);
  }
  ChaosFn f(dim, max_degree);
  for (std::size_t b = 0; b < indices.size(); ++b) f.set(indices[b], acc[b]);
  return f;
}

}  // namespace krdiv
