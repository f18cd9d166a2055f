#include "krdiv/measures.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace krdiv {

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * s.asDiagonal();
}

std::string where(std::size_t k) { return "components[" + std::to_string(k) + "]"; }

}  // namespace

GaussianMixture::GaussianMixture(std::size_t dim, std::vector<GaussianComponent> components)
    : dim_(dim), components_(std::move(components)) {
  if (dim_ == 0) throw SpecError("dim: must be a positive integer");
  if (components_.empty()) throw SpecError("components: at least one component is required");
  double total = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    if (!(c.weight > 0.0) || !std::isfinite(c.weight))
      throw SpecError(where(k) + ".weight: must be a positive finite number");
    if (std::size_t(c.mean.size()) != dim_)
      throw SpecError(where(k) + ".mean: expected " + std::to_string(dim_) + " entries");
    if (!c.mean.allFinite()) throw SpecError(where(k) + ".mean: non-finite entry");
    if (std::size_t(c.cov.rows()) != dim_ || std::size_t(c.cov.cols()) != dim_)
      throw SpecError(where(k) + ".cov: expected a " + std::to_string(dim_) + "x" +
                      std::to_string(dim_) + " matrix");
    if (!c.cov.allFinite()) throw SpecError(where(k) + ".cov: non-finite entry");
    if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + c.cov.cwiseAbs().maxCoeff()))
      throw SpecError(where(k) + ".cov: not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.cov, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12)
      throw SpecError(where(k) + ".cov: not positive semidefinite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw SpecError("components: weights sum to " + std::to_string(total) + ", expected 1");
}

GaussianMixture GaussianMixture::standard(std::size_t dim) {
  return GaussianMixture(dim, {{1.0, Eigen::VectorXd::Zero(Eigen::Index(dim)),
                                Eigen::MatrixXd::Identity(Eigen::Index(dim), Eigen::Index(dim))}});
}

GaussianMixture GaussianMixture::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  const auto n = std::size_t(mean.size());
  return GaussianMixture(n, {{1.0, std::move(mean), std::move(cov)}});
}

void DiscreteMeasure::validate() const {
  if (dim == 0 || weights.empty()) throw std::invalid_argument("DiscreteMeasure: empty");
  if (atoms.size() != dim * weights.size())
    throw std::invalid_argument("DiscreteMeasure: atom storage does not match weights");
  long double total = 0.0L;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("DiscreteMeasure: weights must be positive");
    total += w;
  }
  if (std::abs(double(total) - 1.0) > 1e-12)
    throw std::invalid_argument("DiscreteMeasure: weights sum to " + std::to_string(double(total)));
  for (double a : atoms)
    if (!std::isfinite(a)) throw std::invalid_argument("DiscreteMeasure: non-finite atom");
}

DensityRatio::DensityRatio(const GaussianMixture& m) : dim_(m.dim()) {
  for (std::size_t k = 0; k < m.components().size(); ++k) {
    const auto& c = m.components()[k];
    Term term{std::log(c.weight), c.mean, Eigen::LLT<Eigen::MatrixXd>(c.cov), 0.0};
    const Eigen::MatrixXd L = term.chol.matrixL();
    const double min_diag = L.diagonal().minCoeff();
    if (term.chol.info() != Eigen::Success || !(min_diag > 1e-12 * std::max(1.0, L.diagonal().maxCoeff())))
      throw std::domain_error("density_vs_mu: " + where(k) +
                              " has a singular covariance; no density against mu");
    term.half_log_det = L.diagonal().array().log().sum();
    terms_.push_back(std::move(term));
  }
}

double DensityRatio::operator()(std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("density_vs_mu: dimension mismatch");
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), Eigen::Index(dim_));
  const double log_mu = -0.5 * xv.squaredNorm();
  // log-sum-exp over components
  std::vector<double> logs;
  logs.reserve(terms_.size());
  for (const auto& t : terms_) {
    Eigen::VectorXd r = t.chol.matrixL().solve(xv - t.mean);
    logs.push_back(t.log_weight - 0.5 * r.squaredNorm() - t.half_log_det - log_mu);
  }
  const double top = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - top);
  return std::exp(top) * s;
}

double density_vs_mu(const GaussianMixture& m, std::span<const double> x) {
  return DensityRatio(m)(x);
}

GaussianMixture ou_smooth_measure(const GaussianMixture& m, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("ou_smooth_measure: t must be non-negative");
  const double a = std::exp(-t);
  const double b = -std::expm1(-2.0 * t);
  const auto n = Eigen::Index(m.dim());
  std::vector<GaussianComponent> out;
  for (const auto& c : m.components())
    out.push_back({c.weight, a * c.mean, a * a * c.cov + b * Eigen::MatrixXd::Identity(n, n)});
  return GaussianMixture(m.dim(), std::move(out));
}

GaussianMixture epsilon_mix(const GaussianMixture& m, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon_mix: eps must be positive");
  const auto n = Eigen::Index(m.dim());
  std::vector<GaussianComponent> out;
  for (const auto& c : m.components()) out.push_back({c.weight / (1.0 + eps), c.mean, c.cov});
  out.push_back({eps / (1.0 + eps), Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)});
  // renormalize the rounding in the last ulp
  double total = 0.0;
  for (const auto& c : out) total += c.weight;
  for (auto& c : out) c.weight /= total;
  return GaussianMixture(m.dim(), std::move(out));
}

GaussianMixture project_measure(const GaussianMixture& m, std::size_t k) {
  if (k == 0 || k > m.dim())
    throw std::invalid_argument("project_measure: k must lie in [1, dim]");
  const auto kk = Eigen::Index(k);
  std::vector<GaussianComponent> out;
  for (const auto& c : m.components())
    out.push_back({c.weight, c.mean.head(kk), c.cov.topLeftCorner(kk, kk)});
  return GaussianMixture(k, std::move(out));
}

ChaosFn conditional_expectation(const ChaosFn& f, std::size_t k) {
  if (k > f.dim()) throw std::invalid_argument("conditional_expectation: k exceeds dim");
  ChaosFn out(f.dim(), f.max_degree());
  for (const auto& [beta, c] : f.coeffs())
    if (beta.vanishes_beyond(k)) out.set(beta, c);
  return out;
}

ChaosFn restrict_to_leading(const ChaosFn& f, std::size_t k) {
  if (k == 0 || k > f.dim()) throw std::invalid_argument("restrict_to_leading: bad k");
  ChaosFn out(k, f.max_degree());
  for (const auto& [beta, c] : f.coeffs()) {
    if (!beta.vanishes_beyond(k))
      throw std::invalid_argument("restrict_to_leading: function depends on dropped coordinates");
    out.set(beta.leading(k), c);
  }
  return out;
}

DiscreteMeasure sample(const GaussianMixture& m, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("sample: count must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<double> w;
  std::vector<Eigen::MatrixXd> roots;
  for (const auto& c : m.components()) {
    w.push_back(c.weight);
    roots.push_back(psd_sqrt(c.cov));
  }
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::normal_distribution<double> normal;
  const auto n = Eigen::Index(m.dim());

  DiscreteMeasure out;
  out.dim = m.dim();
  out.atoms.resize(count * m.dim());
  out.weights.assign(count, 1.0 / double(count));
  Eigen::VectorXd z(n);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t k = pick(rng);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    Eigen::VectorXd x = m.components()[k].mean + roots[k] * z;
    std::copy(x.data(), x.data() + n, out.atoms.begin() + std::ptrdiff_t(s * m.dim()));
  }
  return out;
}

ChaosFn density_projection(const GaussianMixture& m, unsigned max_degree,
                           const QuadratureGrid& grid) {
  DensityRatio ratio(m);
  return project([&](std::span<const double> x) { return ratio(x); }, m.dim(), max_degree, grid);
}

DifferenceDensity difference_density(const GaussianMixture& nu0, const GaussianMixture& nu1,
                                     unsigned max_degree, const QuadratureGrid& grid) {
  if (nu0.dim() != nu1.dim()) throw std::invalid_argument("difference_density: dimension mismatch");
  DensityRatio r0(nu0), r1(nu1);
  ChaosFn alpha = project([&](std::span<const double> x) { return r1(x) - r0(x); }, nu0.dim(),
                          max_degree, grid);
  const double adj = alpha.mean();
  return DifferenceDensity{alpha.centered(), adj};
}

double density_inner(const GaussianMixture& a, const GaussianMixture& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("density_inner: dimension mismatch");
  const auto n = Eigen::Index(a.dim());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  double total = 0.0;
  for (const auto& p : a.components())
    for (const auto& q : b.components()) {
      const Eigen::LLT<Eigen::MatrixXd> lp(p.cov), lq(q.cov);
      if (lp.info() != Eigen::Success || lq.info() != Eigen::Success)
        throw std::domain_error("density_inner: singular component covariance");
      const Eigen::MatrixXd Ap = lp.solve(I), Aq = lq.solve(I);
      const Eigen::MatrixXd Q = Ap + Aq - I;
      const Eigen::LLT<Eigen::MatrixXd> lQ(Q);
      if (lQ.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      const Eigen::VectorXd bvec = Ap * p.mean + Aq * q.mean;
      const double c = p.mean.dot(Ap * p.mean) + q.mean.dot(Aq * q.mean);
      const double log_det = 2.0 * (lp.matrixLLT().diagonal().array().log().sum() +
                                    lq.matrixLLT().diagonal().array().log().sum() +
                                    lQ.matrixLLT().diagonal().array().log().sum());
      total += p.weight * q.weight * std::exp(0.5 * bvec.dot(lQ.solve(bvec)) - 0.5 * c - 0.5 * log_det);
    }
  return total;
}

double integrate_mixture(const GaussianMixture& m, const Sampler& f, unsigned nodes_per_axis) {
  const QuadratureGrid grid = gauss_hermite_grid(m.dim(), nodes_per_axis);
  const auto n = Eigen::Index(m.dim());
  double total = 0.0;
  Eigen::VectorXd x(n);
  for (const auto& c : m.components()) {
    const Eigen::MatrixXd root = psd_sqrt(c.cov);
    double s = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      Eigen::Map<const Eigen::VectorXd> z(grid.point(j).data(), n);
      x = c.mean + root * z;
      s += grid.weights[j] * f(std::span<const double>(x.data(), std::size_t(n)));
    }
    total += c.weight * s;
  }
  return total;
}

}  // namespace krdiv
