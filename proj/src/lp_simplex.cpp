#include "krdiv/lp_simplex.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace krdiv {

namespace {
constexpr double kPricingTol = 1e-12;
constexpr double kPivotTol = 1e-11;
constexpr std::size_t kRefactorInterval = 100;
constexpr std::size_t kDegenerateSwitch = 50;
}  // namespace

RevisedSimplex::RevisedSimplex(int rows, std::vector<double> rhs)
    : rows_(rows), rhs_(Eigen::Map<Eigen::VectorXd>(rhs.data(), Eigen::Index(rhs.size()))) {
  if (rows <= 0 || std::size_t(rows) != rhs.size())
    throw std::invalid_argument("RevisedSimplex: rhs size must equal the row count");
}

int RevisedSimplex::add_column(Column column) {
  for (const auto& [r, v] : column.entries)
    if (r < 0 || r >= rows_) throw std::out_of_range("RevisedSimplex: column row out of range");
  columns_.push_back(std::move(column));
  is_basic_.push_back(0);
  return int(columns_.size()) - 1;
}

void RevisedSimplex::set_basis(std::vector<int> basic) {
  if (basic.size() != std::size_t(rows_))
    throw std::invalid_argument("RevisedSimplex: basis size must equal the row count");
  std::fill(is_basic_.begin(), is_basic_.end(), 0);
  for (int c : basic) is_basic_.at(std::size_t(c)) = 1;
  basic_ = std::move(basic);
  refactor();
  if (xb_.minCoeff() < -1e-9)
    throw std::invalid_argument("RevisedSimplex: starting basis is not primal feasible");
  xb_ = xb_.cwiseMax(0.0);
}

void RevisedSimplex::refactor() {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(rows_, rows_);
  for (int r = 0; r < rows_; ++r)
    for (const auto& [row, v] : columns_[std::size_t(basic_[std::size_t(r)])].entries) B(row, r) = v;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  if (std::abs(lu.determinant()) < 1e-300)
    throw std::runtime_error("RevisedSimplex: singular basis");
  binv_ = lu.inverse();
  xb_ = binv_ * rhs_;
  since_refactor_ = 0;
}

void RevisedSimplex::compute_duals() {
  Eigen::VectorXd cb(rows_);
  for (int r = 0; r < rows_; ++r) cb(r) = columns_[std::size_t(basic_[std::size_t(r)])].cost;
  duals_ = binv_.transpose() * cb;
}

double RevisedSimplex::reduced_cost(const Column& column) const {
  double rc = column.cost;
  for (const auto& [r, v] : column.entries) rc -= duals_(r) * v;
  return rc;
}

Eigen::VectorXd RevisedSimplex::ftran(const Column& column) const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(rows_);
  for (const auto& [r, v] : column.entries) d += v * binv_.col(r);
  return d;
}

RevisedSimplex::Status RevisedSimplex::solve(std::size_t max_iterations) {
  if (basic_.empty()) throw std::logic_error("RevisedSimplex: no starting basis");
  std::size_t degenerate_run = 0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    compute_duals();
    const bool bland = degenerate_run >= kDegenerateSwitch;

    int entering = -1;
    double best = -kPricingTol;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (is_basic_[j]) continue;
      const double rc = reduced_cost(columns_[j]);
      if (rc < best) {
        entering = int(j);
        best = rc;
        if (bland) break;
      }
    }
    if (entering < 0) return Status::Optimal;

    const Eigen::VectorXd d = ftran(columns_[std::size_t(entering)]);
    int leave = -1;
    double theta = std::numeric_limits<double>::infinity();
    for (int r = 0; r < rows_; ++r) {
      if (d(r) <= kPivotTol) continue;
      const double ratio = xb_(r) / d(r);
      const bool better = ratio < theta - 1e-15 ||
                          (ratio <= theta + 1e-15 && leave >= 0 &&
                           (bland ? basic_[std::size_t(r)] < basic_[std::size_t(leave)]
                                  : d(r) > d(leave)));
      if (leave < 0 || better) {
        leave = r;
        theta = std::max(ratio, 0.0);
      }
    }
    if (leave < 0) return Status::Unbounded;

    degenerate_run = theta <= 1e-15 ? degenerate_run + 1 : 0;

    xb_ -= theta * d;
    xb_(leave) = theta;
    const Eigen::RowVectorXd pivot_row = binv_.row(leave) / d(leave);
    Eigen::VectorXd others = d;
    others(leave) = 0.0;
    binv_.noalias() -= others * pivot_row;
    binv_.row(leave) = pivot_row;
    xb_ = xb_.cwiseMax(0.0);

    is_basic_[std::size_t(basic_[std::size_t(leave)])] = 0;
    is_basic_[std::size_t(entering)] = 1;
    basic_[std::size_t(leave)] = entering;
    ++iterations_;
    if (++since_refactor_ >= kRefactorInterval) {
      refactor();
      xb_ = xb_.cwiseMax(0.0);
    }
  }
  compute_duals();
  return Status::IterationLimit;
}

std::vector<double> RevisedSimplex::primal() const {
  std::vector<double> y(columns_.size(), 0.0);
  for (int r = 0; r < rows_; ++r) y[std::size_t(basic_[std::size_t(r)])] = xb_(r);
  return y;
}

double RevisedSimplex::objective() const {
  double s = 0.0;
  for (int r = 0; r < rows_; ++r) s += columns_[std::size_t(basic_[std::size_t(r)])].cost * xb_(r);
  return s;
}

}  // namespace krdiv
