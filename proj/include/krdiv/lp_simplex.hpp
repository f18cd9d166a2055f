#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <utility>
#include <vector>

namespace krdiv {

/// Dense revised simplex for  min c^T y  s.t.  A y = b, y >= 0,  started from a
/// caller-supplied primal feasible basis. Columns are sparse and may be added
/// between solves (column generation); the current basis stays feasible.
class RevisedSimplex {
 public:
  struct Column {
    std::vector<std::pair<int, double>> entries;  // (row, value)
    double cost = 0.0;
  };

  enum class Status { Optimal, IterationLimit, Unbounded };

  RevisedSimplex(int rows, std::vector<double> rhs);

  int add_column(Column column);
  std::size_t column_count() const { return columns_.size(); }

  /// `basic[r]` is the column basic in row position r. Must be nonsingular and
  /// give a non-negative basic solution.
  void set_basis(std::vector<int> basic);

  Status solve(std::size_t max_iterations);

  /// Simplex multipliers pi with reduced costs c_j - pi^T a_j.
  const Eigen::VectorXd& duals() const { return duals_; }
  std::vector<double> primal() const;
  double objective() const;
  std::size_t iterations() const { return iterations_; }

  double reduced_cost(const Column& column) const;

 private:
  void refactor();
  void compute_duals();
  Eigen::VectorXd ftran(const Column& column) const;

  int rows_;
  Eigen::VectorXd rhs_;
  std::vector<Column> columns_;
  std::vector<int> basic_;
  std::vector<char> is_basic_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  Eigen::VectorXd duals_;
  std::size_t iterations_ = 0;
  std::size_t since_refactor_ = 0;
};

}  // namespace krdiv
