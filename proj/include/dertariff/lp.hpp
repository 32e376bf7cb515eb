#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dertariff::lp {

enum class Sense { less_equal, greater_equal, equal };

enum class Status { optimal, infeasible, unbounded };

struct Result {
  Status status = Status::infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
};

/// Dense linear program  max cᵀx  s.t.  rows (≤, ≥, =),  x ≥ 0.
///
/// Solved with a two-phase tableau simplex using Bland's rule, so the
/// returned vertex is a deterministic function of the input. Intended for
/// the small problems in this project (a few hundred rows at most).
class LinearProgram {
 public:
  explicit LinearProgram(Eigen::Index num_variables);

  Eigen::Index num_variables() const { return objective_.size(); }
  std::size_t num_constraints() const { return rows_.size(); }

  void set_objective(Eigen::Index variable, double coefficient);
  void set_objective(const Eigen::VectorXd& coefficients);

  void add_constraint(Eigen::VectorXd row, Sense sense, double rhs);

  Result maximize() const;

 private:
  struct Row {
    Eigen::VectorXd coefficients;
    Sense sense;
    double rhs;
  };

  Eigen::VectorXd objective_;
  std::vector<Row> rows_;
};

}  // namespace dertariff::lp
