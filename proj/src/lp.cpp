#include "dertariff/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dertariff::lp {

namespace {

constexpr double kPivotEps = 1e-11;

// Tableau layout: rows 0..m-1 are constraints, row m is the phase objective.
// Last column holds the right-hand side. The objective row stores reduced
// costs (z_j - c_j) for a maximization, so a negative entry can improve.
class Tableau {
 public:
  Tableau(Eigen::Index rows, Eigen::Index cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows) {}

  Eigen::MatrixXd& data() { return t_; }
  std::vector<Eigen::Index>& basis() { return basis_; }
  Eigen::Index rows() const { return t_.rows() - 1; }
  Eigen::Index cols() const { return t_.cols() - 1; }
  double& rhs(Eigen::Index r) { return t_(r, cols()); }

  void pivot(Eigen::Index r, Eigen::Index c) {
    const double inv = 1.0 / t_(r, c);
    t_.row(r) *= inv;
    t_(r, c) = 1.0;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(r);
        t_(i, c) = 0.0;
      }
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  // Returns false when the objective is unbounded along some column.
  bool run(Eigen::Index usable_cols) {
    const Eigen::Index obj = rows();
    for (;;) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < usable_cols; ++j) {
        if (t_(obj, j) < -kPivotEps) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;

      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < obj; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotEps) continue;
        const double ratio = rhs(i) / a;
        if (ratio < best - 1e-14 ||
            (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
             basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<Eigen::Index> basis_;
};

}  // namespace

LinearProgram::LinearProgram(Eigen::Index num_variables) : objective_(Eigen::VectorXd::Zero(num_variables)) {
  if (num_variables <= 0) throw std::invalid_argument("linear program needs at least one variable");
}

void LinearProgram::set_objective(Eigen::Index variable, double coefficient) { objective_(variable) = coefficient; }

void LinearProgram::set_objective(const Eigen::VectorXd& coefficients) {
  if (coefficients.size() != objective_.size()) throw std::invalid_argument("objective size mismatch");
  objective_ = coefficients;
}

void LinearProgram::add_constraint(Eigen::VectorXd row, Sense sense, double rhs) {
  if (row.size() != objective_.size()) throw std::invalid_argument("constraint size mismatch");
  if (!std::isfinite(rhs) || !row.allFinite()) throw std::invalid_argument("constraint must be finite");
  rows_.push_back({std::move(row), sense, rhs});
}

Result LinearProgram::maximize() const {
  const Eigen::Index n = objective_.size();
  const auto m = static_cast<Eigen::Index>(rows_.size());

  // Normalize to nonnegative right-hand sides.
  std::vector<Row> rows = rows_;
  Eigen::Index slack_count = 0;
  Eigen::Index artificial_count = 0;
  for (auto& r : rows) {
    if (r.rhs < 0) {
      r.coefficients = -r.coefficients;
      r.rhs = -r.rhs;
      if (r.sense == Sense::less_equal)
        r.sense = Sense::greater_equal;
      else if (r.sense == Sense::greater_equal)
        r.sense = Sense::less_equal;
    }
    if (r.sense != Sense::equal) ++slack_count;
    if (r.sense != Sense::less_equal) ++artificial_count;
  }

  const Eigen::Index art0 = n + slack_count;
  const Eigen::Index cols = art0 + artificial_count;
  Tableau tab(m, cols);
  auto& t = tab.data();

  Eigen::Index slack = n;
  Eigen::Index art = art0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Row& r = rows[static_cast<std::size_t>(i)];
    t.row(i).head(n) = r.coefficients.transpose();
    tab.rhs(i) = r.rhs;
    switch (r.sense) {
      case Sense::less_equal:
        t(i, slack) = 1.0;
        tab.basis()[static_cast<std::size_t>(i)] = slack++;
        break;
      case Sense::greater_equal:
        t(i, slack++) = -1.0;
        t(i, art) = 1.0;
        tab.basis()[static_cast<std::size_t>(i)] = art++;
        break;
      case Sense::equal:
        t(i, art) = 1.0;
        tab.basis()[static_cast<std::size_t>(i)] = art++;
        break;
    }
  }

  Result result;
  if (artificial_count > 0) {
    // Phase one: maximize -sum(artificials).
    t.row(m).setZero();
    for (Eigen::Index j = art0; j < cols; ++j) t(m, j) = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tab.basis()[static_cast<std::size_t>(i)] >= art0) t.row(m) -= t.row(i);
    }
    tab.run(cols);
    const double infeasibility = -t(m, cols);
    double scale = 1.0;
    for (const auto& r : rows) scale = std::max(scale, std::abs(r.rhs));
    if (infeasibility > 1e-9 * scale) {
      result.status = Status::infeasible;
      return result;
    }
    // Drive remaining (zero-valued) artificials out of the basis.
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < art0) continue;
      for (Eigen::Index j = 0; j < art0; ++j) {
        if (std::abs(t(i, j)) > 1e-9) {
          tab.pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase two objective row: reduced costs of c restricted to the basis.
  t.row(m).setZero();
  t.row(m).head(n) = -objective_.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index b = tab.basis()[static_cast<std::size_t>(i)];
    if (b < n && objective_(b) != 0.0) t.row(m) += objective_(b) * t.row(i);
  }
  if (!tab.run(art0)) {
    result.status = Status::unbounded;
    return result;
  }

  result.status = Status::optimal;
  result.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index b = tab.basis()[static_cast<std::size_t>(i)];
    if (b < n) result.x(b) = std::max(0.0, tab.rhs(i));
  }
  result.objective = objective_.dot(result.x);
  return result;
}

}  // namespace dertariff::lp
