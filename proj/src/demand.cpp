#include "dertariff/demand.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dertariff/errors.hpp"

namespace dertariff {

DemandModel::DemandModel(std::vector<double> sigma, Vector base, Matrix slope, PriceVector calibration_price,
                         std::vector<double> customers_per_class)
    : sigma_(std::move(sigma)),
      base_(std::move(base)),
      slope_(std::move(slope)),
      calibration_price_(std::move(calibration_price)),
      customers_(std::move(customers_per_class)) {
  const Eigen::Index n = base_.size();
  if (n < 1) throw ValidationError("demand model needs a horizon of at least 1");
  if (slope_.rows() != n || slope_.cols() != n) throw ValidationError("slope matrix must be N x N");
  if (calibration_price_.size() != n) throw ValidationError("calibration price has wrong length");
  if (!base_.allFinite() || !slope_.allFinite()) throw ValidationError("demand model has non-finite entries");
  if (sigma_.empty() || sigma_.size() != customers_.size())
    throw ValidationError("sigma and class populations must have the same nonzero length");
  for (double s : sigma_)
    if (!(s > 0.0)) throw ValidationError("class scale multipliers must be positive");
  for (double c : customers_)
    if (!(c >= 0.0)) throw ValidationError("class populations must be nonnegative");
  if (!(total_customers() >= 1.0)) throw ValidationError("total customer count must be at least 1");
  if ((slope_ - slope_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, slope_.cwiseAbs().maxCoeff()))
    throw ValidationError("slope matrix must be symmetric");

  Eigen::FullPivLU<Matrix> lu(slope_);
  invertible_ = lu.isInvertible();
  if (invertible_) {
    slope_inverse_ = lu.inverse();
    slope_inverse_ = 0.5 * (slope_inverse_ + slope_inverse_.transpose()).eval();
  }
}

double DemandModel::total_customers() const { return std::accumulate(customers_.begin(), customers_.end(), 0.0); }

double DemandModel::sigma_total() const {
  double acc = 0.0;
  for (std::size_t c = 0; c < sigma_.size(); ++c) acc += customers_[c] * sigma_[c];
  return acc;
}

const Matrix& DemandModel::slope_inverse() const {
  if (!invertible_) throw std::domain_error("demand slope matrix is singular");
  return slope_inverse_;
}

Vector demand(const DemandModel& model, std::size_t class_id, const PriceVector& pi, const Vector& disturbance) {
  const double sigma = model.sigma().at(class_id);
  return sigma * (model.base() - model.slope() * pi) + disturbance;
}

bool is_degenerate(const Vector& q) { return (q.array() < 0.0).any(); }

double gross_benefit(const DemandModel& model, std::size_t class_id, const Vector& q, const Vector& disturbance) {
  const double sigma = model.sigma().at(class_id);
  const Matrix& b_inv = model.slope_inverse();
  const Vector intercept = sigma * model.base() + disturbance;
  const Vector scaled_q = b_inv * q / sigma;
  return intercept.dot(scaled_q) - 0.5 * q.dot(scaled_q);
}

Vector marginal_benefit(const DemandModel& model, std::size_t class_id, const Vector& q, const Vector& disturbance) {
  const double sigma = model.sigma().at(class_id);
  const Vector intercept = sigma * model.base() + disturbance;
  return model.slope_inverse() * (intercept - q) / sigma;
}

DemandModel calibrate(const Vector& target_sales, const PriceVector& target_price, double elasticity,
                      const std::vector<double>& customers_per_class, SigmaRule sigma_rule) {
  if (!(elasticity < 0.0)) throw ValidationError("elasticity must be negative, got " + std::to_string(elasticity));
  if (target_sales.size() != target_price.size()) throw ValidationError("sales and price horizons differ");
  if (!(target_sales.array() > 0.0).all()) throw ValidationError("target sales must be positive in every period");
  if (!(target_price.array() > 0.0).all()) throw ValidationError("calibration price must be positive");
  if (customers_per_class.empty()) throw ValidationError("at least one customer class is required");

  std::vector<double> sigma(customers_per_class.size());
  for (std::size_t c = 0; c < sigma.size(); ++c)
    sigma[c] = sigma_rule == SigmaRule::linear ? static_cast<double>(c + 1) : 1.0;

  double weight = 0.0;
  for (std::size_t c = 0; c < sigma.size(); ++c) weight += customers_per_class[c] * sigma[c];
  if (!(weight > 0.0)) throw ValidationError("class populations must not all be zero");

  // Demand of a σ = 1 customer at the calibration price.
  const Vector unit = target_sales / weight;
  const Vector diag = (-elasticity) * unit.cwiseQuotient(target_price);
  Matrix slope = diag.asDiagonal();
  Vector base = unit + slope * target_price;
  return DemandModel(std::move(sigma), std::move(base), std::move(slope), target_price, customers_per_class);
}

Vector aggregate_demand(const DemandModel& model, const PriceVector& pi) {
  Vector acc = Vector::Zero(model.horizon());
  const Vector zero = Vector::Zero(model.horizon());
  for (std::size_t c = 0; c < model.num_classes(); ++c) acc += model.customers()[c] * demand(model, c, pi, zero);
  return acc;
}

double total_elasticity(const DemandModel& model, const PriceVector& pi) {
  const double total = aggregate_demand(model, pi).sum();
  const double slope = -model.sigma_total() * (model.slope() * pi).sum();
  return slope / total;
}

Assumption1Report validate_assumption1(const DemandModel& model, const ScenarioSet& set) {
  if (set.horizon() != model.horizon()) throw ValidationError("scenario horizon does not match demand model");
  const Matrix jac = -model.aggregate_slope();
  const Matrix sym = 0.5 * (jac + jac.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  Assumption1Report report;
  report.eigenvalues = solver.eigenvalues();
  report.min_eigenvalue = report.eigenvalues.minCoeff();
  report.max_eigenvalue = report.eigenvalues.maxCoeff();
  const double scale = report.eigenvalues.cwiseAbs().maxCoeff();
  report.pass = scale > 0.0 && report.max_eigenvalue < -1e-12 * scale;
  return report;
}

}  // namespace dertariff
