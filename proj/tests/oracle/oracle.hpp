#pragma once

#include <functional>
#include <vector>

#include "dertariff/integration.hpp"
#include "dertariff/tariff.hpp"
#include "dertariff/welfare.hpp"

// Brute-force reference implementations for the test suite. None of these
// call the numerical kernels they are used to check.
namespace dertariff::oracle {

inline constexpr Eigen::Index kStorageHorizonCap = 6;
inline constexpr std::size_t kSupportCap = 16;

/// Forward DP over soc levels θk/grid_steps (state-of-charge lattice).
double dp_storage_value(const StorageSpec& spec, const PriceVector& pi, int grid_steps);

/// Planner optimum by direct per-(group, local-state) maximization with the
/// DP storage oracle. Throws std::length_error above the caps.
double planner_direct(const DemandModel& model, const ScenarioSet& set, const IntegrationCase& integration,
                      int grid_steps = 2);

/// Second settlement path: group-major loops, long-double sums, its own
/// matrix inverse for the gross benefit.
SurplusReport settlement_resim(const TwoPartTariff& tariff, const DemandModel& model, const ScenarioSet& set,
                               const IntegrationCase& integration);

/// A with E[rs] = F at fixed prices, by bisection on the re-simulated rs.
double root_find_connection_charge(const TwoPartTariff& prices_only, const DemandModel& model, const ScenarioSet& set,
                                   const IntegrationCase& integration, double F);

/// Gauss-Jordan inverse with partial pivoting.
Matrix gauss_jordan_inverse(const Matrix& m);

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
std::vector<double> jacobi_eigenvalues(const Matrix& symmetric);

using Field = std::function<Vector(const Scenario&)>;

/// Σ_t Cov(a_t, b_t) as ½ Σ_s Σ_r p_s p_r (a_s − a_r)ᵀ(b_s − b_r).
double pairwise_cov_trace(const ScenarioSet& set, const Field& a, const Field& b);

/// Central finite difference of log total demand under π → απ.
double fd_total_elasticity(const DemandModel& model, const PriceVector& pi, double step = 1e-6);

}  // namespace dertariff::oracle
