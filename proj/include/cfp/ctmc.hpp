#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <span>
#include <vector>

namespace cfp {

/// Generator with rows indexed by the source state; each row sums to zero.
using SparseGenerator = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Propagator { Uniformization, RungeKutta };

struct PropagationOptions {
  Propagator method = Propagator::Uniformization;
  /// Uniformization: bound on the truncated Poisson tail per chunk. Runge-Kutta: relative local error.
  double tolerance = 1e-10;
  /// Allowed |sum p - 1| at every output time.
  double massTolerance = 1e-9;
};

/// Solves dp/dt = p Q for each requested time (nondecreasing, >= 0) from the row distribution p0.
/// Throws ValidationError for a bad p0 or time grid and SolverError when accuracy is not met.
std::vector<Eigen::VectorXd> propagate(const SparseGenerator& q, const Eigen::VectorXd& p0,
                                       std::span<const double> times, const PropagationOptions& options = {});

/// p0 must be nonnegative and sum to one within 1e-12.
void validateDistribution(const Eigen::VectorXd& p);

}  // namespace cfp
