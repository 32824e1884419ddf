#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cfp/kernels.hpp"
#include "cfp/partitions.hpp"

namespace cfp {

/// Explicit mixture of starting states; weights need not be normalized.
using StateMixture = std::vector<std::pair<Partition, double>>;
using SimInit = std::variant<Partition, StateMixture>;

struct SimConfig {
  int n = 0;
  Kernel kernel;
  SimInit init;
  double horizon = 0.0;
  std::vector<double> snapshots;  // within [0, horizon], nondecreasing
  std::int64_t trajectories = 1;
  std::uint64_t baseSeed = 0;
  int threads = 0;  // 0 means hardware concurrency
};

/// States are tabulated per snapshot up to this N.
inline constexpr int kSimTabulateMaxN = 30;

/// Seed of trajectory i: the splitmix64 finalizer applied to baseSeed + (i + 1) * 0x9E3779B97F4A7C15.
/// Each trajectory draws from its own mt19937_64 seeded with this value.
std::uint64_t trajectorySeed(std::uint64_t baseSeed, std::int64_t index);

struct SnapshotStats {
  double t = 0.0;
  std::vector<std::int64_t> levelCounts;  // index r-1
  std::vector<double> levelProb;
  std::vector<double> levelSE;  // sqrt(p(1-p)/M) with the empirical p
  std::optional<std::vector<std::int64_t>> stateCounts;  // aligned with StateSpace order
  std::vector<std::int64_t> largestHistogram;  // index m-1
  double largestMean = 0.0;
  double largestSE = 0.0;
  int largestQ10 = 0;
  int largestMedian = 0;
  int largestQ90 = 0;
};

struct TrajectoryStats {
  int n = 0;
  std::uint64_t baseSeed = 0;
  std::int64_t trajectories = 0;
  std::int64_t events = 0;
  std::int64_t parked = 0;  // trajectories that hit an absorbing state before the horizon
  std::shared_ptr<const StateSpace> space;  // set when states are tabulated
  std::vector<SnapshotStats> snapshots;
};

/// Called after every jump with the new state's counts (index i-1 holds n_i) and the jump time.
using EventObserver = std::function<void(double, std::span<const int>)>;

/// Double-precision rate tables of a kernel for blocks up to size N.
class SsaRates {
 public:
  SsaRates(const Kernel& k, int n);
  int n() const { return n_; }
  double psi(int i, int j) const { return psi_[idx(i, j)]; }
  double phi(int i, int j) const { return phi_[idx(i, j)]; }
  /// Sum over unordered splits of a block of size s.
  double splitTotal(int s) const { return splitTotal_[static_cast<std::size_t>(s)]; }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * (n_ + 1) + j; }
  int n_;
  std::vector<double> psi_, phi_, splitTotal_;
};

/// Runs one trajectory and returns the counts vector at each snapshot time.
std::vector<std::vector<int>> simulateTrajectory(const SsaRates& rates, const SimConfig& cfg, std::int64_t index,
                                                 const EventObserver& observer = {}, std::int64_t* events = nullptr,
                                                 bool* parked = nullptr);

TrajectoryStats runSSA(const SimConfig& cfg);

/// Empirical conditional law on level r at snapshot s, aligned with levelRange(r); empty if unobserved.
Eigen::VectorXd empiricalConditional(const TrajectoryStats& stats, std::size_t snapshot, int r);

double totalVariation(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct GelationRow {
  int n;
  double t;
  double meanLargest;
  double seLargest;
  double fractionOfN;     // E[max block] / N
  double thresholdScale;  // N^{1/(alpha+2)}
  double fractionOfThreshold;
};

struct GelationScan {
  double alpha;
  std::vector<GelationRow> rows;
};

/// Largest block near stationarity for each N, starting from singletons; t is raised to 10 / gap when short.
GelationScan gelationScan(const SolvableKernel& k, std::span<const int> ns, double t, std::int64_t trajectories,
                          std::uint64_t baseSeed, int threads = 0);

}  // namespace cfp
