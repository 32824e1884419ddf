#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "cfp/ctmc.hpp"
#include "cfp/gibbs.hpp"
#include "cfp/kernels.hpp"
#include "cfp/partitions.hpp"
#include "cfp/rational.hpp"

namespace cfp {

struct ExactTransition {
  std::size_t from;
  std::size_t to;
  MoveKind kind;
  Rational rate;
};

/// Conservative rate matrix of the process on Omega_N, assembled exactly and then converted.
class Generator {
 public:
  Generator(const Kernel& k, int n, int maxN = exactMaxN());

  int n() const { return space_->n(); }
  std::size_t size() const { return space_->size(); }
  const StateSpace& states() const { return *space_; }
  std::shared_ptr<const StateSpace> sharedStates() const { return space_; }
  /// Off-diagonal transitions with nonzero rate.
  const std::vector<ExactTransition>& transitions() const { return transitions_; }
  /// Total outflow from state s (negated diagonal), exact.
  const Rational& exitRate(std::size_t s) const { return exit_[s]; }
  const SparseGenerator& matrix() const { return matrix_; }

  /// Every state reaches every other through nonzero rates.
  bool irreducible() const;
  std::vector<std::size_t> absorbingStates() const;

 private:
  std::shared_ptr<const StateSpace> space_;
  std::vector<ExactTransition> transitions_;
  std::vector<Rational> exit_;
  SparseGenerator matrix_;
};

Generator buildGenerator(const Kernel& k, int n, int maxN = exactMaxN());

struct DistributionVector {
  double t = 0.0;
  Eigen::VectorXd probs;  // aligned with StateSpace order
};

DistributionVector pointDistribution(const StateSpace& space, const Partition& eta);
/// Distribution whose level-r projection is the model's rho_r with total level mass levelMass[r-1].
DistributionVector gibbsMixture(const StateSpace& space, const GibbsModel& model, std::span<const double> levelMass);

/// Transient law at each time; uniformization by default.
std::vector<DistributionVector> evolve(const Generator& g, const DistributionVector& initial,
                                       std::span<const double> times, const PropagationOptions& options = {});

inline constexpr double kAbsentLevelMass = 1e-14;

struct ConditionalSnapshot {
  double t = 0.0;
  std::vector<double> levelMass;                             // index r-1
  std::vector<std::optional<Eigen::VectorXd>> conditional;   // index r-1, aligned with levelRange(r)
};

ConditionalSnapshot conditionalSnapshot(const StateSpace& space, const DistributionVector& d);

struct StationaryResult {
  bool ergodic = false;
  std::optional<DistributionVector> measure;
  std::vector<Partition> absorbing;
  /// Closed-form invariant measure and its partition function c_N, solvable kernels only.
  std::optional<std::vector<Rational>> closedForm;
  std::optional<Rational> partitionFunction;
  double maxDeviation = 0.0;  // numerical vs closed form, per state
};

inline constexpr double kStationaryAgreement = 1e-10;

/// Null vector of the generator transpose, or the absorbing states when not irreducible.
StationaryResult stationaryMeasure(const Generator& g);
/// Also evaluates the closed form and throws SolverError if it disagrees beyond 1e-10.
StationaryResult stationaryMeasure(const Generator& g, const SolvableKernel& k);

/// Unnormalized prod (phi11 a_k)^{n_k}/n_k! per state; std::nullopt when the kernel lacks the
/// reversible Gibbs form (no coagulation or no fragmentation, degenerate or split weights).
std::optional<std::vector<Rational>> closedFormInvariantWeights(const StateSpace& space, const SolvableKernel& k);

enum class WeightClass { Convergent, Expansive };

struct AsymptoticsRow {
  int k;
  double logWeight;
  double weight;      // +inf once beyond double range
  double ratio;       // a_{k+1} / a_k
  double normalized;  // a_k k^{3/2} / C^k, or a_k / (b/2)^{k-1} when a = 0
};

struct AsymptoticsReport {
  Rational a;
  Rational b;
  WeightClass weightClass;
  double alpha;           // regular-variation index of the rescaled weights
  double growth;          // C with a_k ~ const * C^k * k^alpha
  double estimatedAlpha;  // fitted from k = K/2 and k = K
  bool logDomain;         // some a_k overflowed double
  std::vector<AsymptoticsRow> rows;
};

inline constexpr int kMaxAsymptoticsK = 400;

AsymptoticsReport weightAsymptotics(const Rational& a, const Rational& b, int count);

}  // namespace cfp
