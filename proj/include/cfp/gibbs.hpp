#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfp/kernels.hpp"
#include "cfp/partitions.hpp"
#include "cfp/rational.hpp"

namespace cfp {

/// Weights a_1..a_K of the solvable family with parameters (a, b).
struct WeightSequence {
  Rational a;
  Rational b;
  std::vector<Rational> values;  // values[k-1] = a_k

  int size() const { return static_cast<int>(values.size()); }
  /// 1-based access.
  const Rational& operator[](int k) const { return values.at(static_cast<std::size_t>(k - 1)); }
};

inline constexpr int kDefaultWeightCap = 64;

/// a_k = prod_{r=2}^{k} (ka + br/2) / r, which equals the product over k! form.
template <class Scalar>
Scalar closedFormWeight(const Scalar& a, const Scalar& b, int k) {
  Scalar w(1);
  for (int r = 2; r <= k; ++r) {
    Scalar factor = Scalar(k) * a + b * Scalar(r) / Scalar(2);
    w *= factor;
    w /= Scalar(r);
  }
  return w;
}

/// Throws DomainError unless a >= 0, 2a + b > 0, K >= 1.
WeightSequence weightsClosedForm(const Rational& a, const Rational& b, int count);
/// a_k = (ak + b) * sum_{i=1}^{k-1} a_i a_{k-i} / (2(k-1)), ordered pairs.
WeightSequence weightsRecursion(const Rational& a, const Rational& b, int count);
/// Both routes; throws std::logic_error if they ever disagree.
WeightSequence solvableWeights(const Rational& a, const Rational& b, int count);

/// prod_k a_k^{n_k} / n_k! for a partition; `weights` holds a_1..a_M with M >= largest block.
Rational gibbsWeight(const Partition& eta, std::span<const Rational> weights);

/// Partial Bell polynomial as the sum of gibbsWeight over the partitions of n with r blocks.
Rational bellDirect(std::span<const Rational> weights, int n, int r);
/// Product form prod_{l=r+1}^{N} mu_{l,N} / (N! (N-r)!) for the solvable weights.
Rational bellProduct(const Rational& a, const Rational& b, int n, int r);

/// Probability law on the partitions of n with r blocks, aligned with levelSlice order.
struct LevelDistribution {
  int n = 0;
  int r = 0;
  std::vector<Partition> states;
  std::vector<Rational> probs;

  /// Zero for partitions outside the level.
  Rational at(const Partition& eta) const;
  Rational total() const;
};

LevelDistribution pointMass(const Partition& eta);

class GibbsModel {
 public:
  /// Solvable-family model; `weights` must reach at least a_n.
  GibbsModel(int n, WeightSequence weights);
  /// Arbitrary positive weights a_1..a_M, M >= n.
  static GibbsModel fromWeights(int n, std::vector<Rational> weights);
  static GibbsModel solvable(int n, const Rational& a, const Rational& b);

  int n() const { return n_; }
  const std::vector<Rational>& weights() const { return weights_; }
  /// Parameters (a, b) when built from the solvable family.
  const std::optional<std::pair<Rational, Rational>>& parameters() const { return parameters_; }
  const Rational& bell(int r) const;
  const LevelDistribution& level(int r) const;
  const std::vector<LevelDistribution>& levels() const { return levels_; }

 private:
  GibbsModel(int n, std::vector<Rational> weights, std::optional<std::pair<Rational, Rational>> params);

  int n_;
  std::vector<Rational> weights_;
  std::optional<std::pair<Rational, Rational>> parameters_;
  std::vector<Rational> bell_;               // index r-1
  std::vector<LevelDistribution> levels_;    // index r-1
};

LevelDistribution rhoLevel(const GibbsModel& model, int r);

/// P_C(zeta -> eta) = K(zeta -> eta) / mu_{r+1,N}. Throws DomainError if mu vanishes.
Rational coagWalkProb(const SolvableKernel& k, const Move& m);
/// Gibbs fragmentation rate F(eta -> eta_(i,j)) built from phi(1,1), the weights and their (a, b).
Rational fragRate(const SolvableKernel& k, const WeightSequence& weights, const Move& m);
/// Linear selection of the block times the Gibbs splitting rule.
Rational fragWalkProb(const WeightSequence& weights, const Move& m);

/// One-step transition table of the discrete coagulation or fragmentation walk on Omega_N.
struct WalkTable {
  MoveKind direction;
  std::shared_ptr<const StateSpace> space;
  /// rows[s] lists (target index, probability); empty where the walk has no moves.
  std::vector<std::vector<std::pair<std::size_t, Rational>>> rows;
};

/// P_F(eta -> zeta) = F(eta -> zeta) / sum of F over all fragmentations of eta.
WalkTable fragmentationWalk(const Kernel& k, int n);
/// P_C(zeta -> eta) = K(zeta -> eta) / sum of K over all coagulations of zeta.
WalkTable coagulationWalk(const Kernel& k, int n);
/// Walk given directly by selection and splitting probabilities.
WalkTable gibbsFragmentationWalk(const WeightSequence& weights, int n);

/// Pushes the point mass at the single block forward r-1 steps; returns levels r = 1..N.
/// Throws ValidationError if any row below level N is not exactly stochastic.
std::vector<LevelDistribution> fragWalkSolve(const WalkTable& walk);
/// Same for the coagulation walk started from the singletons.
std::vector<LevelDistribution> coagWalkSolve(const WalkTable& walk);

struct FixedPointViolation {
  std::string system;  // "eq1", "eq2", "balance", "selection-split", "rates"
  int r;
  Partition state;
  std::optional<Partition> partner;
  Rational lhs;
  Rational rhs;
};

struct FixedPointReport {
  int n = 0;
  bool eq1Applicable = false;
  bool eq2Applicable = false;
  bool balanceApplicable = false;
  std::size_t eq1Checks = 0;
  std::size_t eq2Checks = 0;
  std::size_t balanceChecks = 0;
  std::size_t selectionSplitChecks = 0;
  std::size_t rateChecks = 0;
  std::vector<FixedPointViolation> violations;

  bool ok() const { return violations.empty(); }
};

/// Checks the coagulation system mu_{r+1} rho_r(eta) = sum rho_{r+1}(zeta) K(zeta -> eta) and the
/// fragmentation system lambda_r rho_{r+1}(zeta) = sum rho_r(eta) F(eta -> zeta) for the given
/// levels (r = 1..N). Birth and death rates are the level totals, so the kernel must satisfy the
/// homogeneity condition (DomainError otherwise). A system whose rates vanish identically holds
/// trivially and is reported as not applicable.
FixedPointReport verifyFixedPoint(const std::vector<LevelDistribution>& levels, const Kernel& k);

/// Solvable kernel against its Gibbs model: both systems, pairwise detailed balance between the
/// two walks, the selection-times-split form of P_F, and the closed-form birth/death rates.
FixedPointReport verifyFixedPoint(const GibbsModel& model, const SolvableKernel& k);

}  // namespace cfp
