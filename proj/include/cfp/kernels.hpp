#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfp/partitions.hpp"
#include "cfp/rational.hpp"

namespace cfp {

/// Symmetric single-transition rates: psi(i, j) merges blocks of sizes i and j, phi(i, j)
/// splits a block of size i+j into i and j. Neither may depend on N.
class Kernel {
 public:
  using RateFunction = std::function<Rational(int, int)>;

  Kernel(RateFunction psi, RateFunction phi, std::string label = "custom");

  /// Throws DomainError on negative values.
  Rational psi(int i, int j) const;
  Rational phi(int i, int j) const;
  const std::string& label() const { return label_; }

  /// Checks symmetry and nonnegativity on all pairs with i + j <= n; throws DomainError.
  void validate(int n) const;

 private:
  RateFunction psi_;
  RateFunction phi_;
  std::string label_;
};

/// Tabulated kernel values on 1 <= i <= j; absent pairs are zero.
struct KernelTable {
  std::map<std::pair<int, int>, std::pair<Rational, Rational>> entries;  // (i,j) -> (psi, phi)

  void set(int i, int j, Rational psi, Rational phi);
  Kernel toKernel(std::string label = "table") const;
};

/// Parses CSV with header `i,j,psi,phi`; values are integers, p/q or decimals.
KernelTable parseKernelCsv(const std::string& text);
std::string writeKernelCsv(const KernelTable& table);

/// psi(i,j) = a(i+j) + b with Gibbs fragmentation determined by phi(1,1) and weight parameters.
struct SolvableKernel {
  Rational a;
  Rational b;
  Rational phi11;
  /// Weight parameters for the fragmentation rule when they are not the coagulation (a, b),
  /// e.g. pure fragmentation (a = b = 0).
  std::optional<std::pair<Rational, Rational>> splitWeights;

  /// Requires a >= 0, 2a + b >= 0, phi11 >= 0; throws DomainError.
  void validate() const;
  /// 2a + b == 0: psi(1,1) vanishes and the coagulation weights degenerate.
  bool boundaryCase() const { return 2 * a + b == 0; }
  bool hasCoagulation() const { return a != 0 || b != 0; }
  bool hasFragmentation() const { return phi11 != 0; }

  Rational psi(int i, int j) const { return a * (i + j) + b; }
  /// Death rate mu_{r,N} = (r-1)(2aN + rb)/2 for 2 <= r <= N, zero for r = 1.
  Rational deathRate(int n, int r) const;
  /// Birth rate lambda_{r,N} = phi11 (N - r) for 1 <= r <= N-1, zero for r = N.
  Rational birthRate(int n, int r) const;

  /// Parameters (a', b') of the weights driving the fragmentation rule.
  /// Throws DomainError when fragmentation is active but no admissible weights exist.
  std::pair<Rational, Rational> weightParameters() const;

  /// Kernel whose phi is the Gibbs fragmentation rate, tabulated for block sizes up to maxSize.
  Kernel toKernel(int maxSize) const;

  std::string label() const;
};

/// Parses "a,b,phi11".
SolvableKernel parseSolvable(const std::string& text);

/// State transition rate of a single move: n_i n_j psi, n_i(n_i-1)/2 psi(i,i), or n_{i+j} phi.
Rational stateRate(const Kernel& k, const Move& m);

struct RateSummary {
  Rational coagTotal;
  Rational fragTotal;
};

RateSummary rateSummary(const Kernel& k, const Partition& eta);

struct HomogeneityWitness {
  int r;
  bool coagulation;  // false: the fragmentation total differs
  Partition reference;
  Partition other;
  Rational referenceValue;
  Rational otherValue;
};

struct LevelHomogeneity {
  int r;
  bool coagConstant;
  bool fragConstant;
  Rational coagTotal;  // value at the first state of the level
  Rational fragTotal;
  std::size_t violations;  // full count, witnesses may be truncated
};

struct HomogeneityReport {
  int n;
  bool homogeneous;
  std::vector<LevelHomogeneity> levels;  // r = 1..N
  std::vector<HomogeneityWitness> witnesses;
  std::size_t totalViolations;
};

inline constexpr std::size_t kWitnessCapPerLevel = 100;

/// Compares total coagulation and fragmentation outflow of every state to the first state of
/// its level. Exact comparison.
HomogeneityReport checkHomogeneity(const Kernel& k, int n);

}  // namespace cfp
