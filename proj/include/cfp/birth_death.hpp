#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "cfp/ctmc.hpp"
#include "cfp/errors.hpp"
#include "cfp/exact.hpp"
#include "cfp/kernels.hpp"
#include "cfp/rational.hpp"

namespace cfp {

namespace detail {
inline double scalarToDouble(const Rational& q) { return toDouble(q); }
inline double scalarToDouble(double x) { return x; }
}  // namespace detail

/// Block-count chain on 1..N with lambda_N = mu_1 = 0.
template <class Scalar>
struct BirthDeathChain {
  int n = 0;
  std::vector<Scalar> birth;  // birth[r-1] = lambda_r
  std::vector<Scalar> death;  // death[r-1] = mu_r

  const Scalar& lambda(int r) const { return birth.at(static_cast<std::size_t>(r - 1)); }
  const Scalar& mu(int r) const { return death.at(static_cast<std::size_t>(r - 1)); }

  BirthDeathChain<double> toDoubleChain() const {
    BirthDeathChain<double> out{n, {}, {}};
    for (const auto& x : birth) out.birth.push_back(detail::scalarToDouble(x));
    for (const auto& x : death) out.death.push_back(detail::scalarToDouble(x));
    return out;
  }
};

/// lambda_{r,N} = phi11 (N - r), mu_{r,N} = (r-1)(2aN + rb)/2.
template <class Scalar = Rational>
BirthDeathChain<Scalar> buildChain(const SolvableKernel& k, int n) {
  k.validate();
  if (n < 1) throw DomainError("chain requires N >= 1");
  BirthDeathChain<Scalar> chain{n, {}, {}};
  for (int r = 1; r <= n; ++r) {
    if constexpr (std::is_same_v<Scalar, Rational>) {
      chain.birth.push_back(k.birthRate(n, r));
      chain.death.push_back(k.deathRate(n, r));
    } else {
      chain.birth.push_back(static_cast<Scalar>(toDouble(k.birthRate(n, r))));
      chain.death.push_back(static_cast<Scalar>(toDouble(k.deathRate(n, r))));
    }
  }
  return chain;
}

template <class Scalar>
bool isErgodic(const BirthDeathChain<Scalar>& c) {
  for (int r = 1; r < c.n; ++r)
    if (!(c.lambda(r) > 0) || !(c.mu(r + 1) > 0)) return false;
  return true;
}

SparseGenerator chainGenerator(const BirthDeathChain<double>& c);

/// Level marginals b(r; t), indexed r-1, for an initial level distribution.
std::vector<Eigen::VectorXd> marginalEvolve(const BirthDeathChain<double>& c, const Eigen::VectorXd& initial,
                                            std::span<const double> times, const PropagationOptions& options = {});

/// Stationary law of an ergodic chain from the product of lambda_r / mu_{r+1}.
Eigen::VectorXd chainStationary(const BirthDeathChain<double>& c);

template <class Scalar>
struct ZeifmanResult {
  std::vector<Scalar> alphas;  // alpha_1..alpha_{N-1}
  Scalar min;
  Scalar max;
};

/// alpha_r = lambda_r + mu_{r+1} - delta_{r+1} lambda_{r+1} - mu_r / delta_r for r = 1..N-1, with
/// deltas = (delta_2, ..., delta_{N-1}); the delta_1 and delta_N terms vanish with mu_1 = lambda_N = 0.
template <class Scalar>
ZeifmanResult<Scalar> zeifmanAlphas(const BirthDeathChain<Scalar>& c, std::span<const Scalar> deltas) {
  const int n = c.n;
  if (n < 2) throw DomainError("Zeifman bounds need N >= 2");
  if (static_cast<int>(deltas.size()) != n - 2) throw DomainError("expected N-2 deltas (delta_2..delta_{N-1})");
  for (const auto& d : deltas)
    if (!(d > 0)) throw DomainError("Zeifman deltas must be positive");
  auto delta = [&](int r) -> const Scalar& { return deltas[static_cast<std::size_t>(r - 2)]; };
  ZeifmanResult<Scalar> out{{}, Scalar(0), Scalar(0)};
  for (int r = 1; r <= n - 1; ++r) {
    Scalar alpha = c.lambda(r) + c.mu(r + 1);
    if (r + 1 <= n - 1) alpha -= delta(r + 1) * c.lambda(r + 1);
    if (r >= 2) alpha -= c.mu(r) / delta(r);
    out.alphas.push_back(alpha);
  }
  out.min = out.alphas.front();
  out.max = out.alphas.front();
  for (const auto& x : out.alphas) {
    if (x < out.min) out.min = x;
    if (out.max < x) out.max = x;
  }
  return out;
}

/// delta = 1 everywhere.
template <class Scalar>
ZeifmanResult<Scalar> zeifmanUnitAlphas(const BirthDeathChain<Scalar>& c) {
  std::vector<Scalar> ones(static_cast<std::size_t>(std::max(c.n - 2, 0)), Scalar(1));
  return zeifmanAlphas<Scalar>(c, std::span<const Scalar>(ones));
}

struct ZeifmanSearch {
  std::vector<double> deltas;
  ZeifmanResult<double> result;
  int sweeps;
};

/// Coordinate ascent on min alpha_r: each delta_r is set where alpha_{r-1} and alpha_r meet.
/// Heuristic; the spread max - min shrinks toward zero as the sweep converges.
ZeifmanSearch zeifmanOptimize(const BirthDeathChain<double>& c, int maxSweeps = 2000, double spreadTol = 1e-10);

inline constexpr double kGapBoundSlack = 1e-8;

struct GapReport {
  double numericalGap;
  double lower;  // delta = 1 bounds
  double upper;
  std::optional<double> exact;  // phi11 + aN when b = 0
  std::optional<ZeifmanSearch> optimized;
  bool withinBounds;
};

/// Throws DomainError for a non-ergodic chain.
GapReport spectralGap(const BirthDeathChain<double>& c, bool optimize = true);
/// Adds the exact value for b = 0 and throws SolverError if the numerics miss it by 1e-8.
GapReport spectralGap(const SolvableKernel& k, int n, bool optimize = true);

/// All eigenvalues of the chain generator from a dense nonsymmetric solve.
Eigen::VectorXcd chainEigenvalues(const BirthDeathChain<double>& c);

struct GapComparison {
  double processGap;  // smallest nonzero -Re(eigenvalue) of the full generator
  double chainGap;
  double difference;  // processGap - chainGap
  bool processBelowChain;  // processGap < chainGap - 1e-6
};

/// Relaxation rate of the full process on Omega_N against the block-count chain's gap.
GapComparison compareWithProcess(const Generator& g, const BirthDeathChain<double>& c);

}  // namespace cfp
