#include "cfp/birth_death.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace cfp {

SparseGenerator chainGenerator(const BirthDeathChain<double>& c) {
  std::vector<Eigen::Triplet<double>> t;
  for (int r = 1; r <= c.n; ++r) {
    int row = r - 1;
    double out = 0.0;
    if (r < c.n && c.lambda(r) != 0) {
      t.emplace_back(row, row + 1, c.lambda(r));
      out += c.lambda(r);
    }
    if (r > 1 && c.mu(r) != 0) {
      t.emplace_back(row, row - 1, c.mu(r));
      out += c.mu(r);
    }
    if (out != 0) t.emplace_back(row, row, -out);
  }
  SparseGenerator q(c.n, c.n);
  q.setFromTriplets(t.begin(), t.end());
  q.makeCompressed();
  return q;
}

std::vector<Eigen::VectorXd> marginalEvolve(const BirthDeathChain<double>& c, const Eigen::VectorXd& initial,
                                            std::span<const double> times, const PropagationOptions& options) {
  if (initial.size() != c.n) throw ValidationError("initial level distribution must have N entries");
  return propagate(chainGenerator(c), initial, times, options);
}

Eigen::VectorXd chainStationary(const BirthDeathChain<double>& c) {
  if (!isErgodic(c)) throw DomainError("stationary law needs an ergodic chain");
  // Work in logs; products of rate ratios overflow for moderate N.
  Eigen::VectorXd logPi(c.n);
  logPi[0] = 0.0;
  for (int r = 1; r < c.n; ++r) logPi[r] = logPi[r - 1] + std::log(c.lambda(r)) - std::log(c.mu(r + 1));
  double top = logPi.maxCoeff();
  Eigen::VectorXd pi = (logPi.array() - top).exp();
  return pi / pi.sum();
}

ZeifmanSearch zeifmanOptimize(const BirthDeathChain<double>& c, int maxSweeps, double spreadTol) {
  const int n = c.n;
  if (!isErgodic(c)) throw DomainError("Zeifman search needs an ergodic chain");
  std::vector<double> deltas(static_cast<std::size_t>(std::max(n - 2, 0)), 1.0);
  auto alphas = [&]() { return zeifmanAlphas<double>(c, std::span<const double>(deltas)); };
  ZeifmanResult<double> best = alphas();
  int sweep = 0;
  for (; sweep < maxSweeps && best.max - best.min > spreadTol * std::max(1.0, std::abs(best.max)); ++sweep) {
    for (int r = 2; r <= n - 1; ++r) {
      // alpha_{r-1} = A - delta_r lambda_r and alpha_r = B - mu_r / delta_r, other terms fixed.
      double& d = deltas[static_cast<std::size_t>(r - 2)];
      auto current = alphas();
      double A = current.alphas[static_cast<std::size_t>(r - 2)] + d * c.lambda(r);
      double B = current.alphas[static_cast<std::size_t>(r - 1)] + c.mu(r) / d;
      double diff = A - B;
      d = (diff + std::sqrt(diff * diff + 4.0 * c.lambda(r) * c.mu(r))) / (2.0 * c.lambda(r));
    }
    best = alphas();
  }
  return {deltas, best, sweep};
}

GapReport spectralGap(const BirthDeathChain<double>& c, bool optimize) {
  if (c.n < 2) throw DomainError("spectral gap needs N >= 2");
  if (!isErgodic(c)) throw DomainError("spectral gap needs an ergodic chain (lambda_r > 0 for r < N, mu_r > 0 for r >= 2)");
  // Similar symmetric tridiagonal matrix via the stationary measure.
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(c.n, c.n);
  for (int r = 1; r <= c.n; ++r) {
    s(r - 1, r - 1) = -(c.lambda(r) + c.mu(r));
    if (r < c.n) {
      double off = std::sqrt(c.lambda(r) * c.mu(r + 1));
      s(r - 1, r) = off;
      s(r, r - 1) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw SolverError("spectral gap: eigen solve failed");
  const Eigen::VectorXd& ev = solver.eigenvalues();  // ascending, the largest is ~0
  GapReport rep{};
  rep.numericalGap = -ev[c.n - 2];
  auto unit = zeifmanUnitAlphas<double>(c);
  rep.lower = unit.min;
  rep.upper = unit.max;
  if (optimize) rep.optimized = zeifmanOptimize(c);
  rep.withinBounds = rep.lower - kGapBoundSlack <= rep.numericalGap && rep.numericalGap <= rep.upper + kGapBoundSlack;
  return rep;
}

GapReport spectralGap(const SolvableKernel& k, int n, bool optimize) {
  GapReport rep = spectralGap(buildChain<Rational>(k, n).toDoubleChain(), optimize);
  if (k.b == 0) {
    double exact = toDouble(k.phi11 + k.a * n);
    rep.exact = exact;
    if (std::abs(rep.numericalGap - exact) >= kGapBoundSlack) {
      std::ostringstream os;
      os.precision(17);
      os << "numerical gap " << rep.numericalGap << " misses the exact value " << exact;
      throw SolverError(os.str());
    }
  }
  return rep;
}

Eigen::VectorXcd chainEigenvalues(const BirthDeathChain<double>& c) {
  Eigen::MatrixXd q = Eigen::MatrixXd(chainGenerator(c));
  Eigen::EigenSolver<Eigen::MatrixXd> solver(q, false);
  if (solver.info() != Eigen::Success) throw SolverError("chain eigenvalues: eigen solve failed");
  return solver.eigenvalues();
}

GapComparison compareWithProcess(const Generator& g, const BirthDeathChain<double>& c) {
  Eigen::MatrixXd q = Eigen::MatrixXd(g.matrix());
  Eigen::EigenSolver<Eigen::MatrixXd> solver(q, false);
  if (solver.info() != Eigen::Success) throw SolverError("process eigenvalues: eigen solve failed");
  Eigen::VectorXd re = (-solver.eigenvalues().real()).eval();
  std::sort(re.data(), re.data() + re.size());
  double scale = std::max(1.0, re.cwiseAbs().maxCoeff());
  double processGap = 0.0;
  for (Eigen::Index i = 0; i < re.size(); ++i)
    if (re[i] > 1e-9 * scale) {
      processGap = re[i];
      break;
    }
  double chainGap = spectralGap(c, false).numericalGap;
  return {processGap, chainGap, processGap - chainGap, processGap < chainGap - 1e-6};
}

}  // namespace cfp
