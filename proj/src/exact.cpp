#include "cfp/exact.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "cfp/errors.hpp"

namespace cfp {

Generator::Generator(const Kernel& k, int n, int maxN) : space_(std::make_shared<const StateSpace>(n, maxN)) {
  k.validate(n);
  const StateSpace& space = *space_;
  exit_.assign(space.size(), Rational(0));
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t s = 0; s < space.size(); ++s) {
    for (const Move& m : moves(space[s])) {
      Rational rate = stateRate(k, m);
      if (rate == 0) continue;
      std::size_t to = space.indexOf(m.target);
      exit_[s] += rate;
      triplets.emplace_back(static_cast<int>(s), static_cast<int>(to), toDouble(rate));
      transitions_.push_back({s, to, m.kind, std::move(rate)});
    }
    // The diagonal is the exact negated row sum, so rows balance before conversion.
    if (exit_[s] != 0) triplets.emplace_back(static_cast<int>(s), static_cast<int>(s), -toDouble(exit_[s]));
  }
  matrix_.resize(static_cast<Eigen::Index>(space.size()), static_cast<Eigen::Index>(space.size()));
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();
}

bool Generator::irreducible() const {
  const std::size_t count = size();
  if (count <= 1) return true;
  std::vector<std::vector<std::size_t>> forward(count), backward(count);
  for (const auto& t : transitions_) {
    forward[t.from].push_back(t.to);
    backward[t.to].push_back(t.from);
  }
  auto reachesAll = [count](const std::vector<std::vector<std::size_t>>& adj) {
    std::vector<char> seen(count, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!queue.empty()) {
      std::size_t s = queue.front();
      queue.pop_front();
      for (std::size_t t : adj[s])
        if (!seen[t]) {
          seen[t] = 1;
          ++visited;
          queue.push_back(t);
        }
    }
    return visited == count;
  };
  return reachesAll(forward) && reachesAll(backward);
}

std::vector<std::size_t> Generator::absorbingStates() const {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < size(); ++s)
    if (exit_[s] == 0) out.push_back(s);
  return out;
}

Generator buildGenerator(const Kernel& k, int n, int maxN) { return Generator(k, n, maxN); }

DistributionVector pointDistribution(const StateSpace& space, const Partition& eta) {
  DistributionVector d{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.size()))};
  d.probs[static_cast<Eigen::Index>(space.indexOf(eta))] = 1.0;
  return d;
}

DistributionVector gibbsMixture(const StateSpace& space, const GibbsModel& model, std::span<const double> levelMass) {
  if (model.n() != space.n()) throw DomainError("Gibbs model and state space differ in N");
  if (static_cast<int>(levelMass.size()) != space.n()) throw ValidationError("need one level mass per r = 1..N");
  DistributionVector d{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.size()))};
  for (int r = 1; r <= space.n(); ++r) {
    const LevelDistribution& level = model.level(r);
    for (std::size_t k = 0; k < level.states.size(); ++k)
      d.probs[static_cast<Eigen::Index>(space.indexOf(level.states[k]))] =
          levelMass[static_cast<std::size_t>(r - 1)] * toDouble(level.probs[k]);
  }
  validateDistribution(d.probs);
  return d;
}

std::vector<DistributionVector> evolve(const Generator& g, const DistributionVector& initial,
                                       std::span<const double> times, const PropagationOptions& options) {
  if (initial.t != 0.0) throw ValidationError("initial distribution must be given at t = 0");
  auto probs = propagate(g.matrix(), initial.probs, times, options);
  std::vector<DistributionVector> out;
  out.reserve(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) out.push_back({times[k], std::move(probs[k])});
  return out;
}

ConditionalSnapshot conditionalSnapshot(const StateSpace& space, const DistributionVector& d) {
  if (d.probs.size() != static_cast<Eigen::Index>(space.size())) throw ValidationError("distribution size mismatch");
  ConditionalSnapshot snap;
  snap.t = d.t;
  for (int r = 1; r <= space.n(); ++r) {
    auto [first, last] = space.levelRange(r);
    auto len = static_cast<Eigen::Index>(last - first);
    Eigen::VectorXd slice = d.probs.segment(static_cast<Eigen::Index>(first), len);
    double mass = slice.sum();
    snap.levelMass.push_back(mass);
    if (mass > kAbsentLevelMass)
      snap.conditional.emplace_back(slice / mass);
    else
      snap.conditional.emplace_back(std::nullopt);
  }
  return snap;
}

namespace {

Eigen::VectorXd nullVector(const SparseGenerator& q) {
  const Eigen::Index n = q.rows();
  if (n == 1) return Eigen::VectorXd::Ones(1);
  // Solve Q^T pi = 0 with the last equation replaced by sum(pi) = 1.
  Eigen::SparseMatrix<double> a = Eigen::SparseMatrix<double>(q.transpose());
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it)
      if (it.row() != n - 1) triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (Eigen::Index c = 0; c < n; ++c) triplets.emplace_back(static_cast<int>(n - 1), static_cast<int>(c), 1.0);
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success) throw SolverError("stationary solve: factorization failed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  Eigen::VectorXd x = lu.solve(rhs);
  // One step of iterative refinement.
  Eigen::VectorXd residual = rhs - system * x;
  x += lu.solve(residual);
  if (!x.allFinite()) throw SolverError("stationary solve produced non-finite values");
  return x;
}

}  // namespace

StationaryResult stationaryMeasure(const Generator& g) {
  StationaryResult result;
  if (!g.irreducible()) {
    result.ergodic = false;
    for (std::size_t s : g.absorbingStates()) result.absorbing.push_back(g.states()[s]);
    return result;
  }
  result.ergodic = true;
  result.measure = DistributionVector{std::numeric_limits<double>::infinity(), nullVector(g.matrix())};
  return result;
}

std::optional<std::vector<Rational>> closedFormInvariantWeights(const StateSpace& space, const SolvableKernel& k) {
  k.validate();
  if (!k.hasCoagulation() || !k.hasFragmentation() || k.boundaryCase()) return std::nullopt;
  if (k.splitWeights && *k.splitWeights != std::make_pair(k.a, k.b)) return std::nullopt;
  WeightSequence w = weightsClosedForm(k.a, k.b, space.n());
  std::vector<Rational> scaled;
  // psi/phi = c_{i+j} / (c_i c_j) with c_k = phi11 a_k, from phi = phi11 a_i a_j psi / a_{i+j}.
  for (const auto& v : w.values) scaled.push_back(v * k.phi11);
  std::vector<Rational> out;
  out.reserve(space.size());
  for (const auto& eta : space.states()) out.push_back(gibbsWeight(eta, scaled));
  return out;
}

StationaryResult stationaryMeasure(const Generator& g, const SolvableKernel& k) {
  StationaryResult result = stationaryMeasure(g);
  auto weights = closedFormInvariantWeights(g.states(), k);
  if (!weights) return result;
  Rational c = 0;
  for (const auto& w : *weights) c += w;
  result.partitionFunction = c;
  for (auto& w : *weights) w /= c;
  result.closedForm = std::move(weights);
  if (result.measure) {
    double worst = 0.0;
    for (std::size_t s = 0; s < g.size(); ++s)
      worst = std::max(worst, std::abs(result.measure->probs[static_cast<Eigen::Index>(s)] - toDouble((*result.closedForm)[s])));
    result.maxDeviation = worst;
    if (worst > kStationaryAgreement) {
      std::ostringstream os;
      os << "stationary measure deviates from the closed form by " << worst;
      throw SolverError(os.str());
    }
  }
  return result;
}

namespace {

// log C with a_k ~ const * C^k * k^alpha.
long double logGrowth(long double a, long double b) {
  if (a == 0) return std::log(b / 2);
  if (b == 0) return std::log(a) + 1;
  long double c = 2 * a / b;
  if (b > 0) return std::log(b / 2) + (c + 1) * std::log(c + 1) - c * std::log(c);
  long double d = -c;  // d > 1 since 2a + b > 0
  return std::log(-b / 2) + d * std::log(d) - (d - 1) * std::log(d - 1);
}

}  // namespace

AsymptoticsReport weightAsymptotics(const Rational& a, const Rational& b, int count) {
  if (a < 0 || 2 * a + b <= 0) throw DomainError("asymptotics require a >= 0 and 2a + b > 0");
  if (count < 2 || count > kMaxAsymptoticsK) throw DomainError("asymptotics: K must lie in 2..400");
  const long double la = toDouble(a), lb = toDouble(b);
  AsymptoticsReport rep{a, b, a > 0 ? WeightClass::Convergent : WeightClass::Expansive, a > 0 ? -1.5 : 0.0,
                        static_cast<double>(std::exp(logGrowth(la, lb))), 0.0, false, {}};
  const long double logC = logGrowth(la, lb);
  std::vector<long double> logW(static_cast<std::size_t>(count) + 2, 0.0L);
  for (int k = 2; k <= count + 1; ++k) {
    long double s = 0;
    for (int r = 2; r <= k; ++r) s += std::log((k * la + lb * r / 2) / r);
    logW[static_cast<std::size_t>(k)] = s;
  }
  auto rescaled = [&](int k) {
    // log of a_k / C^k (times (b/2) when a = 0, which leaves a constant).
    return logW[static_cast<std::size_t>(k)] - k * logC;
  };
  for (int k = 1; k <= count; ++k) {
    long double lw = logW[static_cast<std::size_t>(k)];
    double w = static_cast<double>(std::exp(lw));
    if (!std::isfinite(w)) rep.logDomain = true;
    double ratio = static_cast<double>(std::exp(logW[static_cast<std::size_t>(k) + 1] - lw));
    double normalized = a == 0 ? static_cast<double>(std::exp(lw - (k - 1) * std::log(lb / 2)))
                               : static_cast<double>(std::exp(rescaled(k) + 1.5L * std::log(static_cast<long double>(k))));
    rep.rows.push_back({k, static_cast<double>(lw), w, ratio, normalized});
  }
  int half = std::max(1, count / 2);
  rep.estimatedAlpha = static_cast<double>((rescaled(count) - rescaled(half)) /
                                           std::log(static_cast<long double>(count) / half));
  return rep;
}

}  // namespace cfp
