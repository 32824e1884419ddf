#include "cfp/gibbs.hpp"

#include <algorithm>
#include <stdexcept>

#include "cfp/errors.hpp"

namespace cfp {

namespace {

void checkWeightDomain(const Rational& a, const Rational& b, int count) {
  if (a < 0) throw DomainError("weights require a >= 0");
  if (2 * a + b <= 0) throw DomainError("weights require 2a + b > 0");
  if (count < 1) throw DomainError("weight count must be at least 1");
}

Rational factorialOf(int n) { return factorial(static_cast<unsigned>(n)); }

}  // namespace

WeightSequence weightsClosedForm(const Rational& a, const Rational& b, int count) {
  checkWeightDomain(a, b, count);
  WeightSequence w{a, b, {}};
  w.values.reserve(static_cast<std::size_t>(count));
  for (int k = 1; k <= count; ++k) w.values.push_back(closedFormWeight<Rational>(a, b, k));
  return w;
}

WeightSequence weightsRecursion(const Rational& a, const Rational& b, int count) {
  checkWeightDomain(a, b, count);
  WeightSequence w{a, b, {Rational(1)}};
  w.values.reserve(static_cast<std::size_t>(count));
  for (int k = 2; k <= count; ++k) {
    Rational conv = 0;
    for (int i = 1; i < k; ++i) conv += w[i] * w[k - i];
    Rational next = (a * k + b) * conv / (2 * (k - 1));
    w.values.push_back(next);
  }
  return w;
}

WeightSequence solvableWeights(const Rational& a, const Rational& b, int count) {
  WeightSequence closed = weightsClosedForm(a, b, count);
  WeightSequence recursive = weightsRecursion(a, b, count);
  for (int k = 1; k <= count; ++k)
    if (closed[k] != recursive[k])
      throw std::logic_error("closed-form and recursive weights disagree at k=" + std::to_string(k));
  return closed;
}

Rational gibbsWeight(const Partition& eta, std::span<const Rational> weights) {
  if (static_cast<int>(weights.size()) < eta.largestBlock())
    throw DomainError("weight table shorter than the largest block");
  Rational w = 1;
  for (int k = 1; k <= eta.n(); ++k) {
    int c = eta.count(k);
    if (c == 0) continue;
    w *= power(weights[static_cast<std::size_t>(k - 1)], static_cast<unsigned>(c));
    w /= factorialOf(c);
  }
  return w;
}

Rational bellDirect(std::span<const Rational> weights, int n, int r) {
  Rational sum = 0;
  for (const Partition& eta : levelSlice(n, r)) sum += gibbsWeight(eta, weights);
  return sum;
}

Rational bellProduct(const Rational& a, const Rational& b, int n, int r) {
  if (r < 1 || r > n) throw DomainError("bellProduct: r must lie in 1..N");
  SolvableKernel k{a, b, 0, std::nullopt};
  Rational prod = 1;
  for (int l = r + 1; l <= n; ++l) prod *= k.deathRate(n, l);
  return prod / (factorialOf(n) * factorialOf(n - r));
}

Rational LevelDistribution::at(const Partition& eta) const {
  auto it = std::find(states.begin(), states.end(), eta);
  if (it == states.end()) return 0;
  return probs[static_cast<std::size_t>(it - states.begin())];
}

Rational LevelDistribution::total() const {
  Rational s = 0;
  for (const auto& p : probs) s += p;
  return s;
}

LevelDistribution pointMass(const Partition& eta) {
  LevelDistribution d{eta.n(), eta.blockCount(), levelSlice(eta.n(), eta.blockCount()), {}};
  for (const auto& s : d.states) d.probs.emplace_back(s == eta ? 1 : 0);
  return d;
}

GibbsModel::GibbsModel(int n, std::vector<Rational> weights,
                       std::optional<std::pair<Rational, Rational>> params)
    : n_(n), weights_(std::move(weights)), parameters_(std::move(params)) {
  if (n < 1) throw DomainError("Gibbs model requires N >= 1");
  if (static_cast<int>(weights_.size()) < n) throw DomainError("Gibbs model needs weights a_1..a_N");
  weights_.resize(static_cast<std::size_t>(n));
  for (const auto& w : weights_)
    if (w <= 0) throw DomainError("Gibbs weights must be positive");
  StateSpace space(n);
  for (int r = 1; r <= n; ++r) {
    auto [first, last] = space.levelRange(r);
    LevelDistribution level{n, r, {}, {}};
    Rational bell = 0;
    for (std::size_t s = first; s < last; ++s) {
      level.states.push_back(space[s]);
      level.probs.push_back(gibbsWeight(space[s], weights_));
      bell += level.probs.back();
    }
    for (auto& p : level.probs) p /= bell;
    bell_.push_back(bell);
    levels_.push_back(std::move(level));
  }
}

GibbsModel::GibbsModel(int n, WeightSequence weights)
    : GibbsModel(n, std::move(weights.values), std::make_pair(weights.a, weights.b)) {}

GibbsModel GibbsModel::fromWeights(int n, std::vector<Rational> weights) {
  return GibbsModel(n, std::move(weights), std::nullopt);
}

GibbsModel GibbsModel::solvable(int n, const Rational& a, const Rational& b) {
  return GibbsModel(n, solvableWeights(a, b, n));
}

const Rational& GibbsModel::bell(int r) const {
  if (r < 1 || r > n_) throw DomainError("bell: r must lie in 1..N");
  return bell_[static_cast<std::size_t>(r - 1)];
}

const LevelDistribution& GibbsModel::level(int r) const {
  if (r < 1 || r > n_) throw DomainError("level: r must lie in 1..N");
  return levels_[static_cast<std::size_t>(r - 1)];
}

LevelDistribution rhoLevel(const GibbsModel& model, int r) { return model.level(r); }

namespace {

Rational coagulationRate(const SolvableKernel& k, const Move& m) {
  Kernel psiOnly([&k](int i, int j) { return k.psi(i, j); }, [](int, int) { return Rational(0); });
  return stateRate(psiOnly, m);
}

void requireValid(const Move& m, MoveKind kind, const char* what) {
  if (m.kind != kind) throw DomainError(std::string(what) + ": wrong move direction");
  if (!isValidMove(m.kind, m.i, m.j, m.source) || applyMove(m.kind, m.i, m.j, m.source) != m.target)
    throw DomainError(std::string(what) + ": move is not valid from its source");
}

}  // namespace

Rational coagWalkProb(const SolvableKernel& k, const Move& m) {
  requireValid(m, MoveKind::Coagulate, "coagWalkProb");
  Rational mu = k.deathRate(m.source.n(), m.source.blockCount());
  if (mu == 0) throw DomainError("coagWalkProb: death rate vanishes (no coagulation)");
  return coagulationRate(k, m) / mu;
}

Rational fragRate(const SolvableKernel& k, const WeightSequence& weights, const Move& m) {
  requireValid(m, MoveKind::Fragment, "fragRate");
  const int i = m.i, j = m.j, s = i + j;
  if (weights.size() < s) throw DomainError("fragRate: weight table too short");
  const Rational n = m.source.count(s);
  if (i == j) return k.phi11 * weights[i] * weights[i] * n / (2 * weights[s]) * (2 * weights.a * i + weights.b);
  return k.phi11 * weights[i] * weights[j] * n / weights[s] * (weights.a * s + weights.b);
}

Rational fragWalkProb(const WeightSequence& weights, const Move& m) {
  requireValid(m, MoveKind::Fragment, "fragWalkProb");
  const Partition& eta = m.source;
  const int i = m.i, j = m.j, s = i + j;
  if (weights.size() < s) throw DomainError("fragWalkProb: weight table too short");
  Rational half = 0;
  for (int l = 1; l < s; ++l) half += weights[l] * weights[s - l];
  half /= 2;
  Rational selection = ratio((s - 1) * eta.count(s), eta.n() - eta.blockCount());
  Rational split = i == j ? Rational(weights[i] * weights[i] / 2) : Rational(weights[i] * weights[j]);
  split /= half;
  return selection * split;
}

namespace {

WalkTable buildWalk(int n, MoveKind direction, const std::function<Rational(const Move&)>& weightOf,
                    bool normalize) {
  auto space = std::make_shared<const StateSpace>(n);
  WalkTable walk{direction, space, {}};
  walk.rows.resize(space->size());
  for (std::size_t s = 0; s < space->size(); ++s) {
    Rational total = 0;
    auto& row = walk.rows[s];
    for (const Move& m : moves((*space)[s])) {
      if (m.kind != direction) continue;
      Rational w = weightOf(m);
      if (w == 0) continue;
      row.emplace_back(space->indexOf(m.target), w);
      total += w;
    }
    if (normalize && total != 0)
      for (auto& entry : row) entry.second /= total;
  }
  return walk;
}

std::vector<LevelDistribution> pushForward(const WalkTable& walk, MoveKind expected, const Partition& start) {
  if (walk.direction != expected) throw ValidationError("walk table has the wrong direction");
  const StateSpace& space = *walk.space;
  const int n = space.n();
  const bool frag = expected == MoveKind::Fragment;
  // Every row that must move (levels below N for fragmentation, above 1 for coagulation).
  for (std::size_t s = 0; s < space.size(); ++s) {
    int r = space.levelOf(s);
    bool mustMove = frag ? r < n : r > 1;
    const auto& row = walk.rows[s];
    if (!mustMove) {
      if (!row.empty()) throw ValidationError("walk row leaves a terminal level");
      continue;
    }
    Rational total = 0;
    for (const auto& [to, p] : row) {
      if (p < 0) throw ValidationError("negative walk probability");
      if (space.levelOf(to) != r + (frag ? 1 : -1)) throw ValidationError("walk step is not nearest-neighbour");
      total += p;
    }
    if (total != 1)
      throw ValidationError("walk row for " + toCompactString(space[s]) + " sums to " + toString(total));
  }

  std::vector<Rational> mass(space.size(), Rational(0));
  mass[space.indexOf(start)] = 1;
  std::vector<LevelDistribution> levels(static_cast<std::size_t>(n));
  auto capture = [&](int r) {
    auto [first, last] = space.levelRange(r);
    LevelDistribution d{n, r, {}, {}};
    for (std::size_t s = first; s < last; ++s) {
      d.states.push_back(space[s]);
      d.probs.push_back(mass[s]);
    }
    levels[static_cast<std::size_t>(r - 1)] = std::move(d);
  };
  int r = start.blockCount();
  capture(r);
  for (int step = 1; step < n; ++step) {
    auto [first, last] = space.levelRange(r);
    for (std::size_t s = first; s < last; ++s) {
      if (mass[s] == 0) continue;
      for (const auto& [to, p] : walk.rows[s]) mass[to] += mass[s] * p;
      mass[s] = 0;
    }
    r += frag ? 1 : -1;
    capture(r);
  }
  return levels;
}

}  // namespace

WalkTable fragmentationWalk(const Kernel& k, int n) {
  k.validate(n);
  return buildWalk(n, MoveKind::Fragment, [&k](const Move& m) { return stateRate(k, m); }, true);
}

WalkTable coagulationWalk(const Kernel& k, int n) {
  k.validate(n);
  return buildWalk(n, MoveKind::Coagulate, [&k](const Move& m) { return stateRate(k, m); }, true);
}

WalkTable gibbsFragmentationWalk(const WeightSequence& weights, int n) {
  return buildWalk(n, MoveKind::Fragment, [&weights](const Move& m) { return fragWalkProb(weights, m); }, false);
}

std::vector<LevelDistribution> fragWalkSolve(const WalkTable& walk) {
  return pushForward(walk, MoveKind::Fragment, Partition::singleBlock(walk.space->n()));
}

std::vector<LevelDistribution> coagWalkSolve(const WalkTable& walk) {
  return pushForward(walk, MoveKind::Coagulate, Partition::singletons(walk.space->n()));
}

namespace {

struct LevelRates {
  std::vector<Rational> death;  // index r-1
  std::vector<Rational> birth;
};

LevelRates summedRates(const Kernel& k, int n) {
  HomogeneityReport h = checkHomogeneity(k, n);
  if (!h.homogeneous) throw DomainError("fixed-point systems need level-constant outflow rates");
  LevelRates rates;
  for (const auto& level : h.levels) {
    rates.death.push_back(level.coagTotal);
    rates.birth.push_back(level.fragTotal);
  }
  return rates;
}

void checkLevels(const std::vector<LevelDistribution>& levels, int n) {
  if (static_cast<int>(levels.size()) != n) throw DomainError("need one level distribution per r = 1..N");
  for (int r = 1; r <= n; ++r) {
    const auto& d = levels[static_cast<std::size_t>(r - 1)];
    if (d.n != n || d.r != r || d.states.size() != d.probs.size())
      throw DomainError("level distributions must be ordered r = 1..N");
  }
}

FixedPointReport verifySystems(const std::vector<LevelDistribution>& levels, const Kernel& k,
                               const LevelRates& rates) {
  const int n = levels.empty() ? 0 : levels.front().n;
  FixedPointReport report;
  report.n = n;
  auto rho = [&](const Partition& p) { return levels[static_cast<std::size_t>(p.blockCount() - 1)].at(p); };
  bool anyDeath = std::any_of(rates.death.begin(), rates.death.end(), [](const Rational& x) { return x != 0; });
  bool anyBirth = std::any_of(rates.birth.begin(), rates.birth.end(), [](const Rational& x) { return x != 0; });
  report.eq1Applicable = anyDeath;
  report.eq2Applicable = anyBirth;

  for (int r = 1; r < n; ++r) {
    const Rational& mu = rates.death[static_cast<std::size_t>(r)];       // mu_{r+1}
    const Rational& lambda = rates.birth[static_cast<std::size_t>(r - 1)];  // lambda_r
    if (anyDeath) {
      for (const Partition& eta : levels[static_cast<std::size_t>(r - 1)].states) {
        Rational rhs = 0;
        for (const Move& f : moves(eta)) {
          if (f.kind != MoveKind::Fragment) continue;
          rhs += rho(f.target) * stateRate(k, makeMove(MoveKind::Coagulate, f.i, f.j, f.target));
        }
        Rational lhs = mu * rho(eta);
        ++report.eq1Checks;
        if (lhs != rhs) report.violations.push_back({"eq1", r, eta, std::nullopt, lhs, rhs});
      }
    }
    if (anyBirth) {
      for (const Partition& zeta : levels[static_cast<std::size_t>(r)].states) {
        Rational rhs = 0;
        for (const Move& c : moves(zeta)) {
          if (c.kind != MoveKind::Coagulate) continue;
          rhs += rho(c.target) * stateRate(k, makeMove(MoveKind::Fragment, c.i, c.j, c.target));
        }
        Rational lhs = lambda * rho(zeta);
        ++report.eq2Checks;
        if (lhs != rhs) report.violations.push_back({"eq2", r, zeta, std::nullopt, lhs, rhs});
      }
    }
  }
  return report;
}

}  // namespace

FixedPointReport verifyFixedPoint(const std::vector<LevelDistribution>& levels, const Kernel& k) {
  if (levels.empty()) throw DomainError("no level distributions given");
  const int n = levels.front().n;
  checkLevels(levels, n);
  return verifySystems(levels, k, summedRates(k, n));
}

FixedPointReport verifyFixedPoint(const GibbsModel& model, const SolvableKernel& sk) {
  const int n = model.n();
  sk.validate();
  Kernel k = sk.toKernel(n);
  checkLevels(model.levels(), n);

  LevelRates closed;
  for (int r = 1; r <= n; ++r) {
    closed.death.push_back(sk.deathRate(n, r));
    closed.birth.push_back(sk.birthRate(n, r));
  }
  LevelRates summed = summedRates(k, n);
  FixedPointReport report = verifySystems(model.levels(), k, closed);
  for (int r = 1; r <= n; ++r) {
    auto idx = static_cast<std::size_t>(r - 1);
    Partition ref = model.level(r).states.front();
    ++report.rateChecks;
    if (closed.death[idx] != summed.death[idx])
      report.violations.push_back({"rates", r, ref, std::nullopt, closed.death[idx], summed.death[idx]});
    ++report.rateChecks;
    if (closed.birth[idx] != summed.birth[idx])
      report.violations.push_back({"rates", r, ref, std::nullopt, closed.birth[idx], summed.birth[idx]});
  }

  std::optional<WeightSequence> weights;
  if (sk.hasFragmentation()) {
    auto [wa, wb] = sk.weightParameters();
    weights = solvableWeights(wa, wb, std::max(n, 2));
  }
  report.balanceApplicable = sk.hasCoagulation() && sk.hasFragmentation() && !sk.boundaryCase();
  for (int r = 1; r < n; ++r) {
    for (const Partition& eta : model.level(r).states) {
      for (const Move& f : moves(eta)) {
        if (f.kind != MoveKind::Fragment) continue;
        Rational lambda = sk.birthRate(n, r);
        if (weights && lambda != 0) {
          Rational viaRates = fragRate(sk, *weights, f) / lambda;
          Rational viaRule = fragWalkProb(*weights, f);
          ++report.selectionSplitChecks;
          if (viaRates != viaRule)
            report.violations.push_back({"selection-split", r, eta, f.target, viaRates, viaRule});
        }
        if (report.balanceApplicable) {
          Move back = makeMove(MoveKind::Coagulate, f.i, f.j, f.target);
          Rational lhs = model.level(r).at(eta) * (stateRate(k, f) / lambda);
          Rational rhs = model.level(r + 1).at(f.target) * coagWalkProb(sk, back);
          ++report.balanceChecks;
          if (lhs != rhs) report.violations.push_back({"balance", r, eta, f.target, lhs, rhs});
        }
      }
    }
  }
  return report;
}

}  // namespace cfp
