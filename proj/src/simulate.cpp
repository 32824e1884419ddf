#include "cfp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "cfp/birth_death.hpp"
#include "cfp/errors.hpp"
#include "cfp/exact.hpp"

namespace cfp {

namespace {

constexpr std::int64_t kRecomputeEvery = 10000;

std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// 53-bit uniform on [0,1); std distributions are not specified bit-for-bit across libraries.
double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

void validateConfig(const SimConfig& cfg) {
  if (cfg.n < 1) throw ValidationError("simulate: N must be >= 1");
  if (cfg.trajectories < 1) throw ValidationError("simulate: trajectories must be >= 1");
  if (!(cfg.horizon >= 0) || !std::isfinite(cfg.horizon)) throw ValidationError("simulate: horizon must be finite and >= 0");
  double prev = 0.0;
  for (double t : cfg.snapshots) {
    if (!(t >= prev) || t > cfg.horizon) throw ValidationError("simulate: snapshots must be nondecreasing within [0, T]");
    prev = t;
  }
  if (cfg.snapshots.empty()) throw ValidationError("simulate: at least one snapshot time is required");
  if (const auto* p = std::get_if<Partition>(&cfg.init)) {
    if (p->n() != cfg.n) throw ValidationError("simulate: initial state has the wrong mass");
  } else {
    const auto& mix = std::get<StateMixture>(cfg.init);
    if (mix.empty()) throw ValidationError("simulate: empty initial mixture");
    double total = 0.0;
    for (const auto& [eta, w] : mix) {
      if (eta.n() != cfg.n) throw ValidationError("simulate: initial state has the wrong mass");
      if (!(w >= 0) || !std::isfinite(w)) throw ValidationError("simulate: mixture weights must be finite and >= 0");
      total += w;
    }
    if (!(total > 0)) throw ValidationError("simulate: mixture weights sum to zero");
  }
}

std::vector<int> drawInitial(const SimInit& init, std::mt19937_64& g) {
  if (const auto* p = std::get_if<Partition>(&init)) return p->counts();
  const auto& mix = std::get<StateMixture>(init);
  double total = 0.0;
  for (const auto& e : mix) total += e.second;
  double u = uniform01(g) * total;
  for (const auto& [eta, w] : mix) {
    if (u < w) return eta.counts();
    u -= w;
  }
  // Rounding left u past the last positive weight.
  for (auto it = mix.rbegin(); it != mix.rend(); ++it)
    if (it->second > 0) return it->first.counts();
  return mix.back().first.counts();
}

// Gillespie state with S_i = sum_j n_j psi(i,j) kept up to date as counts change.
class SsaState {
 public:
  SsaState(const SsaRates& r, std::vector<int> counts) : rates_(r), n_(std::move(counts)) { recompute(); }

  const std::vector<int>& counts() const { return n_; }
  double total() const { return std::max(coag_, 0.0) + std::max(frag_, 0.0); }

  void recompute() {
    const int N = rates_.n();
    s_.assign(static_cast<std::size_t>(N + 1), 0.0);
    for (int i = 1; i <= N; ++i)
      for (int j = 1; j <= N - i; ++j) s_[i] += count(j) * rates_.psi(i, j);
    coag_ = 0.0;
    frag_ = 0.0;
    for (int i = 1; i <= N; ++i) {
      if (count(i) == 0) continue;
      coag_ += 0.5 * count(i) * (s_[i] - rates_.psi(i, i));
      frag_ += count(i) * rates_.splitTotal(i);
    }
  }

  // Running totals near zero are recomputed so absorbing states read as exactly zero rate.
  void settle() {
    if (std::abs(coag_) < 1e-9 || std::abs(frag_) < 1e-9) recompute();
  }

  // One jump chosen proportionally to its rate; requires total() > 0.
  void step(std::mt19937_64& g, bool retried = false) {
    const int N = rates_.n();
    // Drift in the running totals can leave a bin that no longer holds a move.
    auto resync = [&]() {
      recompute();
      if (!retried && total() > 0) step(g, true);
    };
    double u = uniform01(g) * total();
    if (u < coag_) {
      // Ordered pair (i, j) with weight n_i (n_j - [i = j]) psi(i,j) / 2.
      int i = pickIndex(1, N, u, [&](int l) { return 0.5 * count(l) * (s_[l] - rates_.psi(l, l)); });
      if (i == 0) return resync();
      double v = uniform01(g) * (s_[i] - rates_.psi(i, i));
      int j = pickIndex(1, N - i, v, [&](int l) { return (count(l) - (l == i ? 1 : 0)) * rates_.psi(i, l); });
      if (j == 0) return resync();
      adjust(i, -1);
      adjust(j, -1);
      adjust(i + j, +1);
      return;
    }
    u -= coag_;
    int s = pickIndex(2, N, u, [&](int l) { return count(l) * rates_.splitTotal(l); });
    if (s == 0) return resync();
    double v = uniform01(g) * rates_.splitTotal(s);
    int i = pickIndex(1, s / 2, v, [&](int l) { return rates_.phi(l, s - l); });
    if (i == 0) return resync();
    adjust(s, -1);
    adjust(i, +1);
    adjust(s - i, +1);
  }

 private:
  int count(int i) const { return n_[static_cast<std::size_t>(i - 1)]; }

  // Linear scan; rounding past the end falls back to the last positive weight, 0 if none.
  template <class W>
  static int pickIndex(int lo, int hi, double u, W weight) {
    int last = 0;
    for (int l = lo; l <= hi; ++l) {
      double w = weight(l);
      if (!(w > 0)) continue;
      if (u < w) return l;
      u -= w;
      last = l;
    }
    return last;
  }

  // C = n'Psi n / 2 - sum_i n_i psi(i,i) / 2, so moving n_j by d changes C by d S_j + (d^2 - d) psi(j,j) / 2.
  void adjust(int j, int d) {
    coag_ += d > 0 ? s_[j] : rates_.psi(j, j) - s_[j];
    n_[static_cast<std::size_t>(j - 1)] += d;
    for (int i = 1; i <= rates_.n() - j; ++i) s_[i] += d * rates_.psi(i, j);
    frag_ += d * rates_.splitTotal(j);
  }

  const SsaRates& rates_;
  std::vector<int> n_;
  std::vector<double> s_;
  double coag_ = 0.0;
  double frag_ = 0.0;
};

}  // namespace

std::uint64_t trajectorySeed(std::uint64_t baseSeed, std::int64_t index) {
  return splitmix64(baseSeed + static_cast<std::uint64_t>(index + 1) * 0x9E3779B97F4A7C15ULL);
}

SsaRates::SsaRates(const Kernel& k, int n) : n_(n) {
  std::size_t size = static_cast<std::size_t>(n + 1) * (n + 1);
  psi_.assign(size, 0.0);
  phi_.assign(size, 0.0);
  splitTotal_.assign(static_cast<std::size_t>(n + 1), 0.0);
  for (int i = 1; i <= n; ++i)
    for (int j = i; i + j <= n; ++j) {
      double ps = toDouble(k.psi(i, j)), ph = toDouble(k.phi(i, j));
      psi_[idx(i, j)] = psi_[idx(j, i)] = ps;
      phi_[idx(i, j)] = phi_[idx(j, i)] = ph;
      splitTotal_[static_cast<std::size_t>(i + j)] += ph;
    }
}

std::vector<std::vector<int>> simulateTrajectory(const SsaRates& rates, const SimConfig& cfg, std::int64_t index,
                                                 const EventObserver& observer, std::int64_t* events, bool* parked) {
  std::mt19937_64 g(trajectorySeed(cfg.baseSeed, index));
  SsaState state(rates, drawInitial(cfg.init, g));
  std::vector<std::vector<int>> out;
  out.reserve(cfg.snapshots.size());
  double t = 0.0;
  std::int64_t count = 0;
  bool stuck = false;
  std::size_t next = 0;
  while (next < cfg.snapshots.size()) {
    double rate = state.total();
    double tNext = std::numeric_limits<double>::infinity();
    if (rate > 0) tNext = t - std::log1p(-uniform01(g)) / rate;
    else stuck = true;
    while (next < cfg.snapshots.size() && cfg.snapshots[next] < tNext) {
      out.push_back(state.counts());
      ++next;
    }
    if (next == cfg.snapshots.size() || !std::isfinite(tNext)) break;
    t = tNext;
    state.step(g);
    state.settle();
    if (++count % kRecomputeEvery == 0) state.recompute();
    if (observer) observer(t, state.counts());
  }
  while (out.size() < cfg.snapshots.size()) out.push_back(state.counts());
  if (events) *events = count;
  if (parked) *parked = stuck;
  return out;
}

TrajectoryStats runSSA(const SimConfig& cfg) {
  validateConfig(cfg);
  cfg.kernel.validate(cfg.n);
  const SsaRates rates(cfg.kernel, cfg.n);
  const int N = cfg.n;
  const std::size_t S = cfg.snapshots.size();
  const auto M = static_cast<std::size_t>(cfg.trajectories);
  std::shared_ptr<const StateSpace> space;
  if (N <= kSimTabulateMaxN) space = std::make_shared<StateSpace>(N, kSimTabulateMaxN);

  // Per trajectory and snapshot: level, largest block and (if tabulated) state index.
  std::vector<std::int32_t> level(M * S), largest(M * S), stateIdx(space ? M * S : 0);
  std::vector<std::int64_t> evCount(M, 0);
  std::vector<char> parkedFlag(M, 0);

  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, M));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      bool stuck = false;
      auto snaps = simulateTrajectory(rates, cfg, static_cast<std::int64_t>(m), {}, &evCount[m], &stuck);
      parkedFlag[m] = stuck ? 1 : 0;
      for (std::size_t s = 0; s < S; ++s) {
        const auto& c = snaps[s];
        int r = 0, big = 0;
        for (int i = 1; i <= N; ++i)
          if (c[static_cast<std::size_t>(i - 1)] > 0) {
            r += c[static_cast<std::size_t>(i - 1)];
            big = i;
          }
        level[m * S + s] = r;
        largest[m * S + s] = big;
        if (space) stateIdx[m * S + s] = static_cast<std::int32_t>(space->indexOf(Partition(c)));
      }
    }
  };
  if (workers <= 1) {
    work(0, M);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (M + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t b = w * chunk, e = std::min(M, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  TrajectoryStats stats;
  stats.n = N;
  stats.baseSeed = cfg.baseSeed;
  stats.trajectories = cfg.trajectories;
  stats.space = space;
  for (std::size_t m = 0; m < M; ++m) {
    stats.events += evCount[m];
    stats.parked += parkedFlag[m];
  }
  const double dm = static_cast<double>(M);
  for (std::size_t s = 0; s < S; ++s) {
    SnapshotStats snap;
    snap.t = cfg.snapshots[s];
    snap.levelCounts.assign(static_cast<std::size_t>(N), 0);
    snap.largestHistogram.assign(static_cast<std::size_t>(N), 0);
    if (space) snap.stateCounts = std::vector<std::int64_t>(space->size(), 0);
    std::int64_t sum = 0, sumSq = 0;
    for (std::size_t m = 0; m < M; ++m) {
      ++snap.levelCounts[static_cast<std::size_t>(level[m * S + s] - 1)];
      std::int64_t big = largest[m * S + s];
      ++snap.largestHistogram[static_cast<std::size_t>(big - 1)];
      sum += big;
      sumSq += big * big;
      if (space) ++(*snap.stateCounts)[static_cast<std::size_t>(stateIdx[m * S + s])];
    }
    for (auto c : snap.levelCounts) {
      double p = static_cast<double>(c) / dm;
      snap.levelProb.push_back(p);
      snap.levelSE.push_back(std::sqrt(p * (1 - p) / dm));
    }
    snap.largestMean = static_cast<double>(sum) / dm;
    if (M > 1) {
      // Integer moments keep the variance independent of summation order.
      double var = (static_cast<double>(sumSq) - static_cast<double>(sum) * static_cast<double>(sum) / dm) / (dm - 1);
      snap.largestSE = std::sqrt(std::max(var, 0.0) / dm);
    }
    auto quantile = [&](double q) {
      auto target = static_cast<std::int64_t>(std::ceil(q * dm));
      target = std::max<std::int64_t>(target, 1);
      std::int64_t acc = 0;
      for (int k = 1; k <= N; ++k) {
        acc += snap.largestHistogram[static_cast<std::size_t>(k - 1)];
        if (acc >= target) return k;
      }
      return N;
    };
    snap.largestQ10 = quantile(0.1);
    snap.largestMedian = quantile(0.5);
    snap.largestQ90 = quantile(0.9);
    stats.snapshots.push_back(std::move(snap));
  }
  return stats;
}

Eigen::VectorXd empiricalConditional(const TrajectoryStats& stats, std::size_t snapshot, int r) {
  if (!stats.space) throw DomainError("state tables are only kept for N <= 30");
  const auto& snap = stats.snapshots.at(snapshot);
  auto [b, e] = stats.space->levelRange(r);
  std::int64_t total = snap.levelCounts.at(static_cast<std::size_t>(r - 1));
  if (total == 0) return {};
  Eigen::VectorXd q(static_cast<Eigen::Index>(e - b));
  for (std::size_t s = b; s < e; ++s)
    q[static_cast<Eigen::Index>(s - b)] = static_cast<double>((*snap.stateCounts)[s]) / static_cast<double>(total);
  return q;
}

double totalVariation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw DomainError("totalVariation: size mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

GelationScan gelationScan(const SolvableKernel& k, std::span<const int> ns, double t, std::int64_t trajectories,
                          std::uint64_t baseSeed, int threads) {
  k.validate();
  auto [wa, wb] = k.weightParameters();
  auto asym = weightAsymptotics(wa, wb, 2);
  GelationScan scan{asym.alpha, {}};
  double exponent = 1.0 / (asym.alpha + 2.0);
  for (int n : ns) {
    auto chain = buildChain<Rational>(k, n).toDoubleChain();
    double gap = spectralGap(chain, false).numericalGap;
    double horizon = std::max(t, 10.0 / gap);
    SimConfig cfg{n, k.toKernel(n), Partition::singletons(n), horizon, {horizon}, trajectories, baseSeed, threads};
    auto stats = runSSA(cfg);
    const auto& snap = stats.snapshots.back();
    double scale = std::pow(static_cast<double>(n), exponent);
    scan.rows.push_back({n, horizon, snap.largestMean, snap.largestSE, snap.largestMean / n, scale,
                         snap.largestMean / scale});
  }
  return scan;
}

}  // namespace cfp
