#include <doctest.h>

#include <map>

#include "cfp/errors.hpp"
#include "cfp/exact.hpp"
#include "oracles.hpp"

using namespace cfp;

namespace {

const std::vector<std::pair<Rational, Rational>> kPairs = {{0, 2}, {1, 0}, {1, 1}, {ratio(1, 2), 3}};

std::vector<std::vector<int>> statesOf(const StateSpace& space) {
  std::vector<std::vector<int>> out;
  for (const auto& p : space.states()) out.push_back(p.counts());
  return out;
}

Kernel exampleKernel(const Rational& c) {
  return Kernel(
      [c](int i, int j) {
        if (i > j) std::swap(i, j);
        if (i == 1 && (j == 1 || j == 2)) return Rational(0);
        if (i == 2 && j == 2) return c;
        return Rational(1);
      },
      [](int, int) { return Rational(0); }, "example");
}

Kernel productWithFragmentation() {
  return Kernel([](int i, int j) { return Rational(i * j); }, [](int i, int j) { return ratio(i + j, 3); },
                "product");
}

}  // namespace

TEST_CASE("generator matches the dense oracle and has zero row sums") {
  std::vector<Kernel> kernels = {SolvableKernel{1, 1, 1, std::nullopt}.toKernel(7), productWithFragmentation(),
                                 exampleKernel(3)};
  for (const auto& k : kernels) {
    Generator g(k, 7);
    Eigen::MatrixXd dense = Eigen::MatrixXd(g.matrix());
    Eigen::MatrixXd ref = oracle::denseGenerator(statesOf(g.states()), [&](int i, int j) { return k.psi(i, j); },
                                                 [&](int i, int j) { return k.phi(i, j); });
    CHECK((dense - ref).cwiseAbs().maxCoeff() < 1e-12);
    for (Eigen::Index i = 0; i < dense.rows(); ++i) CHECK(std::abs(dense.row(i).sum()) < 1e-12);
    for (std::size_t s = 0; s < g.size(); ++s) {
      Rational out = 0;
      for (const auto& t : g.transitions())
        if (t.from == s) out += t.rate;
      CHECK(out == g.exitRate(s));
    }
  }
}

TEST_CASE("N = 4, solvable(0,2,1): entry for (0,2,0,0) -> (0,0,0,1) is 2") {
  Generator g(SolvableKernel{0, 2, 1, std::nullopt}.toKernel(4), 4);
  CHECK(g.size() == 5);
  auto from = g.states().indexOf(Partition({0, 2, 0, 0}));
  auto to = g.states().indexOf(Partition::singleBlock(4));
  CHECK(g.matrix().coeff(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) == 2.0);
}

TEST_CASE("evolve agrees with the matrix exponential") {
  Generator g(productWithFragmentation(), 8);
  Eigen::MatrixXd dense = Eigen::MatrixXd(g.matrix());
  auto init = pointDistribution(g.states(), Partition::singletons(8));
  std::vector<double> times = {0.05, 0.5, 2.0};
  for (auto method : {Propagator::Uniformization, Propagator::RungeKutta}) {
    PropagationOptions opt;
    opt.method = method;
    auto out = evolve(g, init, times, opt);
    for (std::size_t k = 0; k < times.size(); ++k) {
      CHECK(out[k].t == times[k]);
      CHECK((out[k].probs - oracle::expmPropagate(dense, init.probs, times[k])).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("N = 2 two-state law") {
  SolvableKernel k{0, 3, ratio(1, 2), std::nullopt};
  Generator g(k.toKernel(2), 2);
  auto init = pointDistribution(g.states(), Partition::singletons(2));
  std::vector<double> times = {0.1, 1.0, 4.0};
  auto out = evolve(g, init, times);
  auto idx = g.states().indexOf(Partition::singletons(2));
  for (std::size_t t = 0; t < times.size(); ++t)
    CHECK(out[t].probs[static_cast<Eigen::Index>(idx)] ==
          doctest::Approx(oracle::twoStateSingletons(3.0, 0.5, times[t])).epsilon(1e-12));
}

TEST_CASE("conditional laws stay Gibbs for solvable kernels") {
  for (const auto& [a, b] : kPairs) {
    const int n = 8;
    SolvableKernel k{a, b, 1, std::nullopt};
    GibbsModel model = GibbsModel::solvable(n, a, b);
    Generator g(k.toKernel(n), n);
    std::vector<double> times = {0.01, 0.3, 3.0};
    for (const auto& start : {Partition::singleBlock(n), Partition::singletons(n)}) {
      auto out = evolve(g, pointDistribution(g.states(), start), times);
      for (const auto& d : out) {
        auto snap = conditionalSnapshot(g.states(), d);
        for (int r = 1; r <= n; ++r) {
          const auto& q = snap.conditional[static_cast<std::size_t>(r - 1)];
          if (!q) continue;
          auto [lo, hi] = g.states().levelRange(r);
          for (std::size_t s = lo; s < hi; ++s)
            CHECK(std::abs((*q)[static_cast<Eigen::Index>(s - lo)] - toDouble(model.level(r).at(g.states()[s]))) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("example kernel: conditional law on level N-2 moves with t") {
  const int n = 5;
  Generator g(exampleKernel(1), n);
  auto [lo, hi] = g.states().levelRange(n - 2);
  REQUIRE(hi - lo == 2);
  DistributionVector init{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()))};
  init.probs[static_cast<Eigen::Index>(lo)] = 0.5;
  init.probs[static_cast<Eigen::Index>(lo + 1)] = 0.5;
  std::vector<double> times = {0.0, 0.5, 1.0, 2.0};
  auto out = evolve(g, init, times);
  double q0 = (*conditionalSnapshot(g.states(), out[0]).conditional[static_cast<std::size_t>(n - 3)])[0];
  double drift = 0.0;
  for (const auto& d : out)
    drift = std::max(drift, std::abs((*conditionalSnapshot(g.states(), d).conditional[static_cast<std::size_t>(n - 3)])[0] - q0));
  CHECK(drift > 1e-3);
  // Analytic: p_i(t) = p_i exp(-A_i t) with A_1 = (N-3) psi(1,3) = 2 and A_2 = psi(2,2) = 1.
  double t = 2.0;
  double e1 = std::exp(-2.0 * t), e2 = std::exp(-1.0 * t);
  auto idx1 = g.states().indexOf(Partition({2, 0, 1, 0, 0}));
  CHECK(out[3].probs[static_cast<Eigen::Index>(idx1)] == doctest::Approx(0.5 * e1).epsilon(1e-10));
  auto idx2 = g.states().indexOf(Partition({1, 2, 0, 0, 0}));
  CHECK(out[3].probs[static_cast<Eigen::Index>(idx2)] == doctest::Approx(0.5 * e2).epsilon(1e-10));
}

TEST_CASE("stationary measure against the dense null space and the closed form") {
  for (const auto& [a, b] : kPairs)
    for (const Rational& phi11 : {Rational(1), Rational(2), ratio(1, 3)}) {
      const int n = 8;
      SolvableKernel k{a, b, phi11, std::nullopt};
      Generator g(k.toKernel(n), n);
      auto res = stationaryMeasure(g, k);
      REQUIRE(res.ergodic);
      REQUIRE(res.closedForm);
      Eigen::VectorXd ref = oracle::denseStationary(Eigen::MatrixXd(g.matrix()));
      CHECK((res.measure->probs - ref).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(res.maxDeviation < 1e-10);
    }
}

TEST_CASE("c_3 = 13/6 for solvable(0,2,1)") {
  SolvableKernel k{0, 2, 1, std::nullopt};
  Generator g(k.toKernel(3), 3);
  auto res = stationaryMeasure(g, k);
  REQUIRE(res.partitionFunction);
  CHECK(*res.partitionFunction == ratio(13, 6));
  Rational sum = 0;
  for (const auto& c : oracle::bruteForcePartitions(3)) sum += oracle::gibbsWeight(c, {1, 1, 1});
  CHECK(sum == ratio(13, 6));
}

TEST_CASE("non-ergodic kernels report absorbing states") {
  SolvableKernel coag{1, 1, 0, std::nullopt};
  Generator g(coag.toKernel(6), 6);
  CHECK_FALSE(g.irreducible());
  auto res = stationaryMeasure(g);
  CHECK_FALSE(res.ergodic);
  REQUIRE(res.absorbing.size() == 1);
  CHECK(res.absorbing.front() == Partition::singleBlock(6));
  CHECK_FALSE(closedFormInvariantWeights(g.states(), coag));
}

TEST_CASE("gibbs mixtures") {
  GibbsModel model = GibbsModel::solvable(6, 1, 1);
  StateSpace space(6);
  std::vector<double> mass = {0.1, 0.2, 0.3, 0.2, 0.1, 0.1};
  auto d = gibbsMixture(space, model, mass);
  auto snap = conditionalSnapshot(space, d);
  for (int r = 1; r <= 6; ++r) CHECK(snap.levelMass[static_cast<std::size_t>(r - 1)] == doctest::Approx(mass[static_cast<std::size_t>(r - 1)]));
  std::vector<double> bad = {0.5, 0.6, 0, 0, 0, 0};
  CHECK_THROWS(gibbsMixture(space, model, bad));
}

TEST_CASE("weight asymptotics") {
  auto conv = weightAsymptotics(1, 0, 301);
  CHECK(conv.weightClass == WeightClass::Convergent);
  CHECK(conv.alpha == -1.5);
  CHECK(std::abs(conv.rows[299].ratio / std::exp(1.0) - 1.0) < 0.01);
  for (auto [a, b] : std::vector<std::pair<Rational, Rational>>{{1, 1}, {ratio(1, 2), 3}}) {
    auto rep = weightAsymptotics(a, b, 400);
    CHECK(rep.weightClass == WeightClass::Convergent);
    CHECK(std::abs(rep.estimatedAlpha + 1.5) < 0.05);
  }
  auto exp = weightAsymptotics(0, 2, 100);
  CHECK(exp.weightClass == WeightClass::Expansive);
  CHECK(exp.alpha == 0.0);
  CHECK(std::abs(exp.estimatedAlpha) < 1e-9);
  CHECK_THROWS_AS(weightAsymptotics(1, 0, 401), DomainError);
}
