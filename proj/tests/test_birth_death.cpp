#include <doctest.h>

#include "cfp/birth_death.hpp"
#include "cfp/errors.hpp"
#include "cfp/exact.hpp"
#include "oracles.hpp"

using namespace cfp;

namespace {

const std::vector<std::pair<Rational, Rational>> kPairs = {{0, 2}, {1, 0}, {1, 1}, {ratio(1, 2), 3}};

Eigen::MatrixXd denseChain(const BirthDeathChain<double>& c) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(c.n, c.n);
  for (int r = 1; r <= c.n; ++r) {
    if (r < c.n) q(r - 1, r) = c.lambda(r);
    if (r > 1) q(r - 1, r - 2) = c.mu(r);
    q(r - 1, r - 1) = -(c.lambda(r) + c.mu(r));
  }
  return q;
}

}  // namespace

TEST_CASE("chain rates") {
  auto c = buildChain<Rational>(SolvableKernel{1, ratio(1, 2), 2, std::nullopt}, 6);
  CHECK(c.mu(1) == 0);
  CHECK(c.lambda(6) == 0);
  CHECK(c.mu(3) == Rational(2) * (12 + ratio(3, 2)) / 2);
  CHECK(c.lambda(2) == 8);
  auto d = buildChain<double>(SolvableKernel{1, ratio(1, 2), 2, std::nullopt}, 6);
  CHECK(d.mu(3) == doctest::Approx(13.5));
  CHECK(isErgodic(c));
  CHECK_FALSE(isErgodic(buildChain<Rational>(SolvableKernel{1, 0, 0, std::nullopt}, 6)));
}

TEST_CASE("marginals equal the level masses of the full process") {
  for (const auto& [a, b] : kPairs)
    for (int n : {2, 5, 10}) {
      SolvableKernel k{a, b, 1, std::nullopt};
      Generator g(k.toKernel(n), n);
      auto chain = buildChain<Rational>(k, n).toDoubleChain();
      std::vector<double> times = {0.01, 0.1, 1.0, 10.0};
      for (const auto& start : {Partition::singleBlock(n), Partition::singletons(n)}) {
        auto full = evolve(g, pointDistribution(g.states(), start), times);
        Eigen::VectorXd b0 = Eigen::VectorXd::Zero(n);
        b0[start.blockCount() - 1] = 1.0;
        auto marg = marginalEvolve(chain, b0, times);
        for (std::size_t t = 0; t < times.size(); ++t) {
          auto snap = conditionalSnapshot(g.states(), full[t]);
          for (int r = 1; r <= n; ++r)
            CHECK(std::abs(snap.levelMass[static_cast<std::size_t>(r - 1)] - marg[t][r - 1]) < 1e-10);
        }
      }
    }
}

TEST_CASE("chain stationary law against the dense null space") {
  auto c = buildChain<Rational>(SolvableKernel{1, 1, 1, std::nullopt}, 12).toDoubleChain();
  Eigen::VectorXd pi = chainStationary(c);
  CHECK((pi - oracle::denseStationary(denseChain(c))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Zeifman alphas with unit deltas are phi11 + aN + br, exactly") {
  for (const auto& [a, b] : kPairs)
    for (int n : {2, 3, 7, 20}) {
      SolvableKernel k{a, b, 3, std::nullopt};
      auto z = zeifmanUnitAlphas<Rational>(buildChain<Rational>(k, n));
      REQUIRE(z.alphas.size() == static_cast<std::size_t>(n - 1));
      for (int r = 1; r <= n - 1; ++r) CHECK(z.alphas[static_cast<std::size_t>(r - 1)] == 3 + a * n + b * r);
    }
}

TEST_CASE("Zeifman inputs") {
  auto c = buildChain<double>(SolvableKernel{1, 1, 1, std::nullopt}, 5);
  std::vector<double> bad = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(zeifmanAlphas<double>(c, bad), DomainError);
  std::vector<double> wrongLength = {1.0};
  CHECK_THROWS_AS(zeifmanAlphas<double>(c, wrongLength), DomainError);
  CHECK_THROWS_AS(zeifmanUnitAlphas<double>(buildChain<double>(SolvableKernel{1, 1, 1, std::nullopt}, 1)), DomainError);
}

TEST_CASE("gap equals phi11 + aN when b = 0") {
  for (int n : {4, 10, 25, 50}) {
    auto rep = spectralGap(SolvableKernel{1, 0, 1, std::nullopt}, n);
    REQUIRE(rep.exact);
    CHECK(std::abs(rep.numericalGap - (1.0 + n)) < 1e-8);
    CHECK(rep.withinBounds);
  }
  auto rep = spectralGap(SolvableKernel{2, 0, ratio(1, 2), std::nullopt}, 30);
  CHECK(std::abs(rep.numericalGap - 60.5) < 1e-8);
}

TEST_CASE("gap lies within the unit-delta bounds for b > 0 and matches dense eigenvalues") {
  for (auto [a, b] : std::vector<std::pair<Rational, Rational>>{{0, 2}, {1, 1}, {ratio(1, 2), 3}, {1, ratio(1, 2)}})
    for (int n : {4, 10, 25}) {
      SolvableKernel k{a, b, 1, std::nullopt};
      auto rep = spectralGap(k, n);
      double an = toDouble(a) * n, bd = toDouble(b);
      CHECK(rep.lower == doctest::Approx(1 + an + bd));
      CHECK(rep.upper == doctest::Approx(1 + an + bd * (n - 1)));
      CHECK(rep.withinBounds);
      REQUIRE(rep.optimized);
      CHECK(rep.optimized->result.min <= rep.numericalGap + 1e-8);
      CHECK(rep.optimized->result.max >= rep.numericalGap - 1e-8);
      CHECK(rep.optimized->result.max - rep.optimized->result.min <= rep.upper - rep.lower + 1e-9);
      auto ev = chainEigenvalues(buildChain<double>(k, n));
      std::vector<double> re;
      for (Eigen::Index i = 0; i < ev.size(); ++i) re.push_back(-ev[i].real());
      std::sort(re.begin(), re.end());
      CHECK(re[1] == doctest::Approx(rep.numericalGap).epsilon(1e-9));
    }
}

TEST_CASE("non-ergodic chains have no gap") {
  CHECK_THROWS_AS(spectralGap(SolvableKernel{1, 0, 0, std::nullopt}, 5), DomainError);
  CHECK_THROWS_AS(spectralGap(SolvableKernel{0, 0, 1, std::pair<Rational, Rational>{0, 2}}, 5), DomainError);
}

TEST_CASE("full process against the block-count chain") {
  SolvableKernel k{1, 1, 1, std::nullopt};
  Generator g(k.toKernel(7), 7);
  auto cmp = compareWithProcess(g, buildChain<double>(k, 7));
  CHECK(cmp.processGap > 0);
  CHECK(cmp.processGap <= cmp.chainGap + 1e-6);
}
