#include <doctest.h>

#include <cstdlib>

#include "cfp/errors.hpp"
#include "cfp/partitions.hpp"
#include "oracles.hpp"

using namespace cfp;

TEST_CASE("enumeration size matches the pentagonal recurrence") {
  for (int n = 1; n <= 25; ++n) CHECK(static_cast<long long>(enumerate(n).size()) == oracle::partitionCount(n));
  CHECK(oracle::partitionCount(30) == 5604);
  CHECK(enumerate(30).size() == 5604);
}

TEST_CASE("enumeration equals the brute-force composition set") {
  for (int n = 1; n <= 14; ++n) {
    auto states = enumerate(n);
    std::set<std::vector<int>> got;
    for (const auto& p : states) got.insert(p.counts());
    CHECK(got.size() == states.size());
    CHECK(got == oracle::bruteForcePartitions(n));
  }
}

TEST_CASE("enumeration order: blocks descending, then counts descending") {
  auto states = enumerate(6);
  for (std::size_t k = 1; k < states.size(); ++k) {
    const auto& a = states[k - 1];
    const auto& b = states[k];
    CHECK((a.blockCount() > b.blockCount() || (a.blockCount() == b.blockCount() && a.counts() > b.counts())));
  }
  CHECK(states.front() == Partition::singletons(6));
  CHECK(states.back() == Partition::singleBlock(6));
}

TEST_CASE("level slices") {
  auto l42 = levelSlice(4, 2);
  REQUIRE(l42.size() == 2);
  CHECK(l42[0].counts() == std::vector<int>{1, 0, 1, 0});
  CHECK(l42[1].counts() == std::vector<int>{0, 2, 0, 0});
  auto l53 = levelSlice(5, 3);
  REQUIRE(l53.size() == 2);
  CHECK(l53[0].counts() == std::vector<int>{2, 0, 1, 0, 0});
  CHECK(l53[1].counts() == std::vector<int>{1, 2, 0, 0, 0});
  CHECK(levelSlice(7, 1).size() == 1);
  CHECK(levelSlice(7, 7).size() == 1);
  CHECK_THROWS_AS(levelSlice(4, 5), DomainError);
  CHECK_THROWS_AS(levelSlice(4, 0), DomainError);
  std::size_t total = 0;
  for (int r = 1; r <= 12; ++r) total += levelSlice(12, r).size();
  CHECK(total == 77);
}

TEST_CASE("capacity limits") {
  CHECK_THROWS_AS(enumerate(0), CapacityError);
  CHECK_THROWS_AS(enumerate(31), CapacityError);
  CHECK(enumerate(31, 31).size() == static_cast<std::size_t>(oracle::partitionCount(31)));
}

TEST_CASE("CFP_MAX_N overrides the exact cap") {
  setenv("CFP_MAX_N", "12", 1);
  CHECK(exactMaxN() == 12);
  CHECK_THROWS_AS(enumerate(13), CapacityError);
  unsetenv("CFP_MAX_N");
  CHECK(exactMaxN() == kDefaultExactMaxN);
}

TEST_CASE("partition construction and accessors") {
  Partition p = Partition::fromParts(7, std::vector<int>{3, 1, 3});
  CHECK(p.counts() == std::vector<int>{1, 0, 2, 0, 0, 0, 0});
  CHECK(p.blockCount() == 3);
  CHECK(p.largestBlock() == 3);
  CHECK(p.parts() == std::vector<int>{3, 3, 1});
  CHECK(p.count(0) == 0);
  CHECK(p.count(8) == 0);
  CHECK_THROWS_AS(Partition(std::vector<int>{1, 1}), DomainError);
  CHECK_THROWS_AS(Partition(std::vector<int>{-1, 1, 0}), DomainError);
}

TEST_CASE("compact text round trip") {
  for (const auto& p : enumerate(9)) CHECK(parseCompact(toCompactString(p)) == p);
  CHECK(toCompactString(Partition::fromParts(4, std::vector<int>{3, 1})) == "1^1 3^1");
  CHECK_THROWS(parseCompact("1^x"));
  CHECK_THROWS(parseCompact(""));
}

TEST_CASE("moves conserve mass and change the block count by one") {
  for (int n = 1; n <= 9; ++n)
    for (const auto& eta : enumerate(n))
      for (const auto& m : moves(eta)) {
        CHECK(m.target.n() == n);
        int sum = 0;
        for (int i = 1; i <= n; ++i) sum += i * m.target.count(i);
        CHECK(sum == n);
        CHECK(m.target.blockCount() == eta.blockCount() + (m.kind == MoveKind::Coagulate ? -1 : 1));
      }
}

TEST_CASE("coagulation and fragmentation are inverse moves") {
  for (const auto& eta : enumerate(8))
    for (const auto& m : moves(eta)) {
      MoveKind back = m.kind == MoveKind::Coagulate ? MoveKind::Fragment : MoveKind::Coagulate;
      REQUIRE(isValidMove(back, m.i, m.j, m.target));
      CHECK(applyMove(back, m.i, m.j, m.target) == eta);
    }
}

TEST_CASE("move validity") {
  Partition p = Partition::fromParts(4, std::vector<int>{2, 1, 1});
  CHECK(isValidMove(MoveKind::Coagulate, 1, 1, p));
  CHECK(isValidMove(MoveKind::Coagulate, 1, 2, p));
  CHECK_FALSE(isValidMove(MoveKind::Coagulate, 2, 2, p));
  CHECK(isValidMove(MoveKind::Fragment, 1, 1, p));
  CHECK_FALSE(isValidMove(MoveKind::Fragment, 1, 2, p));
  CHECK_THROWS_AS(applyMove(MoveKind::Coagulate, 2, 2, p), DomainError);
  CHECK(moves(Partition::singletons(5)).size() == 1);
  CHECK(moves(Partition::singleBlock(5)).size() == 2);
}

TEST_CASE("state space indices and level ranges") {
  StateSpace space(10);
  CHECK(space.size() == 42);
  for (std::size_t s = 0; s < space.size(); ++s) CHECK(space.indexOf(space[s]) == s);
  std::size_t covered = 0;
  for (int r = 1; r <= 10; ++r) {
    auto [b, e] = space.levelRange(r);
    CHECK(e - b == levelSlice(10, r).size());
    for (std::size_t s = b; s < e; ++s) CHECK(space.levelOf(s) == r);
    covered += e - b;
  }
  CHECK(covered == space.size());
  CHECK_THROWS_AS(space.indexOf(Partition::singletons(9)), DomainError);
}
