#include <doctest.h>

#include <random>

#include "cfp/ctmc.hpp"
#include "cfp/errors.hpp"
#include "oracles.hpp"

using namespace cfp;

namespace {

Eigen::MatrixXd randomGenerator(int m, unsigned seed, double scale) {
  std::mt19937 g(seed);
  std::uniform_real_distribution<double> u(0.0, scale);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j && u(g) < 0.6 * scale) q(i, j) = u(g);
  for (int i = 0; i < m; ++i) q(i, i) = -q.row(i).sum();
  return q;
}

}  // namespace

TEST_CASE("both propagators match the dense matrix exponential") {
  for (unsigned seed = 1; seed <= 4; ++seed) {
    Eigen::MatrixXd dense = randomGenerator(12, seed, seed * 5.0);
    SparseGenerator q = dense.sparseView();
    Eigen::VectorXd p0 = Eigen::VectorXd::Zero(12);
    p0[seed % 12] = 0.25;
    p0[(seed + 5) % 12] = 0.75;
    std::vector<double> times = {0.0, 1e-3, 0.1, 0.7, 3.0, 12.0};
    for (auto method : {Propagator::Uniformization, Propagator::RungeKutta}) {
      PropagationOptions opt;
      opt.method = method;
      auto out = propagate(q, p0, times, opt);
      for (std::size_t k = 0; k < times.size(); ++k) {
        Eigen::VectorXd ref = oracle::expmPropagate(dense, p0, times[k]);
        CHECK((out[k] - ref).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(std::abs(out[k].sum() - 1.0) < 1e-9);
        CHECK(out[k].minCoeff() >= 0.0);
      }
    }
  }
}

TEST_CASE("two-state law") {
  Eigen::MatrixXd dense(2, 2);
  dense << -3.0, 3.0, 0.5, -0.5;
  SparseGenerator q = dense.sparseView();
  Eigen::VectorXd p0(2);
  p0 << 1.0, 0.0;
  std::vector<double> times = {0.2, 1.0, 5.0};
  auto out = propagate(q, p0, times);
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK(out[k][0] == doctest::Approx(oracle::twoStateSingletons(3.0, 0.5, times[k])).epsilon(1e-12));
}

TEST_CASE("input validation") {
  Eigen::MatrixXd dense(2, 2);
  dense << -1.0, 1.0, 1.0, -1.0;
  SparseGenerator q = dense.sparseView();
  Eigen::VectorXd p0(2);
  p0 << 0.5, 0.5;
  std::vector<double> backwards = {1.0, 0.5};
  CHECK_THROWS_AS(propagate(q, p0, backwards), ValidationError);
  std::vector<double> negative = {-1.0};
  CHECK_THROWS_AS(propagate(q, p0, negative), ValidationError);
  Eigen::VectorXd bad(2);
  bad << 0.7, 0.7;
  std::vector<double> ok = {1.0};
  CHECK_THROWS_AS(propagate(q, bad, ok), ValidationError);
  CHECK_THROWS_AS(validateDistribution(Eigen::VectorXd::Constant(2, -0.5)), ValidationError);
}

TEST_CASE("stiff generator stays accurate") {
  Eigen::MatrixXd dense(3, 3);
  dense << -1e4, 1e4, 0.0, 1.0, -2.0, 1.0, 0.0, 1e-3, -1e-3;
  SparseGenerator q = dense.sparseView();
  Eigen::VectorXd p0(3);
  p0 << 1.0, 0.0, 0.0;
  std::vector<double> times = {0.01, 1.0, 10.0};
  auto out = propagate(q, p0, times);
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK((out[k] - oracle::expmPropagate(dense, p0, times[k])).cwiseAbs().maxCoeff() < 1e-9);
}
