#include "cfp/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cfp/errors.hpp"

namespace cfp {

namespace {

// Poisson weight exp(-32) is still far above underflow.
constexpr double kMaxChunk = 32.0;

double maxExitRate(const SparseGenerator& q) {
  double rate = 0.0;
  for (Eigen::Index k = 0; k < q.outerSize(); ++k)
    for (SparseGenerator::InnerIterator it(q, k); it; ++it)
      if (it.row() == it.col()) rate = std::max(rate, -it.value());
  return rate;
}

Eigen::VectorXd applyRow(const SparseGenerator& q, const Eigen::VectorXd& p) {
  return (p.transpose() * q).transpose();
}

class Uniformizer {
 public:
  Uniformizer(const SparseGenerator& q, double tolerance) : tolerance_(tolerance) {
    rate_ = maxExitRate(q);
    if (rate_ > 0) {
      jump_ = q / rate_;
      for (Eigen::Index i = 0; i < jump_.rows(); ++i) jump_.coeffRef(i, i) += 1.0;
      jump_.makeCompressed();
    }
  }

  Eigen::VectorXd advance(Eigen::VectorXd p, double dt) const {
    if (rate_ == 0 || dt == 0) return p;
    double total = rate_ * dt;
    int chunks = static_cast<int>(std::ceil(total / kMaxChunk));
    double h = total / chunks;
    for (int c = 0; c < chunks; ++c) p = chunk(p, h);
    return p;
  }

 private:
  // Sum_k Pois(k; h) p P^k, truncated once past the mode with negligible weight.
  Eigen::VectorXd chunk(const Eigen::VectorXd& p, double h) const {
    double w = std::exp(-h);
    double cumulative = w;
    Eigen::VectorXd term = p;
    Eigen::VectorXd acc = w * p;
    const long cap = static_cast<long>(h + 60.0 * std::sqrt(h + 1.0) + 200.0);
    for (long k = 1; k <= cap; ++k) {
      term = applyRow(jump_, term);
      w *= h / static_cast<double>(k);
      acc += w * term;
      cumulative += w;
      if (k > h && w < 1e-30) {
        if (1.0 - cumulative > tolerance_) break;
        return acc;
      }
    }
    std::ostringstream os;
    os << "uniformization: Poisson tail " << 1.0 - cumulative << " exceeds tolerance " << tolerance_
       << " (chunk " << h << ")";
    throw SolverError(os.str());
  }

  double tolerance_;
  double rate_ = 0.0;
  SparseGenerator jump_;
};

// Dormand-Prince 5(4) with standard step-size control.
class RungeKutta {
 public:
  RungeKutta(const SparseGenerator& q, double tolerance) : q_(q), rtol_(tolerance) {}

  Eigen::VectorXd advance(Eigen::VectorXd p, double dt) {
    double t = 0.0;
    if (h_ <= 0) h_ = std::min(dt, 1e-3);
    long steps = 0;
    while (t < dt) {
      if (++steps > 10'000'000) throw SolverError("runge-kutta: step budget exhausted");
      double h = std::min(h_, dt - t);
      Eigen::VectorXd k1 = applyRow(q_, p);
      Eigen::VectorXd k2 = applyRow(q_, p + h * (1.0 / 5) * k1);
      Eigen::VectorXd k3 = applyRow(q_, p + h * (3.0 / 40 * k1 + 9.0 / 40 * k2));
      Eigen::VectorXd k4 = applyRow(q_, p + h * (44.0 / 45 * k1 - 56.0 / 15 * k2 + 32.0 / 9 * k3));
      Eigen::VectorXd k5 =
          applyRow(q_, p + h * (19372.0 / 6561 * k1 - 25360.0 / 2187 * k2 + 64448.0 / 6561 * k3 - 212.0 / 729 * k4));
      Eigen::VectorXd k6 = applyRow(
          q_, p + h * (9017.0 / 3168 * k1 - 355.0 / 33 * k2 + 46732.0 / 5247 * k3 + 49.0 / 176 * k4 - 5103.0 / 18656 * k5));
      Eigen::VectorXd next =
          p + h * (35.0 / 384 * k1 + 500.0 / 1113 * k3 + 125.0 / 192 * k4 - 2187.0 / 6784 * k5 + 11.0 / 84 * k6);
      Eigen::VectorXd k7 = applyRow(q_, next);
      Eigen::VectorXd err = h * ((35.0 / 384 - 5179.0 / 57600) * k1 + (500.0 / 1113 - 7571.0 / 16695) * k3 +
                                 (125.0 / 192 - 393.0 / 640) * k4 + (-2187.0 / 6784 + 92097.0 / 339200) * k5 +
                                 (11.0 / 84 - 187.0 / 2100) * k6 - 1.0 / 40 * k7);
      double scaled = 0.0;
      for (Eigen::Index i = 0; i < p.size(); ++i)
        scaled = std::max(scaled, std::abs(err[i]) / (kAbsTol + rtol_ * std::max(std::abs(p[i]), std::abs(next[i]))));
      if (scaled <= 1.0) {
        t += h;
        p = std::move(next);
      }
      double factor = scaled == 0 ? 5.0 : std::clamp(0.9 * std::pow(scaled, -0.2), 0.2, 5.0);
      h_ = h * factor;
      if (h_ < 1e-14 * std::max(1.0, dt)) throw SolverError("runge-kutta: step size underflow");
    }
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p[i] < -1e-10) throw SolverError("runge-kutta: negative probability " + std::to_string(p[i]));
      p[i] = std::max(p[i], 0.0);
    }
    return p;
  }

 private:
  static constexpr double kAbsTol = 1e-15;
  const SparseGenerator& q_;
  double rtol_;
  double h_ = 0.0;
};

}  // namespace

void validateDistribution(const Eigen::VectorXd& p) {
  if (p.size() == 0) throw ValidationError("empty distribution");
  if ((p.array() < 0).any()) throw ValidationError("distribution has negative entries");
  if (!p.allFinite()) throw ValidationError("distribution has non-finite entries");
  double s = p.sum();
  if (std::abs(s - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "distribution sums to " << s << ", not 1 (tolerance 1e-12)";
    throw ValidationError(os.str());
  }
}

std::vector<Eigen::VectorXd> propagate(const SparseGenerator& q, const Eigen::VectorXd& p0,
                                       std::span<const double> times, const PropagationOptions& options) {
  if (q.rows() != q.cols() || q.rows() != p0.size()) throw ValidationError("generator and distribution sizes differ");
  validateDistribution(p0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= 0) || !std::isfinite(times[k])) throw ValidationError("times must be finite and nonnegative");
    if (k > 0 && times[k] < times[k - 1]) throw ValidationError("times must be nondecreasing");
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(times.size());
  Eigen::VectorXd p = p0;
  double t = 0.0;
  Uniformizer uniform(q, options.tolerance);
  RungeKutta rk(q, options.tolerance);
  for (double target : times) {
    double dt = target - t;
    if (dt > 0) p = options.method == Propagator::Uniformization ? uniform.advance(std::move(p), dt) : rk.advance(std::move(p), dt);
    t = target;
    double drift = std::abs(p.sum() - 1.0);
    if (drift > options.massTolerance) {
      std::ostringstream os;
      os << "probability mass drifted by " << drift << " at t=" << target;
      throw SolverError(os.str());
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace cfp
