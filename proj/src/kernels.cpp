#include "cfp/kernels.hpp"

#include <sstream>

#include "cfp/errors.hpp"
#include "cfp/gibbs.hpp"

namespace cfp {

Kernel::Kernel(RateFunction psi, RateFunction phi, std::string label)
    : psi_(std::move(psi)), phi_(std::move(phi)), label_(std::move(label)) {
  if (!psi_ || !phi_) throw DomainError("kernel rate functions must be callable");
}

Rational Kernel::psi(int i, int j) const {
  Rational v = psi_(i, j);
  if (v < 0) throw DomainError("psi(" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
  return v;
}

Rational Kernel::phi(int i, int j) const {
  Rational v = phi_(i, j);
  if (v < 0) throw DomainError("phi(" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
  return v;
}

void Kernel::validate(int n) const {
  for (int i = 1; i < n; ++i)
    for (int j = i; i + j <= n; ++j) {
      if (psi(i, j) != psi(j, i)) throw DomainError("psi is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      if (phi(i, j) != phi(j, i)) throw DomainError("phi is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
}

void KernelTable::set(int i, int j, Rational psi, Rational phi) {
  if (i < 1 || j < 1) throw ValidationError("kernel table indices must be positive");
  if (psi < 0 || phi < 0) throw ValidationError("kernel table values must be nonnegative");
  if (i > j) std::swap(i, j);
  auto [it, inserted] = entries.try_emplace({i, j}, psi, phi);
  if (!inserted && (it->second.first != psi || it->second.second != phi))
    throw ValidationError("conflicting kernel entries for (" + std::to_string(i) + "," + std::to_string(j) + ")");
}

Kernel KernelTable::toKernel(std::string label) const {
  auto lookup = [entries = entries](bool wantPsi) {
    return [entries, wantPsi](int i, int j) -> Rational {
      if (i > j) std::swap(i, j);
      auto it = entries.find({i, j});
      if (it == entries.end()) return Rational(0);
      return wantPsi ? it->second.first : it->second.second;
    };
  };
  return Kernel(lookup(true), lookup(false), std::move(label));
}

namespace {

std::vector<std::string> splitFields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

KernelTable parseKernelCsv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  int lineNo = 0;
  bool header = false;
  KernelTable table;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = splitFields(line);
    if (!header) {
      if (fields != std::vector<std::string>{"i", "j", "psi", "phi"})
        throw ValidationError("kernel file: expected header 'i,j,psi,phi' on line " + std::to_string(lineNo));
      header = true;
      continue;
    }
    if (fields.size() != 4)
      throw ValidationError("kernel file line " + std::to_string(lineNo) + ": expected 4 fields");
    try {
      Rational i = parseRational(fields[0]);
      Rational j = parseRational(fields[1]);
      if (i.get_den() != 1 || j.get_den() != 1) throw ValidationError("indices must be integers");
      table.set(static_cast<int>(i.get_num().get_si()), static_cast<int>(j.get_num().get_si()),
                parseRational(fields[2]), parseRational(fields[3]));
    } catch (const ValidationError& e) {
      throw ValidationError("kernel file line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  if (!header) throw ValidationError("kernel file: missing header 'i,j,psi,phi'");
  return table;
}

std::string writeKernelCsv(const KernelTable& table) {
  std::ostringstream os;
  os << "i,j,psi,phi\n";
  for (const auto& [ij, v] : table.entries)
    os << ij.first << ',' << ij.second << ',' << toString(v.first) << ',' << toString(v.second) << '\n';
  return os.str();
}

void SolvableKernel::validate() const {
  if (a < 0) throw DomainError("solvable kernel requires a >= 0");
  if (2 * a + b < 0) throw DomainError("solvable kernel requires 2a + b >= 0");
  if (phi11 < 0) throw DomainError("solvable kernel requires phi(1,1) >= 0");
  if (splitWeights) {
    const auto& [sa, sb] = *splitWeights;
    if (sa < 0 || 2 * sa + sb <= 0) throw DomainError("split weights require a >= 0 and 2a + b > 0");
  }
}

Rational SolvableKernel::deathRate(int n, int r) const {
  if (r < 1 || r > n) throw DomainError("death rate: r must lie in 1..N");
  if (r == 1) return 0;
  return ratio(r - 1, 2) * (2 * a * n + b * r);
}

Rational SolvableKernel::birthRate(int n, int r) const {
  if (r < 1 || r > n) throw DomainError("birth rate: r must lie in 1..N");
  return phi11 * (n - r);
}

std::pair<Rational, Rational> SolvableKernel::weightParameters() const {
  if (splitWeights) return *splitWeights;
  if (2 * a + b > 0) return {a, b};
  throw DomainError("2a + b = 0 leaves the Gibbs fragmentation rule undefined; supply split weights");
}

Kernel SolvableKernel::toKernel(int maxSize) const {
  validate();
  SolvableKernel self = *this;
  Kernel::RateFunction psi = [self](int i, int j) { return self.psi(i, j); };
  if (!hasFragmentation()) return Kernel(psi, [](int, int) { return Rational(0); }, label());

  auto [wa, wb] = weightParameters();
  auto weights = std::make_shared<const WeightSequence>(weightsClosedForm(wa, wb, std::max(maxSize, 2)));
  Rational phi11v = phi11;
  Kernel::RateFunction phi = [weights, wa, wb, phi11v, maxSize](int i, int j) -> Rational {
    if (i + j > std::max(maxSize, 2))
      throw CapacityError("solvable kernel tabulated only for block sizes <= " + std::to_string(maxSize));
    const WeightSequence& w = *weights;
    if (i == j) return phi11v * w[i] * w[i] * (2 * wa * i + wb) / (2 * w[2 * i]);
    return phi11v * w[i] * w[j] * (wa * (i + j) + wb) / w[i + j];
  };
  return Kernel(psi, phi, label());
}

std::string SolvableKernel::label() const {
  std::string s = "solvable(" + toString(a) + "," + toString(b) + "," + toString(phi11) + ")";
  if (splitWeights) s += "[split " + toString(splitWeights->first) + "," + toString(splitWeights->second) + "]";
  return s;
}

SolvableKernel parseSolvable(const std::string& text) {
  auto fields = splitFields(text);
  if (fields.size() != 3) throw ValidationError("--solvable expects a,b,phi11, got '" + text + "'");
  SolvableKernel k{parseRational(fields[0]), parseRational(fields[1]), parseRational(fields[2]), std::nullopt};
  k.validate();
  return k;
}

Rational stateRate(const Kernel& k, const Move& m) {
  if (!isValidMove(m.kind, m.i, m.j, m.source) || applyMove(m.kind, m.i, m.j, m.source) != m.target)
    throw DomainError("stateRate: move is not valid from its source");
  const Partition& s = m.source;
  if (m.kind == MoveKind::Coagulate) {
    if (m.i == m.j) return ratio(s.count(m.i) * (s.count(m.i) - 1), 2) * k.psi(m.i, m.j);
    return Rational(s.count(m.i) * s.count(m.j)) * k.psi(m.i, m.j);
  }
  return Rational(s.count(m.i + m.j)) * k.phi(m.i, m.j);
}

RateSummary rateSummary(const Kernel& k, const Partition& eta) {
  RateSummary s{0, 0};
  for (const Move& m : moves(eta)) {
    if (m.kind == MoveKind::Coagulate)
      s.coagTotal += stateRate(k, m);
    else
      s.fragTotal += stateRate(k, m);
  }
  return s;
}

HomogeneityReport checkHomogeneity(const Kernel& k, int n) {
  if (n < 2) throw DomainError("checkHomogeneity requires N >= 2");
  k.validate(n);
  StateSpace space(n);
  HomogeneityReport report{n, true, {}, {}, 0};
  for (int r = 1; r <= n; ++r) {
    auto [first, last] = space.levelRange(r);
    RateSummary ref = rateSummary(k, space[first]);
    LevelHomogeneity level{r, true, true, ref.coagTotal, ref.fragTotal, 0};
    std::size_t kept = 0;
    for (std::size_t s = first + 1; s < last; ++s) {
      RateSummary cur = rateSummary(k, space[s]);
      for (bool coag : {true, false}) {
        const Rational& a = coag ? ref.coagTotal : ref.fragTotal;
        const Rational& b = coag ? cur.coagTotal : cur.fragTotal;
        if (a == b) continue;
        (coag ? level.coagConstant : level.fragConstant) = false;
        ++level.violations;
        if (kept < kWitnessCapPerLevel) {
          report.witnesses.push_back({r, coag, space[first], space[s], a, b});
          ++kept;
        }
      }
    }
    report.totalViolations += level.violations;
    report.homogeneous = report.homogeneous && level.coagConstant && level.fragConstant;
    report.levels.push_back(std::move(level));
  }
  return report;
}

}  // namespace cfp
