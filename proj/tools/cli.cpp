#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "cfp/birth_death.hpp"
#include "cfp/errors.hpp"
#include "cfp/exact.hpp"
#include "cfp/gibbs.hpp"
#include "cfp/io.hpp"
#include "cfp/partitions.hpp"
#include "cfp/simulate.hpp"

#ifndef CFP_VERSION
#define CFP_VERSION "0.0.0"
#endif

namespace cfp::cli {

namespace {

// Numerical checks in verify enumerate Omega_N and diagonalize, so they stop here.
constexpr int kVerifyNumericMaxN = 12;
constexpr double kFactorizationTol = 1e-6;
constexpr double kMarginalTol = 1e-8;
constexpr double kBalanceTol = 1e-10;

struct Logger {
  bool quiet = false;
  bool json = false;

  void write(const char* level, const std::string& msg) const {
    if (quiet && std::string(level) != "error") return;
    if (json) {
      Json j;
      j["level"] = level;
      j["msg"] = msg;
      std::cerr << j.dump() << '\n';
    } else {
      std::cerr << (std::string(level) == "error" ? "error: " : "") << msg << '\n';
    }
  }
  void info(const std::string& msg) const { write("info", msg); }
  void error(const std::string& msg) const { write("error", msg); }
};

std::string utcNow() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sha256Hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void writeFile(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << data;
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

std::vector<std::string> splitComma(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct Options {
  int n = 0;
  std::string solvable;
  std::string kernelFile;
  std::string splitWeights;
  std::string format = "json";
  std::string emit;
  std::string out;
  std::string init = "eta-star";
  std::string times = "0:0.5:5";
  std::string method = "uniformization";
  // gibbs
  std::string a, b, phi11 = "1";
  int asymptoticsK = 60;
  // enumerate
  int level = 0;
  // spectral gap
  bool noOptimize = false;
  bool compareProcess = false;
  // simulate
  double horizon = 1.0;
  std::string snapshots;
  std::int64_t trajectories = 1000;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string gelation;
};

struct Context {
  Logger log;
  std::string command;
  std::vector<std::string> argv;
};

void requireFormat(const Options& o) {
  if (o.format != "json" && o.format != "csv") throw ValidationError("--format must be json or csv");
}

std::pair<Rational, Rational> parsePair(const std::string& text, const char* flag) {
  auto f = splitComma(text);
  if (f.size() != 2) throw ValidationError(std::string(flag) + " expects a,b");
  return {parseRational(f[0]), parseRational(f[1])};
}

SolvableKernel resolveSolvable(const Options& o) {
  SolvableKernel k;
  if (!o.solvable.empty()) {
    k = parseSolvable(o.solvable);
  } else if (!o.a.empty() && !o.b.empty()) {
    k = SolvableKernel{parseRational(o.a), parseRational(o.b), parseRational(o.phi11), std::nullopt};
  } else {
    throw ValidationError("a solvable kernel is required: --solvable a,b,phi11 (or --a, --b, --phi11)");
  }
  if (!o.splitWeights.empty()) k.splitWeights = parsePair(o.splitWeights, "--split-weights");
  k.validate();
  return k;
}

struct KernelChoice {
  std::optional<SolvableKernel> solvable;
  std::optional<Kernel> kernel;
  std::string label;
};

KernelChoice resolveKernel(const Options& o) {
  if (!o.kernelFile.empty() && (!o.solvable.empty() || !o.a.empty()))
    throw ValidationError("give either --kernel or --solvable, not both");
  KernelChoice c;
  if (!o.kernelFile.empty()) {
    c.kernel = parseKernelCsv(readFile(o.kernelFile)).toKernel(o.kernelFile);
    c.kernel->validate(o.n);
    c.label = "table:" + o.kernelFile;
  } else {
    c.solvable = resolveSolvable(o);
    c.kernel = c.solvable->toKernel(o.n);
    c.label = c.solvable->label();
  }
  return c;
}

Json kernelParams(const KernelChoice& c) {
  Json j;
  j["label"] = c.label;
  if (c.solvable) {
    j["a"] = toString(c.solvable->a);
    j["b"] = toString(c.solvable->b);
    j["phi11"] = toString(c.solvable->phi11);
    if (c.solvable->splitWeights) {
      j["split_a"] = toString(c.solvable->splitWeights->first);
      j["split_b"] = toString(c.solvable->splitWeights->second);
    }
  }
  return j;
}

std::optional<Partition> namedState(const std::string& spec, int n) {
  if (spec == "eta-star" || spec == "single-block") return Partition::singleBlock(n);
  if (spec == "zeta-star" || spec == "singletons") return Partition::singletons(n);
  return std::nullopt;
}

std::optional<int> levelSpec(const std::string& spec) {
  std::string s = spec.rfind("level:", 0) == 0 ? spec.substr(6) : spec;
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
  return std::stoi(s);
}

Partition parseState(const std::string& spec, int n) {
  if (auto p = namedState(spec, n)) return *p;
  Partition p = parseCompact(spec);
  if (p.n() != n) throw ValidationError("--init state '" + spec + "' is not a partition of " + std::to_string(n));
  return p;
}

int initialLevel(const std::string& spec, int n) {
  if (auto r = levelSpec(spec)) {
    if (*r < 1 || *r > n) throw ValidationError("--init level must lie in 1..N");
    return *r;
  }
  return parseState(spec, n).blockCount();
}

GibbsModel modelFor(const SolvableKernel& k, int n) {
  auto [wa, wb] = k.weightParameters();
  return GibbsModel::solvable(n, wa, wb);
}

DistributionVector resolveInitDistribution(const StateSpace& space, const std::string& spec, const KernelChoice& c) {
  if (auto r = levelSpec(spec)) {
    if (!c.solvable) throw ValidationError("--init as a level needs a solvable kernel (Gibbs start)");
    if (*r < 1 || *r > space.n()) throw ValidationError("--init level must lie in 1..N");
    std::vector<double> mass(static_cast<std::size_t>(space.n()), 0.0);
    mass[static_cast<std::size_t>(*r - 1)] = 1.0;
    return gibbsMixture(space, modelFor(*c.solvable, space.n()), mass);
  }
  return pointDistribution(space, parseState(spec, space.n()));
}

Json manifestFor(const Context& ctx, const Json& params, const std::vector<std::uint64_t>& seeds,
                 const std::string& started, const std::vector<std::pair<std::string, std::string>>& outputs) {
  Json m;
  m["command"] = ctx.command;
  m["argv"] = ctx.argv;
  m["parameters"] = params;
  m["version"] = CFP_VERSION;
  m["seeds"] = seeds;
  m["started"] = started;
  m["finished"] = utcNow();
  if (const char* cap = std::getenv("CFP_MAX_N")) m["CFP_MAX_N"] = cap;
  Json outs = Json::array();
  for (const auto& [path, data] : outputs) {
    Json e;
    e["path"] = path;
    e["bytes"] = data.size();
    e["sha256"] = sha256Hex(data);
    outs.push_back(std::move(e));
  }
  m["outputs"] = std::move(outs);
  return m;
}

// Writes payload to the target file (with a manifest next to it) or to stdout.
void emitPayload(const Context& ctx, const std::string& target, const std::string& payload, const Json& params,
                 const std::vector<std::uint64_t>& seeds, const std::string& started) {
  if (target.empty() || target == "-") {
    std::cout << payload;
    std::cout.flush();
    return;
  }
  writeFile(target, payload);
  std::string manifestPath = target + ".manifest.json";
  writeFile(manifestPath, dumpJson(manifestFor(ctx, params, seeds, started, {{target, payload}})));
  ctx.log.info("wrote " + target + " and " + manifestPath);
}

std::string render(const Options& o, const Json& j, const CsvTable& t) {
  return o.format == "csv" ? writeCsv(t) : dumpJson(j);
}

// ---------------------------------------------------------------------------------------------

int cmdEnumerate(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  auto states = o.level > 0 ? levelSlice(o.n, o.level) : enumerate(o.n);
  Json params;
  params["N"] = o.n;
  if (o.level > 0) params["level"] = o.level;
  Json j = enumerateJson(o.n, states);
  if (o.level > 0) j["level"] = o.level;
  ctx.log.info(std::to_string(states.size()) + " partitions");
  emitPayload(ctx, o.emit, render(o, j, enumerateCsv(states)), params, {}, started);
  return kExitOk;
}

int cmdHomogeneity(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  auto kc = resolveKernel(o);
  auto rep = checkHomogeneity(*kc.kernel, o.n);
  Json params;
  params["N"] = o.n;
  params["kernel"] = kernelParams(kc);
  ctx.log.info(std::string(rep.homogeneous ? "homogeneous" : "inhomogeneous") + " (" +
               std::to_string(rep.totalViolations) + " violating states)");
  emitPayload(ctx, o.emit, render(o, homogeneityJson(rep, kc.label), homogeneityCsv(rep)), params, {}, started);
  return kExitOk;
}

int cmdGibbs(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  SolvableKernel k = resolveSolvable(o);
  auto [wa, wb] = k.weightParameters();
  std::string kind = o.emit.empty() ? "rho" : o.emit;
  Json params;
  params["N"] = o.n;
  params["a"] = toString(k.a);
  params["b"] = toString(k.b);
  params["phi11"] = toString(k.phi11);
  params["emit"] = kind;
  Json j;
  CsvTable t;
  if (kind == "asymptotics") {
    params["K"] = o.asymptoticsK;
    auto rep = weightAsymptotics(wa, wb, o.asymptoticsK);
    j = asymptoticsJson(rep);
    t = asymptoticsCsv(rep);
  } else {
    GibbsModel model = GibbsModel::solvable(o.n, wa, wb);
    if (kind == "rho") {
      j = rhoJson(model);
      t = rhoCsv(model);
    } else if (kind == "bell") {
      j = bellJson(model);
      t = bellCsv(model);
    } else if (kind == "weights") {
      j = weightsJson(model);
      t = weightsCsv(model);
    } else if (kind == "walks") {
      t.header = {"direction", "from", "to", "p", "p_float"};
      auto frag = gibbsFragmentationWalk(solvableWeights(wa, wb, o.n), o.n);
      j["N"] = o.n;
      j["fragmentation"] = walkJson(frag);
      for (auto& row : walkCsv(frag).rows) {
        row.insert(row.begin(), "fragmentation");
        t.rows.push_back(std::move(row));
      }
      if (k.hasCoagulation() && !k.boundaryCase()) {
        auto coag = coagulationWalk(k.toKernel(o.n), o.n);
        j["coagulation"] = walkJson(coag);
        for (auto& row : walkCsv(coag).rows) {
          row.insert(row.begin(), "coagulation");
          t.rows.push_back(std::move(row));
        }
      }
    } else {
      throw ValidationError("gibbs --emit must be rho, bell, weights, walks or asymptotics");
    }
  }
  emitPayload(ctx, o.out, render(o, j, t), params, {}, started);
  return kExitOk;
}

PropagationOptions propagationFor(const Options& o) {
  PropagationOptions p;
  if (o.method == "uniformization")
    p.method = Propagator::Uniformization;
  else if (o.method == "rk45" || o.method == "dopri5")
    p.method = Propagator::RungeKutta;
  else
    throw ValidationError("--method must be uniformization or rk45");
  return p;
}

int cmdEvolve(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  auto kc = resolveKernel(o);
  auto times = parseTimes(o.times);
  Generator g(*kc.kernel, o.n);
  auto init = resolveInitDistribution(g.states(), o.init, kc);
  auto dists = evolve(g, init, times, propagationFor(o));
  std::vector<ConditionalSnapshot> snaps;
  for (const auto& dv : dists) snaps.push_back(conditionalSnapshot(g.states(), dv));
  Json params;
  params["N"] = o.n;
  params["kernel"] = kernelParams(kc);
  params["init"] = o.init;
  params["times"] = o.times;
  params["method"] = o.method;
  Json j;
  j["N"] = o.n;
  j["init"] = o.init;
  j["method"] = o.method;
  Json arr = Json::array();
  for (const auto& s : snaps) arr.push_back(snapshotJson(g.states(), s));
  j["snapshots"] = std::move(arr);
  emitPayload(ctx, o.emit, render(o, j, snapshotsCsv(g.states(), snaps)), params, {}, started);
  return kExitOk;
}

int cmdMarginal(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  SolvableKernel k = resolveSolvable(o);
  auto times = parseTimes(o.times);
  auto chain = buildChain<Rational>(k, o.n).toDoubleChain();
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(o.n);
  b0[initialLevel(o.init, o.n) - 1] = 1.0;
  auto marg = marginalEvolve(chain, b0, times, propagationFor(o));
  Json params;
  params["N"] = o.n;
  params["kernel"] = k.label();
  params["init"] = o.init;
  params["times"] = o.times;
  emitPayload(ctx, o.emit, render(o, marginalJson(times, marg), marginalCsv(times, marg)), params, {}, started);
  return kExitOk;
}

int cmdStationary(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  auto kc = resolveKernel(o);
  Generator g(*kc.kernel, o.n);
  StationaryResult res = kc.solvable ? stationaryMeasure(g, *kc.solvable) : stationaryMeasure(g);
  Json params;
  params["N"] = o.n;
  params["kernel"] = kernelParams(kc);
  ctx.log.info(res.ergodic ? "ergodic" : "not irreducible; absorbing states reported");
  emitPayload(ctx, o.emit, render(o, stationaryJson(g.states(), res), stationaryCsv(g.states(), res)), params, {},
              started);
  return kExitOk;
}

int cmdSpectralGap(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  SolvableKernel k = resolveSolvable(o);
  GapReport rep = spectralGap(k, o.n, !o.noOptimize);
  auto chain = buildChain<Rational>(k, o.n).toDoubleChain();
  auto unit = zeifmanUnitAlphas<double>(chain);
  Json j = gapJson(o.n, rep, unit);
  if (o.compareProcess) {
    Generator g(k.toKernel(o.n), o.n);
    auto cmp = compareWithProcess(g, chain);
    Json c;
    c["process_gap"] = doubleJson(cmp.processGap);
    c["chain_gap"] = doubleJson(cmp.chainGap);
    c["difference"] = doubleJson(cmp.difference);
    c["process_below_chain"] = cmp.processBelowChain;
    j["process"] = std::move(c);
    if (cmp.processBelowChain) ctx.log.info("full process relaxes slower than the block-count chain");
  }
  Json params;
  params["N"] = o.n;
  params["kernel"] = k.label();
  params["optimize"] = !o.noOptimize;
  if (!rep.withinBounds) ctx.log.error("numerical gap outside the Zeifman bounds");
  emitPayload(ctx, o.emit, render(o, j, gapCsv(unit, rep)), params, {}, started);
  return rep.withinBounds ? kExitOk : kExitVerification;
}

std::vector<double> parseDoubleList(const std::string& text, const char* flag) {
  std::vector<double> out;
  for (const auto& f : splitComma(text)) {
    if (f.empty()) throw ValidationError(std::string(flag) + ": empty entry");
    out.push_back(parseDouble(f));
  }
  return out;
}

int cmdSimulate(const Context& ctx, const Options& o) {
  requireFormat(o);
  std::string started = utcNow();
  Json params;
  params["N"] = o.n;
  params["T"] = doubleJson(o.horizon);
  params["trajectories"] = o.trajectories;
  params["seed"] = o.seed;
  params["threads"] = o.threads;
  if (!o.gelation.empty()) {
    SolvableKernel k = resolveSolvable(o);
    std::vector<int> ns;
    for (const auto& f : splitComma(o.gelation)) ns.push_back(std::stoi(f));
    params["kernel"] = k.label();
    params["gelation"] = o.gelation;
    auto scan = gelationScan(k, ns, o.horizon, o.trajectories, o.seed, o.threads);
    emitPayload(ctx, o.emit, render(o, gelationJson(scan), gelationCsv(scan)), params, {o.seed}, started);
    return kExitOk;
  }
  auto kc = resolveKernel(o);
  params["kernel"] = kernelParams(kc);
  params["init"] = o.init;
  std::vector<double> snaps = o.snapshots.empty() ? std::vector<double>{o.horizon} : parseDoubleList(o.snapshots, "--snapshots");
  params["snapshots"] = snaps;
  SimInit init = Partition::singleBlock(o.n);
  if (auto r = levelSpec(o.init)) {
    if (!kc.solvable) throw ValidationError("--init as a level needs a solvable kernel (Gibbs start)");
    if (*r < 1 || *r > o.n) throw ValidationError("--init level must lie in 1..N");
    auto level = modelFor(*kc.solvable, o.n).level(*r);
    StateMixture mix;
    for (std::size_t s = 0; s < level.states.size(); ++s) mix.emplace_back(level.states[s], toDouble(level.probs[s]));
    init = std::move(mix);
  } else {
    init = parseState(o.init, o.n);
  }
  SimConfig cfg{o.n, *kc.kernel, init, o.horizon, snaps, o.trajectories, o.seed, o.threads};
  auto stats = runSSA(cfg);
  ctx.log.info(std::to_string(stats.events) + " events over " + std::to_string(stats.trajectories) + " trajectories");
  emitPayload(ctx, o.emit, render(o, statsJson(stats), statsCsv(stats)), params, {o.seed}, started);
  return kExitOk;
}

int cmdVerify(const Context& ctx, const Options& o) {
  std::string started = utcNow();
  SolvableKernel k = resolveSolvable(o);
  auto rep = runVerification(k, o.n);
  Json j;
  j["N"] = o.n;
  j["kernel"] = k.label();
  j["ok"] = rep.ok();
  Json arr = Json::array();
  for (const auto& c : rep.identities) {
    Json e;
    e["identity"] = c.name;
    e["applicable"] = c.applicable;
    e["passed"] = c.passed;
    e["checks"] = c.checks;
    if (!c.detail.empty()) e["detail"] = c.detail;
    arr.push_back(std::move(e));
    if (c.applicable) ctx.log.info(std::string(c.passed ? "ok   " : "FAIL ") + c.name + " (" + std::to_string(c.checks) + ")");
  }
  j["identities"] = std::move(arr);
  Json params;
  params["N"] = o.n;
  params["kernel"] = k.label();
  CsvTable t{{"identity", "applicable", "passed", "checks", "detail"}, {}};
  for (const auto& c : rep.identities)
    t.rows.push_back({c.name, c.applicable ? "true" : "false", c.passed ? "true" : "false", std::to_string(c.checks), c.detail});
  requireFormat(o);
  emitPayload(ctx, o.emit, render(o, j, t), params, {}, started);
  return rep.ok() ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------------------------

std::string firstMismatch(const std::vector<LevelDistribution>& got, const GibbsModel& model) {
  for (const auto& lv : got)
    for (std::size_t s = 0; s < lv.states.size(); ++s)
      if (lv.probs[s] != model.level(lv.r).at(lv.states[s]))
        return "r=" + std::to_string(lv.r) + " state " + toCompactString(lv.states[s]) + ": " + toString(lv.probs[s]) +
               " vs " + toString(model.level(lv.r).at(lv.states[s]));
  return {};
}

std::vector<double> geometricGrid(double lo, double hi, int count) {
  std::vector<double> t;
  for (int k = 0; k < count; ++k) t.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1)));
  return t;
}

}  // namespace

bool VerificationReport::ok() const {
  for (const auto& c : identities)
    if (c.applicable && !c.passed) return false;
  return true;
}

std::vector<double> parseTimes(const std::string& spec) {
  std::vector<double> out;
  if (spec.rfind("geom:", 0) == 0) {
    std::vector<std::string> f;
    std::stringstream ss(spec.substr(5));
    std::string part;
    while (std::getline(ss, part, ':')) f.push_back(part);
    if (f.size() != 3) throw ValidationError("--times geom:lo:hi:count");
    double lo = parseDouble(f[0]), hi = parseDouble(f[1]);
    int count = std::stoi(f[2]);
    if (!(lo > 0) || !(hi > lo) || count < 2) throw ValidationError("--times geom needs 0 < lo < hi and count >= 2");
    return geometricGrid(lo, hi, count);
  }
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> f;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ':')) f.push_back(part);
    if (f.size() != 3) throw ValidationError("--times expects start:step:stop");
    double a = parseDouble(f[0]), h = parseDouble(f[1]), b = parseDouble(f[2]);
    if (!(h > 0) || !(b >= a)) throw ValidationError("--times needs step > 0 and stop >= start");
    auto count = static_cast<long>(std::floor((b - a) / h + 1e-9)) + 1;
    if (count > 1000000) throw ValidationError("--times grid has more than 10^6 points");
    for (long k = 0; k < count; ++k) out.push_back(a + static_cast<double>(k) * h);
    return out;
  }
  for (const auto& f : splitComma(spec)) {
    if (f.empty()) throw ValidationError("--times: empty entry");
    out.push_back(parseDouble(f));
  }
  return out;
}

VerificationReport runVerification(const SolvableKernel& k, int n) {
  k.validate();
  if (n < 1) throw ValidationError("--N must be >= 1");
  auto [wa, wb] = k.weightParameters();
  VerificationReport rep;
  rep.n = n;
  auto add = [&](IdentityCheck c) { rep.identities.push_back(std::move(c)); };

  {
    IdentityCheck c{"weights-recursion-closed-form"};
    auto rec = weightsRecursion(wa, wb, n);
    auto cf = weightsClosedForm(wa, wb, n);
    for (int j = 1; j <= n; ++j, ++c.checks)
      if (rec[j] != cf[j] && c.passed) {
        c.passed = false;
        c.detail = "k=" + std::to_string(j) + ": " + toString(rec[j]) + " vs " + toString(cf[j]);
      }
    add(c);
  }
  GibbsModel model = GibbsModel::solvable(n, wa, wb);
  {
    IdentityCheck c{"bell-direct-product"};
    for (int r = 1; r <= n; ++r, ++c.checks) {
      Rational direct = bellDirect(model.weights(), n, r), product = bellProduct(wa, wb, n, r);
      if (direct != product && c.passed) {
        c.passed = false;
        c.detail = "r=" + std::to_string(r) + ": " + toString(direct) + " vs " + toString(product);
      }
    }
    add(c);
  }
  Kernel kernel = k.toKernel(n);
  {
    IdentityCheck c{"homogeneity"};
    auto h = checkHomogeneity(kernel, n);
    c.checks = h.levels.size();
    c.passed = h.homogeneous;
    if (!h.homogeneous) c.detail = std::to_string(h.totalViolations) + " states differ from their level";
    add(c);
  }
  {
    auto fp = verifyFixedPoint(model, k);
    auto systemCheck = [&](const std::string& name, const std::string& system, bool applicable, std::size_t checks) {
      IdentityCheck c{name};
      c.applicable = applicable;
      c.checks = checks;
      for (const auto& v : fp.violations)
        if (v.system == system) {
          c.passed = false;
          c.detail = "r=" + std::to_string(v.r) + " state " + toCompactString(v.state) + ": " + toString(v.lhs) +
                     " vs " + toString(v.rhs);
          break;
        }
      add(c);
    };
    systemCheck("fixed-point-coagulation", "eq1", fp.eq1Applicable, fp.eq1Checks);
    systemCheck("fixed-point-fragmentation", "eq2", fp.eq2Applicable, fp.eq2Checks);
    systemCheck("walk-detailed-balance", "balance", fp.balanceApplicable, fp.balanceChecks);
    systemCheck("selection-split", "selection-split", fp.selectionSplitChecks > 0, fp.selectionSplitChecks);
    systemCheck("level-rates", "rates", fp.rateChecks > 0, fp.rateChecks);
  }
  {
    IdentityCheck c{"fixed-point-level-totals"};
    auto fp = verifyFixedPoint(model.levels(), kernel);
    c.applicable = fp.eq1Applicable || fp.eq2Applicable;
    c.checks = fp.eq1Checks + fp.eq2Checks;
    c.passed = fp.ok();
    if (!fp.ok()) c.detail = fp.violations.front().system + " at r=" + std::to_string(fp.violations.front().r);
    add(c);
  }
  if (k.hasFragmentation()) {
    IdentityCheck c{"fragmentation-walk-pushforward"};
    auto lv = fragWalkSolve(fragmentationWalk(kernel, n));
    c.checks = lv.size();
    c.detail = firstMismatch(lv, model);
    c.passed = c.detail.empty();
    add(c);
    IdentityCheck s{"selection-split-walk-pushforward"};
    auto ls = fragWalkSolve(gibbsFragmentationWalk(solvableWeights(wa, wb, n), n));
    s.checks = ls.size();
    s.detail = firstMismatch(ls, model);
    s.passed = s.detail.empty();
    add(s);
  }
  bool coagWeightsMatch = k.hasCoagulation() && !k.boundaryCase() &&
                          (!k.splitWeights || (k.splitWeights->first == k.a && k.splitWeights->second == k.b));
  if (coagWeightsMatch) {
    IdentityCheck c{"coagulation-walk-pushforward"};
    auto lv = coagWalkSolve(coagulationWalk(kernel, n));
    c.checks = lv.size();
    c.detail = firstMismatch(lv, model);
    c.passed = c.detail.empty();
    add(c);
  }

  if (n >= 2 && n <= kVerifyNumericMaxN) {
    Generator g(kernel, n);
    const StateSpace& space = g.states();
    auto times = geometricGrid(1e-2, 10.0, 20);
    auto chain = buildChain<Rational>(k, n).toDoubleChain();
    for (const auto& [label, start] : {std::pair{std::string("single-block"), Partition::singleBlock(n)},
                                       std::pair{std::string("singletons"), Partition::singletons(n)}}) {
      auto dists = evolve(g, pointDistribution(space, start), times);
      IdentityCheck f{"factorization-" + label};
      double worst = 0.0;
      for (const auto& dv : dists) {
        auto snap = conditionalSnapshot(space, dv);
        for (int r = 1; r <= n; ++r) {
          const auto& q = snap.conditional[static_cast<std::size_t>(r - 1)];
          if (!q) continue;
          auto [b, e] = space.levelRange(r);
          for (std::size_t s = b; s < e; ++s, ++f.checks)
            worst = std::max(worst, std::abs((*q)[static_cast<Eigen::Index>(s - b)] -
                                             toDouble(model.level(r).at(space[s]))));
        }
      }
      f.passed = worst < kFactorizationTol;
      f.detail = "max |Q - rho| = " + formatDouble(worst);
      add(f);

      IdentityCheck m{"marginal-consistency-" + label};
      Eigen::VectorXd b0 = Eigen::VectorXd::Zero(n);
      b0[start.blockCount() - 1] = 1.0;
      auto marg = marginalEvolve(chain, b0, times);
      double sup = 0.0;
      for (std::size_t t = 0; t < times.size(); ++t) {
        auto snap = conditionalSnapshot(space, dists[t]);
        for (int r = 1; r <= n; ++r, ++m.checks)
          sup = std::max(sup, std::abs(snap.levelMass[static_cast<std::size_t>(r - 1)] - marg[t][r - 1]));
      }
      m.passed = sup < kMarginalTol;
      m.detail = "sup = " + formatDouble(sup);
      add(m);
    }

    IdentityCheck st{"stationary-closed-form"};
    IdentityCheck db{"stationary-detailed-balance"};
    st.applicable = db.applicable = g.irreducible();
    if (st.applicable) {
      try {
        auto res = stationaryMeasure(g, k);
        st.checks = space.size();
        st.detail = res.closedForm ? "max deviation " + formatDouble(res.maxDeviation) : "no closed form";
        st.applicable = res.closedForm.has_value();
        const auto& pi = res.measure->probs;
        double worst = 0.0;
        const auto& q = g.matrix();
        for (const auto& tr : g.transitions()) {
          double forward = pi[static_cast<Eigen::Index>(tr.from)] * toDouble(tr.rate);
          double backward = pi[static_cast<Eigen::Index>(tr.to)] *
                            q.coeff(static_cast<Eigen::Index>(tr.to), static_cast<Eigen::Index>(tr.from));
          worst = std::max(worst, std::abs(forward - backward));
          ++db.checks;
        }
        db.passed = worst < kBalanceTol;
        db.detail = "max |pi q - pi q'| = " + formatDouble(worst);
      } catch (const SolverError& e) {
        st.passed = false;
        st.detail = e.what();
      }
    }
    add(st);
    add(db);
  }

  auto chainR = buildChain<Rational>(k, n);
  IdentityCheck gap{"spectral-gap-bounds"};
  gap.applicable = n >= 2 && isErgodic(chainR);
  if (gap.applicable) {
    try {
      auto g = spectralGap(k, n, false);
      gap.checks = 1;
      gap.passed = g.withinBounds;
      gap.detail = "gap " + formatDouble(g.numericalGap) + " in [" + formatDouble(g.lower) + ", " +
                   formatDouble(g.upper) + "]";
    } catch (const SolverError& e) {
      gap.passed = false;
      gap.detail = e.what();
    }
  }
  add(gap);
  return rep;
}

int dispatch(int argc, char** argv) {
  Context ctx;
  for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);
  Options o;
  CLI::App app{"Coagulation-fragmentation processes on integer partitions", "cfp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CFP_VERSION);
  app.add_flag("--quiet", ctx.log.quiet, "Only report errors on stderr");
  app.add_flag("--json-logs", ctx.log.json, "Log lines on stderr as JSON objects");
  app.fallthrough();

  auto addN = [&](CLI::App* s) { s->add_option("--N", o.n, "System size N")->required(); };
  auto addFormat = [&](CLI::App* s) { s->add_option("--format", o.format, "json or csv")->capture_default_str(); };
  auto addEmit = [&](CLI::App* s) { s->add_option("--emit,--out", o.emit, "Output file (stdout when omitted)"); };
  auto addSolvable = [&](CLI::App* s) {
    s->add_option("--solvable", o.solvable, "Solvable kernel a,b,phi11");
    s->add_option("--split-weights", o.splitWeights, "Weight parameters a,b for the fragmentation rule");
  };
  auto addKernel = [&](CLI::App* s) {
    addSolvable(s);
    s->add_option("--kernel", o.kernelFile, "Kernel table CSV with header i,j,psi,phi");
  };
  auto addTimes = [&](CLI::App* s) {
    s->add_option("--times", o.times, "start:step:stop, geom:lo:hi:count or a comma list")->capture_default_str();
    s->add_option("--method", o.method, "uniformization or rk45")->capture_default_str();
  };

  auto* en = app.add_subcommand("enumerate", "List the partitions of N");
  addN(en);
  en->add_option("--level", o.level, "Only partitions with this many blocks");
  addFormat(en);
  addEmit(en);

  auto* ho = app.add_subcommand("check-homogeneity", "Test whether level totals of K and F are constant");
  addN(ho);
  addKernel(ho);
  addFormat(ho);
  addEmit(ho);

  auto* gi = app.add_subcommand("gibbs", "Weights, Bell polynomials, Gibbs laws and walks");
  addN(gi);
  gi->add_option("--a", o.a, "Weight parameter a");
  gi->add_option("--b", o.b, "Weight parameter b");
  gi->add_option("--phi11", o.phi11, "phi(1,1)")->capture_default_str();
  addSolvable(gi);
  gi->add_option("--emit", o.emit, "rho, bell, weights, walks or asymptotics");
  gi->add_option("--out", o.out, "Output file (stdout when omitted)");
  gi->add_option("--K", o.asymptoticsK, "Number of weights for asymptotics")->capture_default_str();
  addFormat(gi);

  auto* ev = app.add_subcommand("evolve", "Transient law on Omega_N with per-level conditional tables");
  addN(ev);
  addKernel(ev);
  ev->add_option("--init", o.init, "eta-star, zeta-star, a level r, or a partition like '1^2 3^1'")->capture_default_str();
  addTimes(ev);
  addFormat(ev);
  addEmit(ev);

  auto* ma = app.add_subcommand("marginal", "Block-count marginals of a solvable kernel");
  addN(ma);
  addSolvable(ma);
  ma->add_option("--init", o.init, "Starting level r, eta-star, zeta-star or a partition")->capture_default_str();
  addTimes(ma);
  addFormat(ma);
  addEmit(ma);

  auto* sm = app.add_subcommand("stationary", "Stationary measure of the process on Omega_N");
  addN(sm);
  addKernel(sm);
  addFormat(sm);
  addEmit(sm);

  auto* sg = app.add_subcommand("spectral-gap", "Spectral gap of the block-count chain with Zeifman bounds");
  addN(sg);
  addSolvable(sg);
  sg->add_flag("--no-optimize", o.noOptimize, "Skip the delta search");
  sg->add_flag("--compare-process", o.compareProcess, "Also diagonalize the full generator (small N)");
  addFormat(sg);
  addEmit(sg);

  auto* si = app.add_subcommand("simulate", "Gillespie simulation");
  addN(si);
  addKernel(si);
  si->add_option("--init", o.init, "eta-star, zeta-star, singletons, single-block, a level r or a partition")
      ->capture_default_str();
  si->add_option("--T", o.horizon, "Horizon")->capture_default_str();
  si->add_option("--snapshots", o.snapshots, "Comma list of snapshot times (default: T)");
  si->add_option("--traj", o.trajectories, "Number of trajectories")->capture_default_str();
  si->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  si->add_option("--threads", o.threads, "Worker threads (0: all cores)")->capture_default_str();
  si->add_option("--gelation", o.gelation, "Comma list of N for a largest-block scan near stationarity");
  addFormat(si);
  addEmit(si);

  auto* ve = app.add_subcommand("verify", "Exact identity suite for a solvable kernel");
  addN(ve);
  addSolvable(ve);
  addFormat(ve);
  addEmit(ve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ctx.log.error(std::string(e.what()) + " (run with --help for usage)");
    return kExitValidation;
  }

  CLI::App* chosen = app.get_subcommands().front();
  ctx.command = chosen->get_name();
  try {
    if (chosen == en) return cmdEnumerate(ctx, o);
    if (chosen == ho) return cmdHomogeneity(ctx, o);
    if (chosen == gi) return cmdGibbs(ctx, o);
    if (chosen == ev) return cmdEvolve(ctx, o);
    if (chosen == ma) return cmdMarginal(ctx, o);
    if (chosen == sm) return cmdStationary(ctx, o);
    if (chosen == sg) return cmdSpectralGap(ctx, o);
    if (chosen == si) return cmdSimulate(ctx, o);
    if (chosen == ve) return cmdVerify(ctx, o);
  } catch (const CapacityError& e) {
    ctx.log.error(std::string(e.what()) + " (raise CFP_MAX_N to allow larger exact runs)");
    return kExitValidation;
  } catch (const SolverError& e) {
    ctx.log.error(std::string("verification failed: ") + e.what());
    return kExitVerification;
  } catch (const std::invalid_argument& e) {
    ctx.log.error(e.what());
    return kExitValidation;
  } catch (const std::domain_error& e) {
    ctx.log.error(e.what());
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    ctx.log.error(std::string("value out of range: ") + e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    ctx.log.error(std::string("internal error: ") + e.what());
    return kExitVerification;
  }
  return kExitValidation;
}

}  // namespace cfp::cli
