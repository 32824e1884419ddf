#include "cfp/io.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "cfp/errors.hpp"

namespace cfp {

std::string formatDouble(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parseDouble(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ValidationError("not a number: '" + std::string(text) + "'");
  return x;
}

void putRational(Json& obj, const std::string& key, const Rational& q) {
  obj[key] = toString(q);
  obj[key + "_float"] = doubleJson(toDouble(q));
}

Json doubleJson(double x) {
  if (!std::isfinite(x)) return formatDouble(x);
  return x;
}

std::string dumpJson(const Json& j) { return j.dump(2) + "\n"; }

Json parseJson(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

namespace {

bool needsQuoting(const std::string& cell) { return cell.find_first_of(",\"\r\n") != std::string::npos; }

void appendCell(std::string& out, const std::string& cell) {
  if (!needsQuoting(cell)) {
    out += cell;
    return;
  }
  out += '"';
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

void appendRow(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    appendCell(out, row[i]);
  }
  out += '\n';
}

std::string q(const Rational& x) { return toString(x); }
std::string d(double x) { return formatDouble(x); }
std::string i2s(long long x) { return std::to_string(x); }

}  // namespace

std::string writeCsv(const CsvTable& t) {
  std::string out;
  appendRow(out, t.header);
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw ValidationError("CSV row width differs from header");
    appendRow(out, row);
  }
  return out;
}

CsvTable readCsv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, inQuotes = false, dirty = false;
  for (std::size_t k = 0; k < text.size(); ++k) {
    char c = text[k];
    if (inQuotes) {
      if (c == '"') {
        if (k + 1 < text.size() && text[k + 1] == '"') {
          cell += '"';
          ++k;
        } else {
          inQuotes = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      if (!cell.empty() || quoted) throw ValidationError("CSV: stray quote");
      inQuotes = quoted = dirty = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      quoted = false;
      dirty = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
      if (dirty || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      quoted = dirty = false;
    } else {
      if (quoted) throw ValidationError("CSV: text after closing quote");
      cell += c;
      dirty = true;
    }
  }
  if (inQuotes) throw ValidationError("CSV: unterminated quote");
  if (dirty || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("CSV: missing header");
  CsvTable t{std::move(rows.front()), {}};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != t.header.size())
      throw ValidationError("CSV: row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                            " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(rows[r]));
  }
  return t;
}

Json partitionJson(const Partition& p) {
  Json j;
  j["compact"] = toCompactString(p);
  j["blocks"] = p.blockCount();
  j["counts"] = p.counts();
  return j;
}

Json enumerateJson(int n, const std::vector<Partition>& states) {
  Json j;
  j["N"] = n;
  j["count"] = states.size();
  Json arr = Json::array();
  for (const auto& s : states) arr.push_back(partitionJson(s));
  j["states"] = std::move(arr);
  return j;
}

CsvTable enumerateCsv(const std::vector<Partition>& states) {
  CsvTable t{{"index", "blocks", "partition"}, {}};
  for (std::size_t k = 0; k < states.size(); ++k)
    t.rows.push_back({i2s(static_cast<long long>(k)), i2s(states[k].blockCount()), toCompactString(states[k])});
  return t;
}

Json homogeneityJson(const HomogeneityReport& rep, const std::string& kernelLabel) {
  Json j;
  j["N"] = rep.n;
  j["kernel"] = kernelLabel;
  j["verdict"] = rep.homogeneous ? "homogeneous" : "inhomogeneous";
  j["violations"] = rep.totalViolations;
  Json levels = Json::array();
  for (const auto& l : rep.levels) {
    Json e;
    e["r"] = l.r;
    e["coag_constant"] = l.coagConstant;
    e["frag_constant"] = l.fragConstant;
    putRational(e, "coag_total", l.coagTotal);
    putRational(e, "frag_total", l.fragTotal);
    e["violations"] = l.violations;
    levels.push_back(std::move(e));
  }
  j["levels"] = std::move(levels);
  Json wit = Json::array();
  for (const auto& w : rep.witnesses) {
    Json e;
    e["r"] = w.r;
    e["rate"] = w.coagulation ? "coagulation" : "fragmentation";
    e["reference"] = toCompactString(w.reference);
    e["other"] = toCompactString(w.other);
    putRational(e, "reference_value", w.referenceValue);
    putRational(e, "other_value", w.otherValue);
    wit.push_back(std::move(e));
  }
  j["witnesses"] = std::move(wit);
  return j;
}

CsvTable homogeneityCsv(const HomogeneityReport& rep) {
  CsvTable t{{"r", "rate", "reference", "other", "reference_value", "other_value"}, {}};
  for (const auto& w : rep.witnesses)
    t.rows.push_back({i2s(w.r), w.coagulation ? "coagulation" : "fragmentation", toCompactString(w.reference),
                      toCompactString(w.other), q(w.referenceValue), q(w.otherValue)});
  return t;
}

namespace {
void putParameters(Json& j, const GibbsModel& model) {
  j["N"] = model.n();
  if (model.parameters()) {
    j["a"] = toString(model.parameters()->first);
    j["b"] = toString(model.parameters()->second);
  }
}
}  // namespace

Json weightsJson(const GibbsModel& model) {
  Json j;
  putParameters(j, model);
  Json arr = Json::array();
  for (int k = 1; k <= model.n(); ++k) {
    Json e;
    e["k"] = k;
    putRational(e, "a_k", model.weights()[static_cast<std::size_t>(k - 1)]);
    arr.push_back(std::move(e));
  }
  j["weights"] = std::move(arr);
  return j;
}

CsvTable weightsCsv(const GibbsModel& model) {
  CsvTable t{{"k", "a_k", "a_k_float"}, {}};
  for (int k = 1; k <= model.n(); ++k) {
    const auto& w = model.weights()[static_cast<std::size_t>(k - 1)];
    t.rows.push_back({i2s(k), q(w), d(toDouble(w))});
  }
  return t;
}

Json bellJson(const GibbsModel& model) {
  Json j;
  putParameters(j, model);
  Json arr = Json::array();
  for (int r = 1; r <= model.n(); ++r) {
    Json e;
    e["r"] = r;
    putRational(e, "B", model.bell(r));
    arr.push_back(std::move(e));
  }
  j["bell"] = std::move(arr);
  return j;
}

CsvTable bellCsv(const GibbsModel& model) {
  CsvTable t{{"r", "B", "B_float"}, {}};
  for (int r = 1; r <= model.n(); ++r) t.rows.push_back({i2s(r), q(model.bell(r)), d(toDouble(model.bell(r)))});
  return t;
}

Json levelJson(const LevelDistribution& level) {
  Json j;
  j["r"] = level.r;
  Json arr = Json::array();
  for (std::size_t s = 0; s < level.states.size(); ++s) {
    Json e;
    e["state"] = toCompactString(level.states[s]);
    putRational(e, "p", level.probs[s]);
    arr.push_back(std::move(e));
  }
  j["states"] = std::move(arr);
  return j;
}

Json rhoJson(const GibbsModel& model) {
  Json j;
  putParameters(j, model);
  Json arr = Json::array();
  for (const auto& l : model.levels()) arr.push_back(levelJson(l));
  j["levels"] = std::move(arr);
  return j;
}

CsvTable rhoCsv(const GibbsModel& model) {
  CsvTable t{{"r", "state", "p", "p_float"}, {}};
  for (const auto& l : model.levels())
    for (std::size_t s = 0; s < l.states.size(); ++s)
      t.rows.push_back({i2s(l.r), toCompactString(l.states[s]), q(l.probs[s]), d(toDouble(l.probs[s]))});
  return t;
}

Json walkJson(const WalkTable& walk) {
  Json j;
  j["direction"] = walk.direction == MoveKind::Coagulate ? "coagulation" : "fragmentation";
  j["N"] = walk.space->n();
  Json arr = Json::array();
  for (std::size_t s = 0; s < walk.rows.size(); ++s)
    for (const auto& [to, p] : walk.rows[s]) {
      Json e;
      e["from"] = toCompactString((*walk.space)[s]);
      e["to"] = toCompactString((*walk.space)[to]);
      putRational(e, "p", p);
      arr.push_back(std::move(e));
    }
  j["transitions"] = std::move(arr);
  return j;
}

CsvTable walkCsv(const WalkTable& walk) {
  CsvTable t{{"from", "to", "p", "p_float"}, {}};
  for (std::size_t s = 0; s < walk.rows.size(); ++s)
    for (const auto& [to, p] : walk.rows[s])
      t.rows.push_back({toCompactString((*walk.space)[s]), toCompactString((*walk.space)[to]), q(p), d(toDouble(p))});
  return t;
}

Json fixedPointJson(const FixedPointReport& rep) {
  Json j;
  j["N"] = rep.n;
  j["ok"] = rep.ok();
  Json checks;
  auto system = [&](const char* name, bool applicable, std::size_t count) {
    Json e;
    e["applicable"] = applicable;
    e["checks"] = count;
    checks[name] = std::move(e);
  };
  system("coagulation_fixed_point", rep.eq1Applicable, rep.eq1Checks);
  system("fragmentation_fixed_point", rep.eq2Applicable, rep.eq2Checks);
  system("detailed_balance", rep.balanceApplicable, rep.balanceChecks);
  system("selection_split", rep.selectionSplitChecks > 0, rep.selectionSplitChecks);
  system("level_rates", rep.rateChecks > 0, rep.rateChecks);
  j["checks"] = std::move(checks);
  Json v = Json::array();
  for (const auto& x : rep.violations) {
    Json e;
    e["system"] = x.system;
    e["r"] = x.r;
    e["state"] = toCompactString(x.state);
    if (x.partner) e["partner"] = toCompactString(*x.partner);
    putRational(e, "lhs", x.lhs);
    putRational(e, "rhs", x.rhs);
    v.push_back(std::move(e));
  }
  j["violations"] = std::move(v);
  return j;
}

Json snapshotJson(const StateSpace& space, const ConditionalSnapshot& snap) {
  Json j;
  j["t"] = doubleJson(snap.t);
  Json levels = Json::array();
  for (int r = 1; r <= space.n(); ++r) {
    Json e;
    e["r"] = r;
    e["mass"] = doubleJson(snap.levelMass[static_cast<std::size_t>(r - 1)]);
    const auto& cond = snap.conditional[static_cast<std::size_t>(r - 1)];
    if (cond) {
      auto [b, end] = space.levelRange(r);
      Json q = Json::array();
      for (std::size_t s = b; s < end; ++s) {
        Json st;
        st["state"] = toCompactString(space[s]);
        st["Q"] = doubleJson((*cond)[static_cast<Eigen::Index>(s - b)]);
        q.push_back(std::move(st));
      }
      e["Q"] = std::move(q);
    } else {
      e["Q"] = nullptr;
    }
    levels.push_back(std::move(e));
  }
  j["levels"] = std::move(levels);
  return j;
}

CsvTable snapshotsCsv(const StateSpace& space, const std::vector<ConditionalSnapshot>& snaps) {
  CsvTable t{{"t", "r", "level_mass", "state", "Q"}, {}};
  for (const auto& snap : snaps)
    for (int r = 1; r <= space.n(); ++r) {
      const auto& cond = snap.conditional[static_cast<std::size_t>(r - 1)];
      if (!cond) continue;
      auto [b, end] = space.levelRange(r);
      for (std::size_t s = b; s < end; ++s)
        t.rows.push_back({d(snap.t), i2s(r), d(snap.levelMass[static_cast<std::size_t>(r - 1)]),
                          toCompactString(space[s]), d((*cond)[static_cast<Eigen::Index>(s - b)])});
    }
  return t;
}

Json marginalJson(std::span<const double> times, const std::vector<Eigen::VectorXd>& marginals) {
  Json j;
  Json arr = Json::array();
  for (std::size_t k = 0; k < times.size(); ++k) {
    Json e;
    e["t"] = doubleJson(times[k]);
    Json b = Json::array();
    for (Eigen::Index r = 0; r < marginals[k].size(); ++r) b.push_back(doubleJson(marginals[k][r]));
    e["b"] = std::move(b);
    arr.push_back(std::move(e));
  }
  j["N"] = marginals.empty() ? 0 : marginals.front().size();
  j["snapshots"] = std::move(arr);
  return j;
}

CsvTable marginalCsv(std::span<const double> times, const std::vector<Eigen::VectorXd>& marginals) {
  CsvTable t{{"t", "r", "b"}, {}};
  for (std::size_t k = 0; k < times.size(); ++k)
    for (Eigen::Index r = 0; r < marginals[k].size(); ++r)
      t.rows.push_back({d(times[k]), i2s(r + 1), d(marginals[k][r])});
  return t;
}

Json stationaryJson(const StateSpace& space, const StationaryResult& res) {
  Json j;
  j["N"] = space.n();
  j["ergodic"] = res.ergodic;
  if (!res.ergodic) {
    Json abs = Json::array();
    for (const auto& p : res.absorbing) abs.push_back(toCompactString(p));
    j["absorbing"] = std::move(abs);
    return j;
  }
  if (res.partitionFunction) putRational(j, "partition_function", *res.partitionFunction);
  j["max_deviation"] = doubleJson(res.maxDeviation);
  Json arr = Json::array();
  for (std::size_t s = 0; s < space.size(); ++s) {
    Json e;
    e["state"] = toCompactString(space[s]);
    e["p"] = doubleJson(res.measure->probs[static_cast<Eigen::Index>(s)]);
    if (res.closedForm) putRational(e, "closed_form", (*res.closedForm)[s]);
    arr.push_back(std::move(e));
  }
  j["states"] = std::move(arr);
  return j;
}

CsvTable stationaryCsv(const StateSpace& space, const StationaryResult& res) {
  CsvTable t{{"state", "p", "closed_form"}, {}};
  if (!res.ergodic) {
    t.header = {"absorbing"};
    for (const auto& p : res.absorbing) t.rows.push_back({toCompactString(p)});
    return t;
  }
  for (std::size_t s = 0; s < space.size(); ++s)
    t.rows.push_back({toCompactString(space[s]), d(res.measure->probs[static_cast<Eigen::Index>(s)]),
                      res.closedForm ? q((*res.closedForm)[s]) : ""});
  return t;
}

Json gapJson(int n, const GapReport& rep, const ZeifmanResult<double>& unit) {
  Json j;
  j["N"] = n;
  j["gap"] = doubleJson(rep.numericalGap);
  j["lower"] = doubleJson(rep.lower);
  j["upper"] = doubleJson(rep.upper);
  j["within_bounds"] = rep.withinBounds;
  if (rep.exact) j["exact"] = doubleJson(*rep.exact);
  Json a = Json::array();
  for (double x : unit.alphas) a.push_back(doubleJson(x));
  j["alphas"] = std::move(a);
  if (rep.optimized) {
    Json o;
    o["lower"] = doubleJson(rep.optimized->result.min);
    o["upper"] = doubleJson(rep.optimized->result.max);
    o["sweeps"] = rep.optimized->sweeps;
    Json dl = Json::array();
    for (double x : rep.optimized->deltas) dl.push_back(doubleJson(x));
    o["deltas"] = std::move(dl);
    j["optimized"] = std::move(o);
  }
  return j;
}

CsvTable gapCsv(const ZeifmanResult<double>& unit, const GapReport& rep) {
  CsvTable t{{"r", "alpha_unit", "alpha_optimized"}, {}};
  for (std::size_t r = 0; r < unit.alphas.size(); ++r)
    t.rows.push_back({i2s(static_cast<long long>(r + 1)), d(unit.alphas[r]),
                      rep.optimized ? d(rep.optimized->result.alphas[r]) : ""});
  return t;
}

Json statsJson(const TrajectoryStats& stats) {
  Json j;
  j["N"] = stats.n;
  j["seed"] = stats.baseSeed;
  j["seed_mixing"] = "splitmix64(seed + (i+1) * 0x9E3779B97F4A7C15) seeds mt19937_64 for trajectory i";
  j["trajectories"] = stats.trajectories;
  j["events"] = stats.events;
  j["parked"] = stats.parked;
  Json snaps = Json::array();
  for (const auto& s : stats.snapshots) {
    Json e;
    e["t"] = doubleJson(s.t);
    Json lv = Json::array();
    for (std::size_t r = 0; r < s.levelCounts.size(); ++r) {
      if (s.levelCounts[r] == 0) continue;
      Json l;
      l["r"] = r + 1;
      l["count"] = s.levelCounts[r];
      l["p"] = doubleJson(s.levelProb[r]);
      l["se"] = doubleJson(s.levelSE[r]);
      lv.push_back(std::move(l));
    }
    e["levels"] = std::move(lv);
    Json big;
    big["mean"] = doubleJson(s.largestMean);
    big["se"] = doubleJson(s.largestSE);
    big["q10"] = s.largestQ10;
    big["median"] = s.largestMedian;
    big["q90"] = s.largestQ90;
    e["largest_block"] = std::move(big);
    if (s.stateCounts && stats.space) {
      Json st = Json::array();
      for (std::size_t k = 0; k < s.stateCounts->size(); ++k) {
        if ((*s.stateCounts)[k] == 0) continue;
        Json x;
        x["state"] = toCompactString((*stats.space)[k]);
        x["count"] = (*s.stateCounts)[k];
        st.push_back(std::move(x));
      }
      e["states"] = std::move(st);
    }
    snaps.push_back(std::move(e));
  }
  j["snapshots"] = std::move(snaps);
  return j;
}

CsvTable statsCsv(const TrajectoryStats& stats) {
  CsvTable t{{"t", "r", "count", "p", "se"}, {}};
  for (const auto& s : stats.snapshots)
    for (std::size_t r = 0; r < s.levelCounts.size(); ++r)
      t.rows.push_back({d(s.t), i2s(static_cast<long long>(r + 1)), i2s(s.levelCounts[r]), d(s.levelProb[r]),
                        d(s.levelSE[r])});
  return t;
}

Json asymptoticsJson(const AsymptoticsReport& rep) {
  Json j;
  j["a"] = toString(rep.a);
  j["b"] = toString(rep.b);
  j["class"] = rep.weightClass == WeightClass::Convergent ? "convergent" : "expansive";
  j["alpha"] = doubleJson(rep.alpha);
  j["growth"] = doubleJson(rep.growth);
  j["estimated_alpha"] = doubleJson(rep.estimatedAlpha);
  j["log_domain"] = rep.logDomain;
  Json rows = Json::array();
  for (const auto& r : rep.rows) {
    Json e;
    e["k"] = r.k;
    e["log_weight"] = doubleJson(r.logWeight);
    e["weight"] = doubleJson(r.weight);
    e["ratio"] = doubleJson(r.ratio);
    e["normalized"] = doubleJson(r.normalized);
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  return j;
}

CsvTable asymptoticsCsv(const AsymptoticsReport& rep) {
  CsvTable t{{"k", "log_weight", "weight", "ratio", "normalized"}, {}};
  for (const auto& r : rep.rows) t.rows.push_back({i2s(r.k), d(r.logWeight), d(r.weight), d(r.ratio), d(r.normalized)});
  return t;
}

Json gelationJson(const GelationScan& scan) {
  Json j;
  j["alpha"] = doubleJson(scan.alpha);
  Json rows = Json::array();
  for (const auto& r : scan.rows) {
    Json e;
    e["N"] = r.n;
    e["t"] = doubleJson(r.t);
    e["mean_largest"] = doubleJson(r.meanLargest);
    e["se_largest"] = doubleJson(r.seLargest);
    e["fraction_of_N"] = doubleJson(r.fractionOfN);
    e["threshold_scale"] = doubleJson(r.thresholdScale);
    e["fraction_of_threshold"] = doubleJson(r.fractionOfThreshold);
    rows.push_back(std::move(e));
  }
  j["rows"] = std::move(rows);
  return j;
}

CsvTable gelationCsv(const GelationScan& scan) {
  CsvTable t{{"N", "t", "mean_largest", "se_largest", "fraction_of_N", "threshold_scale", "fraction_of_threshold"}, {}};
  for (const auto& r : scan.rows)
    t.rows.push_back({i2s(r.n), d(r.t), d(r.meanLargest), d(r.seLargest), d(r.fractionOfN), d(r.thresholdScale),
                      d(r.fractionOfThreshold)});
  return t;
}

}  // namespace cfp
