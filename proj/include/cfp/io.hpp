#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfp/birth_death.hpp"
#include "cfp/exact.hpp"
#include "cfp/gibbs.hpp"
#include "cfp/kernels.hpp"
#include "cfp/partitions.hpp"
#include "cfp/simulate.hpp"

namespace cfp {

/// Insertion-ordered so emitted files keep a stable, readable layout.
using Json = nlohmann::ordered_json;

/// Shortest decimal that reads back to the same double; non-finite values as "inf", "-inf", "nan".
std::string formatDouble(double x);
/// Inverse of formatDouble.
double parseDouble(std::string_view text);

/// obj[key] = "p/q" and obj[key + "_float"] = its double.
void putRational(Json& obj, const std::string& key, const Rational& q);
/// Numbers as JSON numbers; non-finite ones as formatDouble strings.
Json doubleJson(double x);

std::string dumpJson(const Json& j);  // two-space indent, trailing newline
Json parseJson(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::string writeCsv(const CsvTable& t);
/// Strict reader: header row required, every row the same width, RFC 4180 quoting.
CsvTable readCsv(std::string_view text);

Json partitionJson(const Partition& p);

Json enumerateJson(int n, const std::vector<Partition>& states);
CsvTable enumerateCsv(const std::vector<Partition>& states);

Json homogeneityJson(const HomogeneityReport& rep, const std::string& kernelLabel);
CsvTable homogeneityCsv(const HomogeneityReport& rep);

Json weightsJson(const GibbsModel& model);
CsvTable weightsCsv(const GibbsModel& model);
Json bellJson(const GibbsModel& model);
CsvTable bellCsv(const GibbsModel& model);
Json levelJson(const LevelDistribution& level);
Json rhoJson(const GibbsModel& model);
CsvTable rhoCsv(const GibbsModel& model);
Json walkJson(const WalkTable& walk);
CsvTable walkCsv(const WalkTable& walk);

Json fixedPointJson(const FixedPointReport& rep);

Json snapshotJson(const StateSpace& space, const ConditionalSnapshot& snap);
CsvTable snapshotsCsv(const StateSpace& space, const std::vector<ConditionalSnapshot>& snaps);

Json marginalJson(std::span<const double> times, const std::vector<Eigen::VectorXd>& marginals);
CsvTable marginalCsv(std::span<const double> times, const std::vector<Eigen::VectorXd>& marginals);

Json stationaryJson(const StateSpace& space, const StationaryResult& res);
CsvTable stationaryCsv(const StateSpace& space, const StationaryResult& res);

Json gapJson(int n, const GapReport& rep, const ZeifmanResult<double>& unit);
CsvTable gapCsv(const ZeifmanResult<double>& unit, const GapReport& rep);

Json statsJson(const TrajectoryStats& stats);
CsvTable statsCsv(const TrajectoryStats& stats);

Json asymptoticsJson(const AsymptoticsReport& rep);
CsvTable asymptoticsCsv(const AsymptoticsReport& rep);

Json gelationJson(const GelationScan& scan);
CsvTable gelationCsv(const GelationScan& scan);

}  // namespace cfp
