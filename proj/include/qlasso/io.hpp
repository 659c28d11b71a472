#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "qlasso/calibration.hpp"
#include "qlasso/design.hpp"
#include "qlasso/simulation.hpp"
#include "qlasso/solver.hpp"

namespace qlasso::io {

using json = nlohmann::json;

// CSV with a header row, comma separated, full double precision.
Eigen::MatrixXd read_csv_matrix(const std::string& path);
Eigen::VectorXd read_csv_vector(const std::string& path);
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m,
                      std::vector<std::string> header = {});
void write_csv_vector(const std::string& path, const Eigen::VectorXd& v,
                      const std::string& name = "value");

json to_json(const FitResult& fit);
FitResult fit_result_from_json(const json& j);

json to_json(const CompatibilityResult& r);
json to_json(const PreconditionCheck& c);
json to_json(const BoundReport& report);
BoundReport bound_report_from_json(const json& j);
json to_json(const RunRecord& record);
RunRecord run_record_from_json(const json& j);
json to_json(const TheoremSummary& ts);
json to_json(const Summary& summary);
Summary summary_from_json(const json& j);
json to_json(const ScalingReport& report);

json to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const json& j);
ScenarioConfig read_scenario_file(const std::string& path);

std::string precondition_table(const std::vector<PreconditionCheck>& checks);
std::string summary_table(const Summary& summary);

}  // namespace qlasso::io
