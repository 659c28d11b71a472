#include "qlasso/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace qlasso::io {

namespace {

std::vector<double> parse_csv_line(const std::string& line) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(std::stod(cell));
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Eigen::MatrixXd json_to_matrix(const json& j) {
  const auto rows = j.size();
  if (rows == 0) return {};
  const auto cols = j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j.at(r).at(c).get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(std::move(row));
  }
  return j;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Eigen::VectorXd json_to_vector(const json& j) {
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  }
  return v;
}

}  // namespace

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty csv: " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_csv_line(line));
    if (rows.back().size() != rows.front().size()) {
      throw std::invalid_argument("ragged csv: " + path);
    }
  }
  if (rows.empty()) throw std::invalid_argument("csv has no data rows: " + path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

Eigen::VectorXd read_csv_vector(const std::string& path) {
  const Eigen::MatrixXd m = read_csv_matrix(path);
  if (m.cols() != 1) throw std::invalid_argument("expected a single column: " + path);
  return m.col(0);
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m,
                      std::vector<std::string> header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (header.empty()) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      header.push_back("x" + std::to_string(c + 1));
    }
  }
  for (size_t c = 0; c < header.size(); ++c) {
    out << (c ? "," : "") << header[c];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << (c ? "," : "") << fmt(m(r, c));
    }
    out << '\n';
  }
}

void write_csv_vector(const std::string& path, const Eigen::VectorXd& v,
                      const std::string& name) {
  write_csv_matrix(path, v, {name});
}

json to_json(const FitResult& fit) {
  json j;
  j["beta"] = vector_to_json(fit.beta);
  j["active_set"] = fit.active_set.one_based();
  j["kkt_sup_violation"] = fit.kkt_sup_violation;
  j["sign_consistency_ok"] = fit.sign_consistency_ok;
  j["iterations"] = fit.iterations;
  j["objective"] = fit.objective;
  j["converged"] = fit.converged;
  return j;
}

FitResult fit_result_from_json(const json& j) {
  FitResult fit;
  fit.beta = json_to_vector(j.at("beta"));
  std::vector<Eigen::Index> idx;
  for (const auto& v : j.at("active_set")) idx.push_back(v.get<Eigen::Index>());
  fit.active_set = IndexSet::from_one_based(idx);
  fit.kkt_sup_violation = j.at("kkt_sup_violation").get<double>();
  fit.sign_consistency_ok = j.at("sign_consistency_ok").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  fit.objective = j.at("objective").get<double>();
  fit.converged = j.at("converged").get<bool>();
  return fit;
}

json to_json(const CompatibilityResult& r) {
  json j;
  j["phi_sq"] = r.phi_sq;
  j["minimizer"] = vector_to_json(r.minimizer);
  j["method"] = r.method == CompatibilityMethod::exact_qp_enumeration
                    ? "exact_qp_enumeration"
                    : "projected_search";
  j["certificate_gap"] = r.certificate_gap;
  return j;
}

json to_json(const PreconditionCheck& c) {
  return json{{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs},
              {"satisfied", c.satisfied}};
}

json to_json(const BoundReport& report) {
  json j;
  j["n"] = report.n;
  j["p"] = report.p;
  j["t"] = report.t;
  j["lambda"] = report.lambda;
  j["gamma_eff"] = report.gamma_eff;
  j["constants"] = {
      {"sigma", report.constants.sigma},   {"kappa", report.constants.kappa},
      {"K_X", report.constants.K_X},       {"K_0", report.constants.K_0},
      {"C_h", report.constants.C_h},       {"C_V", report.constants.C_V},
      {"L_h", report.constants.L_h},       {"L_g", report.constants.L_g},
      {"C_hV", report.constants.C_hV()},   {"C_hX", report.constants.C_hX()},
      {"L_hV", report.constants.L_hV()},   {"L_hX", report.constants.L_hX()},
  };
  if (report.constants.C_l) j["constants"]["C_l"] = *report.constants.C_l;
  j["levels"] = {{"lambda_eps", report.levels.lambda_eps},
                 {"lambda_0", report.levels.lambda_0},
                 {"lambda_eps_robust", report.levels.lambda_eps_robust},
                 {"alpha_oracle", report.levels.alpha_oracle},
                 {"alpha_robust", report.levels.alpha_robust},
                 {"alpha_select", report.levels.alpha_select}};
  j["sparsities"] = {{"Gamma", report.sparsities.Gamma},
                     {"Gamma_eps", report.sparsities.Gamma_eps},
                     {"Gamma_0", report.sparsities.Gamma_0},
                     {"Gamma_robust", report.sparsities.Gamma_robust}};
  j["thm2_bounds"] = {{"ell1_bound", report.thm2_bounds.ell1_bound},
                      {"prediction_bound", report.thm2_bounds.prediction_bound}};
  j["preconditions"] = json::array();
  for (const auto& c : report.preconditions) j["preconditions"].push_back(to_json(c));
  return j;
}

BoundReport bound_report_from_json(const json& j) {
  BoundReport r;
  r.n = j.at("n").get<double>();
  r.p = j.at("p").get<double>();
  r.t = j.at("t").get<double>();
  r.lambda = j.at("lambda").get<double>();
  r.gamma_eff = j.at("gamma_eff").get<double>();
  const json& c = j.at("constants");
  r.constants.sigma = c.at("sigma").get<double>();
  r.constants.kappa = c.at("kappa").get<double>();
  r.constants.K_X = c.at("K_X").get<double>();
  r.constants.K_0 = c.at("K_0").get<double>();
  r.constants.C_h = c.at("C_h").get<double>();
  r.constants.C_V = c.at("C_V").get<double>();
  r.constants.L_h = c.at("L_h").get<double>();
  r.constants.L_g = c.at("L_g").get<double>();
  if (c.contains("C_l")) r.constants.C_l = c.at("C_l").get<double>();
  const json& lv = j.at("levels");
  r.levels.lambda_eps = lv.at("lambda_eps").get<double>();
  r.levels.lambda_0 = lv.at("lambda_0").get<double>();
  r.levels.lambda_eps_robust = lv.at("lambda_eps_robust").get<double>();
  r.levels.alpha_oracle = lv.at("alpha_oracle").get<double>();
  r.levels.alpha_robust = lv.at("alpha_robust").get<double>();
  r.levels.alpha_select = lv.at("alpha_select").get<double>();
  const json& sp = j.at("sparsities");
  r.sparsities.Gamma = sp.at("Gamma").get<double>();
  r.sparsities.Gamma_eps = sp.at("Gamma_eps").get<double>();
  r.sparsities.Gamma_0 = sp.at("Gamma_0").get<double>();
  r.sparsities.Gamma_robust = sp.at("Gamma_robust").get<double>();
  r.thm2_bounds.ell1_bound = j.at("thm2_bounds").at("ell1_bound").get<double>();
  r.thm2_bounds.prediction_bound =
      j.at("thm2_bounds").at("prediction_bound").get<double>();
  for (const auto& pc : j.at("preconditions")) {
    r.preconditions.push_back({pc.at("name").get<std::string>(),
                               pc.at("lhs").get<double>(),
                               pc.at("rhs").get<double>(),
                               pc.at("satisfied").get<bool>()});
  }
  return r;
}

json to_json(const RunRecord& record) {
  json j;
  j["replication"] = record.replication;
  j["seed"] = record.seed;
  j["lambda_lib"] = record.lambda_lib;
  j["lambda_thm"] = record.lambda_thm;
  j["prediction_error"] = record.prediction_error;
  j["ell1_error"] = record.ell1_error;
  j["active_set"] = record.active_set_one_based;
  j["true_positives"] = record.true_positives;
  j["false_positives"] = record.false_positives;
  j["K0_realized"] = record.K0_realized;
  j["oracle_prediction_error"] = record.oracle_prediction_error;
  j["oracle_ell1_error"] = record.oracle_ell1_error;
  j["events"] = record.events;
  j["inequalities"] = record.inequalities;
  j["values"] = record.values;
  j["excluded"] = record.excluded;
  j["exclusion_reason"] = record.exclusion_reason;
  return j;
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.replication = j.at("replication").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.lambda_lib = j.at("lambda_lib").get<double>();
  r.lambda_thm = j.at("lambda_thm").get<double>();
  r.prediction_error = j.at("prediction_error").get<double>();
  r.ell1_error = j.at("ell1_error").get<double>();
  for (const auto& v : j.at("active_set")) {
    r.active_set_one_based.push_back(v.get<Eigen::Index>());
  }
  r.true_positives = j.at("true_positives").get<int>();
  r.false_positives = j.at("false_positives").get<int>();
  r.K0_realized = j.at("K0_realized").get<double>();
  r.oracle_prediction_error = j.at("oracle_prediction_error").get<double>();
  r.oracle_ell1_error = j.at("oracle_ell1_error").get<double>();
  r.events = j.at("events").get<std::map<std::string, bool>>();
  r.inequalities = j.at("inequalities").get<std::map<std::string, bool>>();
  r.values = j.at("values").get<std::map<std::string, double>>();
  r.excluded = j.at("excluded").get<bool>();
  r.exclusion_reason = j.at("exclusion_reason").get<std::string>();
  return r;
}

json to_json(const TheoremSummary& ts) {
  json j;
  j["name"] = ts.name;
  j["deterministic"] = ts.deterministic;
  j["records"] = ts.records;
  j["events"] = ts.events;
  j["passes"] = ts.passes;
  if (ts.conditional_pass_rate) {
    j["conditional_pass_rate"] = *ts.conditional_pass_rate;
  } else {
    j["conditional_pass_rate"] = nullptr;  // undefined, not 1
  }
  j["alpha"] = ts.alpha;
  if (ts.violation_fraction) j["violation_fraction"] = *ts.violation_fraction;
  j["violation_allowance"] = ts.violation_allowance;
  j["ok"] = ts.ok;
  return j;
}

json to_json(const Summary& summary) {
  json j;
  j["replications"] = summary.replications;
  j["excluded"] = summary.excluded;
  j["theorems"] = json::array();
  for (const auto& ts : summary.theorems) j["theorems"].push_back(to_json(ts));
  return j;
}

Summary summary_from_json(const json& j) {
  Summary s;
  s.replications = j.at("replications").get<int>();
  s.excluded = j.at("excluded").get<int>();
  for (const auto& t : j.at("theorems")) {
    TheoremSummary ts;
    ts.name = t.at("name").get<std::string>();
    ts.deterministic = t.at("deterministic").get<bool>();
    ts.records = t.at("records").get<int>();
    ts.events = t.at("events").get<int>();
    ts.passes = t.at("passes").get<int>();
    if (!t.at("conditional_pass_rate").is_null()) {
      ts.conditional_pass_rate = t.at("conditional_pass_rate").get<double>();
    }
    ts.alpha = t.at("alpha").get<double>();
    if (t.contains("violation_fraction")) {
      ts.violation_fraction = t.at("violation_fraction").get<double>();
    }
    ts.violation_allowance = t.at("violation_allowance").get<double>();
    ts.ok = t.at("ok").get<bool>();
    s.theorems.push_back(std::move(ts));
  }
  return s;
}

json to_json(const ScalingReport& report) {
  json j;
  j["points"] = json::array();
  for (const auto& pt : report.points) {
    j["points"].push_back({{"n", pt.n},
                           {"p", pt.p},
                           {"s0", pt.s0},
                           {"x_pred", pt.x_pred},
                           {"x_ell1", pt.x_ell1},
                           {"median_prediction_error", pt.median_prediction_error},
                           {"median_ell1_error", pt.median_ell1_error}});
  }
  j["prediction_slope"] = report.prediction_slope;
  j["ell1_slope"] = report.ell1_slope;
  return j;
}

namespace {

const std::map<std::string, DesignLaw> kDesignLaws = {
    {"fixed", DesignLaw::fixed},
    {"iid_gaussian", DesignLaw::iid_gaussian},
    {"bounded_uniform", DesignLaw::bounded_uniform}};
const std::map<std::string, ErrorLaw> kErrorLaws = {
    {"gaussian", ErrorLaw::gaussian},
    {"scaled_t", ErrorLaw::scaled_t},
    {"model_induced", ErrorLaw::model_induced}};
const std::map<std::string, LambdaRule> kLambdaRules = {
    {"fixed", LambdaRule::fixed_value},
    {"scaled", LambdaRule::scaled_logp_over_n},
    {"theory", LambdaRule::theory_lambda_eps},
    {"theory_robust", LambdaRule::theory_lambda_robust},
    {"event_margin", LambdaRule::event_margin}};
const std::map<std::string, SupportRule> kSupportRules = {
    {"random", SupportRule::random_support},
    {"first", SupportRule::first_coordinates}};

template <typename T>
std::string enum_name(const std::map<std::string, T>& names, T value) {
  for (const auto& [k, v] : names) {
    if (v == value) return k;
  }
  return "?";
}

template <typename T>
T enum_value(const std::map<std::string, T>& names, const std::string& key,
             const char* what) {
  const auto it = names.find(key);
  if (it == names.end()) {
    throw std::invalid_argument(std::string("unknown ") + what + ": " + key);
  }
  return it->second;
}

}  // namespace

json to_json(const ScenarioConfig& config) {
  json j;
  j["n"] = config.n;
  j["p"] = config.p;
  j["s0"] = config.s0;
  j["family"] = config.family_spec;
  j["design_law"] = enum_name(kDesignLaws, config.design_law);
  if (config.design_law == DesignLaw::fixed) {
    j["fixed_rows"] = matrix_to_json(config.fixed_rows);
    if (config.fixed_multiplicities.size()) {
      j["fixed_multiplicities"] = vector_to_json(config.fixed_multiplicities);
    }
  }
  if (config.gaussian_covariance.size()) {
    j["gaussian_covariance"] = matrix_to_json(config.gaussian_covariance);
  }
  j["design_bound"] = config.design_bound;
  j["support_rule"] = enum_name(kSupportRules, config.support_rule);
  j["beta_magnitude"] = config.beta_magnitude;
  j["random_signs"] = config.random_signs;
  j["error_law"] = enum_name(kErrorLaws, config.error_law);
  j["noise_sigma"] = config.noise_sigma;
  j["t_df"] = config.t_df;
  j["lambda_rule"] = enum_name(kLambdaRules, config.lambda_rule);
  j["lambda_value"] = config.lambda_value;
  j["lambda_scale"] = config.lambda_scale;
  j["event_margin"] = config.event_margin;
  j["lambda_is_ls_normalized"] = config.lambda_is_ls_normalized;
  j["t"] = config.t;
  j["replications"] = config.replications;
  j["master_seed"] = config.master_seed;
  j["checks"] = config.checks;
  j["threads"] = config.threads;
  return j;
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c;
  c.n = j.value("n", c.n);
  c.p = j.value("p", c.p);
  c.s0 = j.value("s0", c.s0);
  c.family_spec = j.value("family", c.family_spec);
  if (j.contains("design_law")) {
    c.design_law = enum_value(kDesignLaws, j.at("design_law"), "design law");
  }
  if (j.contains("fixed_rows")) c.fixed_rows = json_to_matrix(j.at("fixed_rows"));
  if (j.contains("fixed_multiplicities")) {
    c.fixed_multiplicities = json_to_vector(j.at("fixed_multiplicities"));
  }
  if (j.contains("gaussian_covariance")) {
    c.gaussian_covariance = json_to_matrix(j.at("gaussian_covariance"));
  }
  c.design_bound = j.value("design_bound", c.design_bound);
  if (j.contains("support_rule")) {
    c.support_rule = enum_value(kSupportRules, j.at("support_rule"), "support rule");
  }
  c.beta_magnitude = j.value("beta_magnitude", c.beta_magnitude);
  c.random_signs = j.value("random_signs", c.random_signs);
  if (j.contains("error_law")) {
    c.error_law = enum_value(kErrorLaws, j.at("error_law"), "error law");
  }
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.t_df = j.value("t_df", c.t_df);
  if (j.contains("lambda_rule")) {
    c.lambda_rule = enum_value(kLambdaRules, j.at("lambda_rule"), "lambda rule");
  }
  c.lambda_value = j.value("lambda_value", c.lambda_value);
  c.lambda_scale = j.value("lambda_scale", c.lambda_scale);
  c.event_margin = j.value("event_margin", c.event_margin);
  c.lambda_is_ls_normalized =
      j.value("lambda_is_ls_normalized", c.lambda_is_ls_normalized);
  c.t = j.value("t", c.t);
  c.replications = j.value("replications", c.replications);
  c.master_seed = j.value("master_seed", c.master_seed);
  if (j.contains("checks")) {
    c.checks = j.at("checks").get<std::vector<std::string>>();
  }
  c.threads = j.value("threads", c.threads);
  return c;
}

ScenarioConfig read_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  json j;
  in >> j;
  return scenario_from_json(j);
}

std::string precondition_table(const std::vector<PreconditionCheck>& checks) {
  std::ostringstream os;
  os << "condition              lhs                    rhs                    status\n";
  for (const auto& c : checks) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s %-22.15g %-22.15g %s\n",
                  c.name.c_str(), c.lhs, c.rhs, c.satisfied ? "PASS" : "FAIL");
    os << line;
  }
  return os.str();
}

std::string summary_table(const Summary& summary) {
  std::ostringstream os;
  os << "theorem  events/records  pass-rate   alpha        violation  status\n";
  for (const auto& ts : summary.theorems) {
    char rate[32];
    if (ts.conditional_pass_rate) {
      std::snprintf(rate, sizeof(rate), "%.6f", *ts.conditional_pass_rate);
    } else {
      std::snprintf(rate, sizeof(rate), "undefined");
    }
    char viol[32];
    if (ts.violation_fraction) {
      std::snprintf(viol, sizeof(viol), "%.6f", *ts.violation_fraction);
    } else {
      std::snprintf(viol, sizeof(viol), "-");
    }
    char line[200];
    std::snprintf(line, sizeof(line), "%-8s %5d/%-8d  %-10s  %-11.3g  %-9s  %s\n",
                  ts.name.c_str(), ts.events, ts.records, rate, ts.alpha, viol,
                  ts.ok ? "OK" : "CHECK");
    os << line;
  }
  os << "excluded replications: " << summary.excluded << "/"
     << summary.replications << "\n";
  return os.str();
}

}  // namespace qlasso::io
