#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qlasso/calibration.hpp"
#include "qlasso/design.hpp"
#include "qlasso/solver.hpp"

namespace qlasso {

enum class DesignLaw { fixed, iid_gaussian, bounded_uniform };
enum class ErrorLaw { gaussian, scaled_t, model_induced };
enum class LambdaRule {
  fixed_value,
  scaled_logp_over_n,   // c * sqrt(log p / n)
  theory_lambda_eps,    // 4 * lambda_eps(t)
  theory_lambda_robust, // 4 * lambda_eps_robust(t)
  event_margin          // (1 + margin) * 4 max_j |eps' X_j| / n  (least squares)
};
enum class SupportRule { random_support, first_coordinates };

struct ScenarioConfig {
  std::int64_t n = 100;
  int p = 2;
  int s0 = 1;
  std::string family_spec = "gaussian";

  DesignLaw design_law = DesignLaw::iid_gaussian;
  Eigen::MatrixXd fixed_rows;            // used when design_law == fixed
  Eigen::VectorXd fixed_multiplicities;  // optional; must sum to n
  Eigen::MatrixXd gaussian_covariance;   // optional row covariance, default I
  double design_bound = 1.0;             // K_X for bounded_uniform

  SupportRule support_rule = SupportRule::random_support;
  double beta_magnitude = 1.0;
  bool random_signs = true;

  ErrorLaw error_law = ErrorLaw::gaussian;
  double noise_sigma = 1.0;
  int t_df = 5;  // scaled-t degrees of freedom, >= 5

  LambdaRule lambda_rule = LambdaRule::fixed_value;
  double lambda_value = 0.1;
  double lambda_scale = 1.0;
  double event_margin = 0.25;
  // interpret lambda in the ||Y - X b||_n^2 + lambda ||b||_1 objective and
  // solve with lambda/2 (used by the thm1/thm5 style checks)
  bool lambda_is_ls_normalized = false;

  double t = -1.0;  // < 0 means t = log n
  int replications = 100;
  std::uint64_t master_seed = 1;
  std::vector<std::string> checks;  // any of: thm1 thm2 thm4 thm5 thm7 tp
  int threads = 0;                  // 0 = hardware concurrency

  CompatibilityOptions compat;
  SolverConfig solver;

  double effective_t() const {
    return t < 0.0 ? std::log(static_cast<double>(n)) : t;
  }
  bool has_check(const std::string& name) const;
  void validate() const;
};

// One synthetic data set. Rows may carry multiplicities (grouped designs);
// the sufficient statistics below are exact for the expanded n-row problem.
struct Instance {
  DesignMatrix design;            // distinct rows
  Eigen::VectorXd multiplicities; // sums to n
  Eigen::VectorXd beta0;
  IndexSet support;
  Eigen::VectorXd response_mean;  // group means of Y
  Eigen::VectorXd eps_group_sum;  // per-row sums of eps_i
  double K0_realized = 0.0;
  double sigma_cond = 0.0;   // max_i sd(eps_i)
  double kappa4_cond = 0.0;  // (1/n) sum Var(eps_i^2)
  double weight_total = 0.0;

  // eps' X_j / n for every column
  Eigen::VectorXd noise_correlations() const;
};

struct RunRecord {
  int replication = 0;
  std::uint64_t seed = 0;
  double lambda_lib = 0.0;  // penalty handed to the solver
  double lambda_thm = 0.0;  // penalty in the theorem normalization
  double prediction_error = 0.0;
  double ell1_error = 0.0;
  std::vector<Eigen::Index> active_set_one_based;
  int true_positives = 0;
  int false_positives = 0;
  double K0_realized = 0.0;
  double oracle_prediction_error = std::numeric_limits<double>::quiet_NaN();
  double oracle_ell1_error = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, bool> events;        // per-theorem hypothesis/event flags
  std::map<std::string, bool> inequalities;  // per-theorem conclusion flags
  std::map<std::string, double> values;      // realized statistics, lhs/rhs pairs
  bool excluded = false;
  std::string exclusion_reason;
};

struct TheoremSummary {
  std::string name;
  bool deterministic = false;
  int records = 0;
  int events = 0;  // runs where the hypotheses/event hold
  int passes = 0;  // among those, runs where the conclusion holds
  std::optional<double> conditional_pass_rate;  // undefined when events == 0
  double alpha = 0.0;
  std::optional<double> violation_fraction;
  double violation_allowance = 0.0;
  bool ok = true;
};

struct Summary {
  std::vector<TheoremSummary> theorems;
  int replications = 0;
  int excluded = 0;
};

Instance generate_instance(const ScenarioConfig& config, int replication_index);
RunRecord run_replication(const ScenarioConfig& config, int replication_index);
std::vector<RunRecord> run_scenario(const ScenarioConfig& config);
Summary verify_theorems(const std::vector<RunRecord>& records,
                        const ScenarioConfig& config);

struct ScalingPoint {
  std::int64_t n = 0;
  int p = 0;
  int s0 = 0;
  double x_pred = 0.0;   // s0 log p / n
  double x_ell1 = 0.0;   // s0 sqrt(log p / n)
  double median_prediction_error = 0.0;
  double median_ell1_error = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  double prediction_slope = std::numeric_limits<double>::quiet_NaN();
  double ell1_slope = std::numeric_limits<double>::quiet_NaN();
};

struct GridCell {
  std::int64_t n;
  int p;
  int s0;
};

ScalingReport scaling_study(const std::vector<GridCell>& grid,
                            const ScenarioConfig& config_template);

// design helpers used by the verification scenarios and tests
Eigen::MatrixXd make_orthonormal_design(int n, int p, std::uint64_t seed);
// X with unit column norms, orthonormal active block, and the irrepresentable
// constant of S = {1..s0} exactly equal to theta_target
Eigen::MatrixXd make_irrepresentable_design(int n, int p, int s0,
                                            double theta_target,
                                            std::uint64_t seed);

}  // namespace qlasso
