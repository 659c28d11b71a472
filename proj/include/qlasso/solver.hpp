#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "qlasso/design.hpp"
#include "qlasso/family.hpp"

namespace qlasso {

// min_beta (1/W) sum_i w_i rho(Y_i, x_i' beta) + lambda ||beta||_1
// with W = sum_i w_i. Unit weights give the plain empirical risk; row
// multiplicities let grouped designs stand in for their expanded form.
struct PenalizedProblem {
  DesignMatrix design;
  Eigen::VectorXd response;
  Family family;
  double lambda = 0.0;
  Eigen::VectorXd weights;  // empty means all ones

  double weight_total() const {
    return weights.size() ? weights.sum() : static_cast<double>(design.n());
  }
  void validate(bool need_positive_lambda = true) const;
};

struct SolverConfig {
  double kkt_tolerance = 1e-6;
  int max_iterations = 100000;
  // Moreau-Yosida levels for nonsmooth losses; built as mu0 * 2^-k down to
  // 1e-8 when left empty.
  std::vector<double> smoothing_schedule;
  double smoothing_mu0 = 1.0;
  double smoothing_mu_min = 1e-8;
  double kink_tolerance = 1e-7;
  // backtracking step rule: grow the curvature estimate by this factor when
  // the quadratic upper bound fails, relax it per iteration otherwise
  double backtrack_growth = 2.0;
  double step_relax = 0.97;
  bool record_objective_trace = false;
};

struct FitResult {
  Eigen::VectorXd beta;
  IndexSet active_set;
  double kkt_sup_violation = 0.0;
  bool sign_consistency_ok = false;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;
};

struct KktResidual {
  Eigen::VectorXd tau;
  double sup_violation = 0.0;
  bool sign_ok = false;
};

FitResult fit(const PenalizedProblem& problem, const SolverConfig& config = {});

KktResidual kkt_residual(const PenalizedProblem& problem, const Eigen::VectorXd& beta,
                         double sign_tolerance = 1e-6, double kink_tolerance = 1e-7);

// Unpenalized empirical risk minimizer over {beta : beta_{S^c} = 0}; the
// oracle comparator. Throws when a logistic restricted fit diverges
// (separable data).
Eigen::VectorXd restricted_fit(const PenalizedProblem& problem, const IndexSet& S);

// Closed form for orthonormal design (X'X/n = I) and the squared-error
// objective ||Y - X beta||_n^2 + lambda ||beta||_1:
//   beta_j = sign(z_j) max(|z_j| - lambda/2, 0),  z = X'Y/n.
Eigen::VectorXd soft_threshold_fit(const DesignMatrix& design,
                                   const Eigen::VectorXd& response, double lambda);

// max_j |grad_j R(0)|; fit returns exactly zero for lambda >= lambda_max
double lambda_max(const PenalizedProblem& problem);

}  // namespace qlasso
