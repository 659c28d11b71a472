#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace qlasso {

// Primitive constants of the error-moment and regularity conditions; the
// composite constants are always recomputed from the primitives.
struct TheoryConstants {
  double sigma = 1.0;   // max_i E eps_i^2 <= sigma^2
  double kappa = 0.0;   // (1/n) sum E (eps_i^2 - E eps_i^2)^2 <= kappa^4
  double K_X = 1.0;     // max_{i,j} |x_{ij}|
  double K_0 = 0.0;     // max_i |x_i' beta0|
  double C_h = 1.0;
  double C_V = 2.0;
  double L_h = 0.0;
  double L_g = 0.0;
  std::optional<double> C_l;

  double C_hV() const { return C_V * C_h * C_h; }
  double C_hX() const { return 16.0 * C_h * K_X; }
  double L_hV() const { return (L_g + L_h * C_V) * C_h; }
  double L_hX() const { return 16.0 * L_h * K_X * K_X; }
};

struct TuningLevels {
  double lambda_eps = 0.0;         // C_hX sigma sqrt(2(t + log p)/n)
  double lambda_0 = 0.0;           // L_hX sigma sqrt(2(t + 2 log p)/n)
  double lambda_eps_robust = 0.0;  // 16 K_X sqrt(2(t + log p)/n)
  double alpha_oracle = 0.0;       // 3 e^-t + 3 kappa^4/(n sigma^4)
  double alpha_robust = 0.0;       // 3 e^-t
  double alpha_select = 0.0;       // 9 e^-t + 9 kappa^4/(n sigma^4)
};

TuningLevels tuning_levels(const TheoryConstants& c, double n, double p, double t);

struct ScaledSparsities {
  double Gamma = 0.0;         // 16 C_hV Gamma_eff
  double Gamma_eps = 0.0;     // same quantity under its selection-section name
  double Gamma_0 = 0.0;       // 6 L_hV C_hV^2 Gamma_eff
  double Gamma_robust = 0.0;  // 16 C_l Gamma_eff
};

ScaledSparsities scaled_sparsities(const TheoryConstants& c, double gamma_eff);

struct PreconditionCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

struct GammaBudget {
  double gamma_1 = 0.0;    // lambda_eps(t)/lambda
  double gamma_eps = 0.0;  // defaults to (1 - gamma_1)/3
  double gamma_0 = 0.0;    // defaults to (1 - gamma_1)/3
  double total() const { return gamma_1 + gamma_eps + gamma_0; }
};

GammaBudget default_gamma_budget(double lambda_eps, double lambda);

std::vector<PreconditionCheck> check_preconditions(
    const TheoryConstants& c, double n, double p, double t, double lambda,
    double gamma_eff, std::optional<double> theta = std::nullopt,
    std::optional<double> lambda_X = std::nullopt, double gamma_X = 0.25);

enum class BoundKind { thm1, thm2, thm4, random_design };

struct OracleBounds {
  double ell1_bound = 0.0;
  double prediction_bound = 0.0;
  // thm1 bounds the sum ||f-f0||_n^2 + lambda ||b-b0||_1 by 4 lambda^2 Gamma_eff
  bool combined = false;
};

OracleBounds oracle_bounds(BoundKind kind, const TheoryConstants& c, double lambda,
                           double gamma_eff);

struct ErrorMoments {
  double sigma_hat = 0.0;
  double kappa_hat = 0.0;
};

// Empirical plug-ins for Condition A_eps from realized residuals.
ErrorMoments estimate_error_moments(const Eigen::VectorXd& residuals);

// Everything the calibrate surface reports, bundled for serialization.
struct BoundReport {
  TheoryConstants constants;
  double n = 0.0, p = 0.0, t = 0.0, lambda = 0.0, gamma_eff = 0.0;
  TuningLevels levels;
  ScaledSparsities sparsities;
  OracleBounds thm2_bounds;
  std::vector<PreconditionCheck> preconditions;
};

BoundReport make_bound_report(const TheoryConstants& c, double n, double p, double t,
                              double lambda, double gamma_eff,
                              std::optional<double> theta = std::nullopt,
                              std::optional<double> lambda_X = std::nullopt,
                              double gamma_X = 0.25);

}  // namespace qlasso
