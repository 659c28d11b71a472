#include "qlasso/calibration.hpp"

#include <cmath>
#include <stdexcept>

namespace qlasso {

namespace {

// boundary equality counts as satisfied (up to rounding)
bool leq(double lhs, double rhs) {
  return lhs <= rhs + 1e-12 * std::max(std::abs(lhs), std::abs(rhs));
}

void validate_np(double n, double p, double t) {
  if (!(n >= 1.0)) throw std::invalid_argument("n must be >= 1");
  if (!(p >= 2.0)) throw std::invalid_argument("p must be >= 2");
  if (!(t >= 0.0)) throw std::invalid_argument("t must be nonnegative");
}

}  // namespace

TuningLevels tuning_levels(const TheoryConstants& c, double n, double p, double t) {
  validate_np(n, p, t);
  TuningLevels out;
  const double logp = std::log(p);
  out.lambda_eps = c.C_hX() * c.sigma * std::sqrt(2.0 * (t + logp) / n);
  out.lambda_0 = c.L_hX() * c.sigma * std::sqrt(2.0 * (t + 2.0 * logp) / n);
  out.lambda_eps_robust = 16.0 * c.K_X * std::sqrt(2.0 * (t + logp) / n);
  const double kappa4 = std::pow(c.kappa, 4);
  const double sigma4 = std::pow(c.sigma, 4);
  const double moment_term = sigma4 > 0.0 ? kappa4 / (n * sigma4) : 0.0;
  out.alpha_oracle = 3.0 * std::exp(-t) + 3.0 * moment_term;
  out.alpha_robust = 3.0 * std::exp(-t);
  out.alpha_select = 9.0 * std::exp(-t) + 9.0 * moment_term;
  return out;
}

ScaledSparsities scaled_sparsities(const TheoryConstants& c, double gamma_eff) {
  if (!(gamma_eff > 0.0)) throw std::invalid_argument("gamma_eff must be positive");
  ScaledSparsities out;
  out.Gamma = 16.0 * c.C_hV() * gamma_eff;
  out.Gamma_eps = out.Gamma;
  out.Gamma_0 = 6.0 * c.L_hV() * c.C_hV() * c.C_hV() * gamma_eff;
  out.Gamma_robust = c.C_l ? 16.0 * *c.C_l * gamma_eff : 0.0;
  return out;
}

GammaBudget default_gamma_budget(double lambda_eps, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  GammaBudget b;
  b.gamma_1 = lambda_eps / lambda;
  b.gamma_eps = (1.0 - b.gamma_1) / 3.0;
  b.gamma_0 = (1.0 - b.gamma_1) / 3.0;
  return b;
}

std::vector<PreconditionCheck> check_preconditions(
    const TheoryConstants& c, double n, double p, double t, double lambda,
    double gamma_eff, std::optional<double> theta, std::optional<double> lambda_X,
    double gamma_X) {
  const TuningLevels lv = tuning_levels(c, n, p, t);
  const ScaledSparsities sp = scaled_sparsities(c, gamma_eff);
  std::vector<PreconditionCheck> out;

  out.push_back({"(s0)", lv.lambda_eps * sp.Gamma, 0.25,
                 leq(lv.lambda_eps * sp.Gamma, 0.25)});
  // lambda must lie in [4 lambda_eps(t), 1/Gamma]
  {
    PreconditionCheck pc;
    pc.name = "lambda-range";
    pc.lhs = 4.0 * lv.lambda_eps;
    pc.rhs = 1.0 / sp.Gamma;
    pc.satisfied = leq(pc.lhs, lambda) && leq(lambda, pc.rhs);
    out.push_back(pc);
  }
  if (c.C_l) {
    out.push_back({"(s02)", lv.lambda_eps_robust * sp.Gamma_robust, 0.25,
                   leq(lv.lambda_eps_robust * sp.Gamma_robust, 0.25)});
    PreconditionCheck pc;
    pc.name = "lambda-range-robust";
    pc.lhs = 4.0 * lv.lambda_eps_robust;
    pc.rhs = 1.0 / sp.Gamma_robust;
    pc.satisfied = leq(pc.lhs, lambda) && leq(lambda, pc.rhs);
    out.push_back(pc);
  }
  const GammaBudget gb = default_gamma_budget(lv.lambda_eps, lambda);
  out.push_back({"(s0.gamma1)", gb.gamma_1, 0.25, leq(gb.gamma_1, 0.25)});
  out.push_back({"(s03)", lv.lambda_eps * sp.Gamma_0, gb.gamma_1 * gb.gamma_eps,
                 leq(lv.lambda_eps * sp.Gamma_0, gb.gamma_1 * gb.gamma_eps)});
  out.push_back({"(s04)", lv.lambda_0 * sp.Gamma_eps, gb.gamma_0,
                 leq(lv.lambda_0 * sp.Gamma_eps, gb.gamma_0)});
  if (theta) {
    const double threshold = (1.0 - gb.total()) / (1.0 + gb.total());
    out.push_back({"theta-threshold", *theta, threshold, *theta < threshold});
  }
  if (lambda_X) {
    out.push_back({"(s05)", *lambda_X * sp.Gamma, gamma_X,
                   leq(*lambda_X * sp.Gamma, gamma_X)});
  }
  return out;
}

OracleBounds oracle_bounds(BoundKind kind, const TheoryConstants& c, double lambda,
                           double gamma_eff) {
  if (!(lambda >= 0.0) || !(gamma_eff >= 0.0) || !std::isfinite(lambda) ||
      !std::isfinite(gamma_eff)) {
    throw std::invalid_argument("oracle_bounds needs finite nonnegative inputs");
  }
  OracleBounds out;
  switch (kind) {
    case BoundKind::thm1: {
      // || f - f0 ||_n^2 + lambda || b - b0 ||_1 <= 4 lambda^2 Gamma_eff
      const double combined = 4.0 * lambda * lambda * gamma_eff;
      out.prediction_bound = combined;
      out.ell1_bound = lambda > 0.0 ? combined / lambda : 0.0;
      out.combined = true;
      break;
    }
    case BoundKind::thm2: {
      const double Gamma = 16.0 * c.C_hV() * gamma_eff;
      out.ell1_bound = 0.5 * lambda * Gamma;
      out.prediction_bound = 0.75 * c.C_hV() * lambda * lambda * Gamma;
      break;
    }
    case BoundKind::thm4: {
      if (!c.C_l) throw std::invalid_argument("thm4 bounds need C_l");
      const double Gamma = 16.0 * *c.C_l * gamma_eff;
      out.ell1_bound = 0.5 * lambda * Gamma;
      out.prediction_bound = 0.75 * *c.C_l * lambda * lambda * Gamma;
      break;
    }
    case BoundKind::random_design: {
      const double chv = c.C_hV();
      out.prediction_bound = 6.0 * chv * chv * chv * lambda * lambda * gamma_eff;
      out.ell1_bound = 0.5 * lambda * 16.0 * chv * gamma_eff;
      break;
    }
  }
  return out;
}

ErrorMoments estimate_error_moments(const Eigen::VectorXd& residuals) {
  const Eigen::Index n = residuals.size();
  if (n < 2) throw std::invalid_argument("need at least two residuals");
  const Eigen::VectorXd sq = residuals.cwiseProduct(residuals);
  const double mean_sq = sq.mean();
  ErrorMoments out;
  out.sigma_hat = std::sqrt(mean_sq);
  out.kappa_hat =
      std::pow((sq.array() - mean_sq).square().mean(), 0.25);
  return out;
}

BoundReport make_bound_report(const TheoryConstants& c, double n, double p, double t,
                              double lambda, double gamma_eff,
                              std::optional<double> theta,
                              std::optional<double> lambda_X, double gamma_X) {
  BoundReport r;
  r.constants = c;
  r.n = n;
  r.p = p;
  r.t = t;
  r.lambda = lambda;
  r.gamma_eff = gamma_eff;
  r.levels = tuning_levels(c, n, p, t);
  r.sparsities = scaled_sparsities(c, gamma_eff);
  r.thm2_bounds = oracle_bounds(BoundKind::thm2, c, lambda, gamma_eff);
  r.preconditions =
      check_preconditions(c, n, p, t, lambda, gamma_eff, theta, lambda_X, gamma_X);
  return r;
}

}  // namespace qlasso
