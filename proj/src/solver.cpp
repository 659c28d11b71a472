#include "qlasso/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace qlasso {

namespace {

Eigen::VectorXd effective_weights(const PenalizedProblem& prob) {
  if (prob.weights.size()) return prob.weights;
  return Eigen::VectorXd::Ones(prob.design.n());
}

double per_obs_loss(const Family& fam, double y, double z, double mu_smooth) {
  if (mu_smooth > 0.0 && fam.robust && !fam.robust->smooth) {
    const double prox = fam.robust->prox(y, z, mu_smooth);
    const double dz = z - prox;
    return fam.robust->rho(y, prox) + dz * dz / (2.0 * mu_smooth);
  }
  return loss(fam, y, z);
}

double per_obs_deriv(const Family& fam, double y, double z, double mu_smooth) {
  if (mu_smooth > 0.0 && fam.robust && !fam.robust->smooth) {
    const double prox = fam.robust->prox(y, z, mu_smooth);
    return (z - prox) / mu_smooth;
  }
  return loss_derivative(fam, y, z);
}

struct RiskEval {
  double value;
  Eigen::VectorXd grad;
};

double risk_value(const PenalizedProblem& prob, const Eigen::VectorXd& w,
                  double wtot, const Eigen::VectorXd& beta, double mu_smooth) {
  const Eigen::VectorXd z = prob.design.X * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += w[i] * per_obs_loss(prob.family, prob.response[i], z[i], mu_smooth);
  }
  return total / wtot;
}

RiskEval risk_with_grad(const PenalizedProblem& prob, const Eigen::VectorXd& w,
                        double wtot, const Eigen::VectorXd& beta,
                        double mu_smooth) {
  const Eigen::VectorXd z = prob.design.X * beta;
  Eigen::VectorXd d(z.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += w[i] * per_obs_loss(prob.family, prob.response[i], z[i], mu_smooth);
    d[i] = w[i] * per_obs_deriv(prob.family, prob.response[i], z[i], mu_smooth);
  }
  return {total / wtot, prob.design.X.transpose() * d / wtot};
}

Eigen::VectorXd risk_grad(const PenalizedProblem& prob, const Eigen::VectorXd& w,
                          double wtot, const Eigen::VectorXd& beta,
                          double mu_smooth) {
  const Eigen::VectorXd z = prob.design.X * beta;
  Eigen::VectorXd d(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    d[i] = w[i] * per_obs_deriv(prob.family, prob.response[i], z[i], mu_smooth);
  }
  return prob.design.X.transpose() * d / wtot;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double a = std::abs(v[j]) - t;
    out[j] = a > 0.0 ? (v[j] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

// violation of the stationarity certificate, in units of tau = -grad/lambda
double kkt_violation(const Eigen::VectorXd& beta, const Eigen::VectorXd& grad,
                     double lambda) {
  double viol = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double tau = -grad[j] / lambda;
    if (beta[j] > 0.0) {
      viol = std::max(viol, std::abs(tau - 1.0));
    } else if (beta[j] < 0.0) {
      viol = std::max(viol, std::abs(tau + 1.0));
    } else {
      viol = std::max(viol, std::max(0.0, std::abs(tau) - 1.0));
    }
  }
  return viol;
}

// power iteration estimate of lambda_max(X' diag(w/W) X)
double gram_spectral_estimate(const PenalizedProblem& prob,
                              const Eigen::VectorXd& w, double wtot) {
  const Eigen::Index p = prob.design.p();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p) / std::sqrt(static_cast<double>(p));
  double est = 1.0;
  for (int it = 0; it < 12; ++it) {
    Eigen::VectorXd xv = prob.design.X * v;
    Eigen::VectorXd next = prob.design.X.transpose() * xv.cwiseProduct(w) / wtot;
    const double norm = next.norm();
    if (norm <= 0.0) return 1e-12;
    est = norm;
    v = next / norm;
  }
  return est;
}

struct InnerResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool hit_cap = false;
};

// Monotone FISTA with backtracking; stops when `stop` is satisfied at the
// current iterate or the iteration budget is exhausted.
template <typename StopFn>
InnerResult mfista(const PenalizedProblem& prob, const Eigen::VectorXd& w,
                   double wtot, Eigen::VectorXd beta0, double mu_smooth,
                   double& lip, int max_iters, StopFn stop,
                   std::vector<double>* trace, double backtrack_growth = 2.0,
                   double step_relax = 0.97) {
  const double lambda = prob.lambda;
  Eigen::VectorXd x = std::move(beta0);
  Eigen::VectorXd x_prev = x;
  Eigen::VectorXd y = x;
  double fx = risk_value(prob, w, wtot, x, mu_smooth) + lambda * x.lpNorm<1>();
  double t = 1.0;
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    RiskEval ry = risk_with_grad(prob, w, wtot, y, mu_smooth);
    Eigen::VectorXd z;
    double rz = 0.0;
    for (int bt = 0;; ++bt) {
      z = soft_threshold(y - ry.grad / lip, lambda / lip);
      rz = risk_value(prob, w, wtot, z, mu_smooth);
      const Eigen::VectorXd dz = z - y;
      const double quad_bound =
          ry.value + ry.grad.dot(dz) + 0.5 * lip * dz.squaredNorm();
      if (rz <= quad_bound + 1e-12 * std::max(1.0, std::abs(quad_bound)) ||
          bt >= 60) {
        break;
      }
      lip *= backtrack_growth;
    }
    const double fz = rz + lambda * z.lpNorm<1>();

    // monotone update; objective comparisons carry a machine-noise band so a
    // prox step is never rejected once true decrements fall below rounding
    const double band =
        4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fx));
    Eigen::VectorXd x_next = fz <= fx + band ? z : x;
    const double fx_next = std::min(fz, fx);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_next + (t / t_next) * (z - x_next) +
        ((t - 1.0) / t_next) * (x_next - x_prev);
    if (fz > fx + band) {  // restart momentum when the prox step stalls
      y = x_next;
      t = 1.0;
    } else {
      t = t_next;
    }
    x_prev = x;
    x = x_next;
    fx = fx_next;
    if (trace) trace->push_back(fx);

    if ((iter & 7) == 7 && stop(x)) {
      ++iter;
      break;
    }
    lip *= step_relax;  // allow the step to grow again
    lip = std::max(lip, 1e-12);
  }

  // momentum-free finishing passes settle the inactive coordinates at exact
  // zero and certify monotone descent
  for (int k = 0; k < 40; ++k) {
    RiskEval rx = risk_with_grad(prob, w, wtot, x, mu_smooth);
    Eigen::VectorXd z;
    double rz = 0.0;
    for (int bt = 0;; ++bt) {
      z = soft_threshold(x - rx.grad / lip, lambda / lip);
      rz = risk_value(prob, w, wtot, z, mu_smooth);
      const Eigen::VectorXd dz = z - x;
      const double quad_bound =
          rx.value + rx.grad.dot(dz) + 0.5 * lip * dz.squaredNorm();
      if (rz <= quad_bound + 1e-12 * std::max(1.0, std::abs(quad_bound)) ||
          bt >= 60) {
        break;
      }
      lip *= backtrack_growth;
    }
    const double fz = rz + lambda * z.lpNorm<1>();
    const double band =
        4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fx));
    if (fz <= fx + band) {
      x = z;
      fx = std::min(fx, fz);
      if (trace) trace->push_back(fx);
    }
    ++iter;
  }
  return {x, iter, iter >= max_iters};
}

// Newton polish on the current active set with fixed signs; returns true
// when the full stationarity certificate holds at half the requested
// tolerance. Quasi-likelihood (smooth) families only.
bool active_set_polish(const PenalizedProblem& prob, const Eigen::VectorXd& w,
                       double wtot, Eigen::VectorXd& beta, double kkt_tol) {
  if (!prob.family.quasi) return false;
  const QuasiFamily& q = *prob.family.quasi;
  const double lambda = prob.lambda;
  const Eigen::Index n = prob.design.n();
  const Eigen::Index p = prob.design.p();

  std::vector<Eigen::Index> active;
  std::vector<double> sign;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta[j] != 0.0) {
      active.push_back(j);
      sign.push_back(beta[j] > 0.0 ? 1.0 : -1.0);
    }
  }

  Eigen::VectorXd work = beta;
  for (int round = 0; round < 60; ++round) {
    const auto s = static_cast<Eigen::Index>(active.size());
    if (s > 0) {
      Eigen::MatrixXd Xa(n, s);
      for (Eigen::Index a = 0; a < s; ++a) Xa.col(a) = prob.design.X.col(active[a]);
      Eigen::VectorXd b(s);
      for (Eigen::Index a = 0; a < s; ++a) b[a] = work[active[a]];

      bool newton_ok = false;
      for (int it = 0; it < 80; ++it) {
        const Eigen::VectorXd z = Xa * b;
        Eigen::VectorXd d(n), curv(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double mu = q.inverse_link(z[i]);
          const double hz = q.h(z[i]);
          d[i] = (mu - prob.response[i]) * hz;
          const double eps = 1e-5 * std::max(1.0, std::abs(z[i]));
          const double dh = (q.h(z[i] + eps) - q.h(z[i] - eps)) / (2.0 * eps);
          curv[i] = std::max(q.link_derivative(z[i]) * hz +
                                 (mu - prob.response[i]) * dh,
                             1e-12);
        }
        Eigen::VectorXd g = Xa.transpose() * d.cwiseProduct(w) / wtot;
        for (Eigen::Index a = 0; a < s; ++a) g[a] += lambda * sign[a];
        if (g.lpNorm<Eigen::Infinity>() <= 0.02 * lambda * kkt_tol) {
          newton_ok = true;
          break;
        }
        Eigen::MatrixXd hess =
            Xa.transpose() * curv.cwiseProduct(w).asDiagonal() * Xa / wtot;
        hess.diagonal().array() += 1e-14 * hess.diagonal().maxCoeff();
        const Eigen::VectorXd step = hess.ldlt().solve(g);
        if (!step.allFinite()) break;
        b -= step;
      }
      if (!newton_ok) return false;

      // coordinates that flipped sign leave the active set
      std::vector<Eigen::Index> keep_idx;
      std::vector<double> keep_sign;
      bool flipped = false;
      for (Eigen::Index a = 0; a < s; ++a) {
        if (b[a] * sign[a] <= 0.0) {
          flipped = true;
        } else {
          keep_idx.push_back(active[a]);
          keep_sign.push_back(sign[a]);
        }
      }
      work.setZero();
      for (Eigen::Index a = 0; a < s; ++a) {
        if (b[a] * sign[a] > 0.0) work[active[a]] = b[a];
      }
      if (flipped) {
        active = std::move(keep_idx);
        sign = std::move(keep_sign);
        continue;
      }
    } else {
      work.setZero();
    }

    // full certificate; the worst inactive violator joins the active set
    const Eigen::VectorXd grad = risk_grad(prob, w, wtot, work, 0.0);
    double worst = 0.0;
    Eigen::Index worst_j = -1;
    bool ok = true;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double tau = -grad[j] / lambda;
      if (work[j] != 0.0) {
        if (std::abs(tau - (work[j] > 0.0 ? 1.0 : -1.0)) > 0.5 * kkt_tol) {
          ok = false;
        }
      } else if (std::abs(tau) > 1.0 + 0.5 * kkt_tol) {
        ok = false;
        if (std::abs(tau) - 1.0 > worst) {
          worst = std::abs(tau) - 1.0;
          worst_j = j;
        }
      }
    }
    if (ok) {
      beta = work;
      return true;
    }
    if (worst_j < 0) return false;  // an active-sign mismatch: give up
    active.push_back(worst_j);
    sign.push_back(-grad[worst_j] > 0.0 ? 1.0 : -1.0);
    std::sort(active.begin(), active.end());
    std::vector<double> resorted(active.size());
    for (size_t a = 0; a < active.size(); ++a) {
      const Eigen::Index j = active[a];
      resorted[a] = work[j] != 0.0 ? (work[j] > 0.0 ? 1.0 : -1.0)
                                   : (-grad[j] > 0.0 ? 1.0 : -1.0);
    }
    sign = std::move(resorted);
  }
  return false;
}

}  // namespace

void PenalizedProblem::validate(bool need_positive_lambda) const {
  if (response.size() != design.n()) {
    throw std::invalid_argument("response length does not match design rows");
  }
  if (need_positive_lambda && !(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be positive");
  }
  if (weights.size() && weights.size() != design.n()) {
    throw std::invalid_argument("weights length does not match design rows");
  }
  if (weights.size() && weights.minCoeff() <= 0.0) {
    throw std::invalid_argument("weights must be positive");
  }
  for (Eigen::Index i = 0; i < response.size(); ++i) {
    if (!family.response_domain.contains_closed(response[i])) {
      throw std::invalid_argument("response outside the family response domain");
    }
  }
}

double lambda_max(const PenalizedProblem& problem) {
  problem.validate(false);
  const Eigen::VectorXd w = effective_weights(problem);
  return risk_grad(problem, w, problem.weight_total(),
                   Eigen::VectorXd::Zero(problem.design.p()), 0.0)
      .cwiseAbs()
      .maxCoeff();
}

KktResidual kkt_residual(const PenalizedProblem& problem, const Eigen::VectorXd& beta,
                         double sign_tolerance, double kink_tolerance) {
  problem.validate();
  if (!beta.allFinite()) throw std::invalid_argument("beta must be finite");
  const Eigen::VectorXd w = effective_weights(problem);
  const double wtot = problem.weight_total();
  const double lambda = problem.lambda;
  const Eigen::Index n = problem.design.n();
  const Eigen::Index p = problem.design.p();

  const Eigen::VectorXd z = problem.design.X * beta;
  Eigen::VectorXd d_sel(n), d_lo(n), d_hi(n);
  bool any_kink = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const DerivativeInterval di = loss_derivative_interval(
        problem.family, problem.response[i], z[i], kink_tolerance);
    d_sel[i] = w[i] * di.selection;
    d_lo[i] = w[i] * di.lo;
    d_hi[i] = w[i] * di.hi;
    any_kink = any_kink || di.at_kink;
  }

  KktResidual out;
  out.tau = -(problem.design.X.transpose() * d_sel) / (wtot * lambda);
  double sup_viol = 0.0;
  bool sign_ok = true;
  for (Eigen::Index j = 0; j < p; ++j) {
    double glo = 0.0, ghi = 0.0;
    if (any_kink) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = problem.design.X(i, j);
        if (x >= 0.0) {
          glo += x * d_lo[i];
          ghi += x * d_hi[i];
        } else {
          glo += x * d_hi[i];
          ghi += x * d_lo[i];
        }
      }
    } else {
      glo = ghi = problem.design.X.col(j).dot(d_sel);
    }
    // tau_j ranges over [-ghi, -glo] / (W lambda)
    const double tlo = -ghi / (wtot * lambda);
    const double thi = -glo / (wtot * lambda);
    if (beta[j] != 0.0) {
      const double s = beta[j] > 0.0 ? 1.0 : -1.0;
      const double dev = std::max({0.0, tlo - s, s - thi});
      sup_viol = std::max(sup_viol, dev);
      if (dev > sign_tolerance) sign_ok = false;
    } else {
      sup_viol = std::max(sup_viol, std::max({0.0, tlo - 1.0, -1.0 - thi}));
    }
  }
  out.sup_violation = sup_viol;
  out.sign_ok = sign_ok;
  return out;
}

FitResult fit(const PenalizedProblem& problem, const SolverConfig& config) {
  problem.validate();
  if (!(config.kkt_tolerance > 0.0)) {
    throw std::invalid_argument("kkt_tolerance must be positive");
  }
  for (size_t k = 0; k < config.smoothing_schedule.size(); ++k) {
    if (!(config.smoothing_schedule[k] > 0.0) ||
        (k > 0 && config.smoothing_schedule[k] >= config.smoothing_schedule[k - 1])) {
      throw std::invalid_argument(
          "smoothing_schedule must be positive and decreasing");
    }
  }
  const Eigen::VectorXd w = effective_weights(problem);
  const double wtot = problem.weight_total();
  const Eigen::Index p = problem.design.p();

  std::vector<double> schedule = config.smoothing_schedule;
  const bool needs_smoothing =
      problem.family.robust && !problem.family.robust->smooth &&
      !problem.family.quasi;
  if (needs_smoothing && schedule.empty()) {
    for (double mu = config.smoothing_mu0; mu >= config.smoothing_mu_min;
         mu *= 0.5) {
      schedule.push_back(mu);
    }
  }
  if (!needs_smoothing) schedule.clear();

  FitResult result;
  std::vector<double>* trace =
      config.record_objective_trace ? &result.objective_trace : nullptr;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double lip = std::max(gram_spectral_estimate(problem, w, wtot), 1e-12);
  int total_iters = 0;
  bool hit_cap = false;

  auto certified = [&](const Eigen::VectorXd& b) {
    const KktResidual r = kkt_residual(problem, b, config.kkt_tolerance,
                                       config.kink_tolerance);
    return r.sup_violation <= config.kkt_tolerance && r.sign_ok;
  };

  if (schedule.empty()) {
    auto stop = [&](const Eigen::VectorXd& b) {
      const Eigen::VectorXd g = risk_grad(problem, w, wtot, b, 0.0);
      return kkt_violation(b, g, problem.lambda) <= 0.5 * config.kkt_tolerance;
    };
    // first-order rounds bring the active set in; the Newton polish then
    // settles the certificate to machine accuracy
    int remaining = config.max_iterations;
    bool done = false;
    while (remaining > 0 && !done) {
      const int budget = std::min(remaining, 2000);
      InnerResult inner =
          mfista(problem, w, wtot, beta, 0.0, lip, budget, stop, trace,
                 config.backtrack_growth, config.step_relax);
      beta = inner.beta;
      total_iters += inner.iterations;
      remaining -= std::max(inner.iterations, 1);
      if (active_set_polish(problem, w, wtot, beta, config.kkt_tolerance)) {
        done = true;
        break;
      }
      done = certified(beta);
    }
    hit_cap = !done;
  } else {
    const int per_level = std::max(
        200, config.max_iterations / static_cast<int>(schedule.size() + 1));
    for (size_t lev = 0; lev < schedule.size(); ++lev) {
      const double mu = schedule[lev];
      const bool last = lev + 1 == schedule.size();
      auto stop = [&](const Eigen::VectorXd& b) {
        if (last) return certified(b);
        const Eigen::VectorXd g = risk_grad(problem, w, wtot, b, mu);
        return kkt_violation(b, g, problem.lambda) <= 0.25 * config.kkt_tolerance;
      };
      InnerResult inner = mfista(problem, w, wtot, beta, mu, lip,
                                 last ? config.max_iterations : per_level, stop,
                                 trace, config.backtrack_growth,
                                 config.step_relax);
      beta = inner.beta;
      total_iters += inner.iterations;
      hit_cap = last && inner.hit_cap;
      if (total_iters >= config.max_iterations && !last) {
        hit_cap = true;
      }
    }
  }

  const KktResidual cert = kkt_residual(problem, beta, config.kkt_tolerance,
                                        config.kink_tolerance);
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta[j] != 0.0) active.push_back(j);
  }
  result.beta = std::move(beta);
  result.active_set = IndexSet::from_zero_based(std::move(active));
  result.kkt_sup_violation = cert.sup_violation;
  result.sign_consistency_ok = cert.sign_ok;
  result.iterations = total_iters;
  result.objective = risk_value(problem, w, wtot, result.beta, 0.0) +
                     problem.lambda * result.beta.lpNorm<1>();
  result.converged =
      !hit_cap && cert.sup_violation <= config.kkt_tolerance && cert.sign_ok;
  return result;
}

Eigen::VectorXd restricted_fit(const PenalizedProblem& problem, const IndexSet& S) {
  problem.validate(false);
  const Eigen::Index p = problem.design.p();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (S.empty()) return beta;
  for (Eigen::Index j : S) {
    if (j < 0 || j >= p) throw std::invalid_argument("index set out of range");
  }

  const Eigen::VectorXd w = effective_weights(problem);
  const double wtot = problem.weight_total();
  const Eigen::Index s = S.size();
  Eigen::MatrixXd Xs(problem.design.n(), s);
  {
    Eigen::Index c = 0;
    for (Eigen::Index j : S) Xs.col(c++) = problem.design.X.col(j);
  }

  const Family& fam = problem.family;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s);

  if (fam.kind == FamilyKind::gaussian) {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    b = (sw.asDiagonal() * Xs)
            .colPivHouseholderQr()
            .solve(sw.cwiseProduct(problem.response));
  } else if (fam.quasi) {
    // damped Newton on the restricted empirical risk
    const QuasiFamily& q = *fam.quasi;
    auto value_at = [&](const Eigen::VectorXd& bb) {
      const Eigen::VectorXd z = Xs * bb;
      double tot = 0.0;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        tot += w[i] * loss(fam, problem.response[i], z[i]);
      }
      return tot / wtot;
    };
    double fval = value_at(b);
    for (int it = 0; it < 400; ++it) {
      const Eigen::VectorXd z = Xs * b;
      Eigen::VectorXd d(z.size()), curv(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double mu = q.inverse_link(z[i]);
        const double hz = q.h(z[i]);
        d[i] = (mu - problem.response[i]) * hz;
        const double eps = 1e-5 * std::max(1.0, std::abs(z[i]));
        const double dh = (q.h(z[i] + eps) - q.h(z[i] - eps)) / (2.0 * eps);
        curv[i] = q.link_derivative(z[i]) * hz + (mu - problem.response[i]) * dh;
        curv[i] = std::max(curv[i], 1e-12);
      }
      const Eigen::VectorXd grad =
          Xs.transpose() * d.cwiseProduct(w) / wtot;
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-9) break;
      Eigen::MatrixXd hess =
          Xs.transpose() * curv.cwiseProduct(w).asDiagonal() * Xs / wtot;
      hess.diagonal().array() += 1e-12;
      Eigen::VectorXd step = hess.ldlt().solve(grad);
      double alpha = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        const Eigen::VectorXd cand = b - alpha * step;
        const double fc = value_at(cand);
        if (fc <= fval - 1e-4 * alpha * grad.dot(step)) {
          b = cand;
          fval = fc;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      if (b.lpNorm<Eigen::Infinity>() > 1e6) {
        throw std::runtime_error(
            "restricted fit diverged (separable data?): coefficient cap reached");
      }
    }
    const Eigen::VectorXd z = Xs * b;
    // binary families: strictly positive margins everywhere certify that the
    // data are separable and no finite minimizer exists
    if (fam.quasi->mean_domain.lo == 0.0 && fam.quasi->mean_domain.hi == 1.0) {
      bool all_binary = true;
      bool all_positive_margin = z.size() > 0;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double y = problem.response[i];
        if (y != 0.0 && y != 1.0) {
          all_binary = false;
          break;
        }
        if ((2.0 * y - 1.0) * z[i] <= 0.0) all_positive_margin = false;
      }
      if (all_binary && all_positive_margin) {
        throw std::runtime_error(
            "restricted fit diverged: the responses are separable and the "
            "unpenalized minimizer does not exist");
      }
    }
    Eigen::VectorXd d(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      d[i] = w[i] * loss_derivative(fam, problem.response[i], z[i]);
    }
    if ((Xs.transpose() * d / wtot).lpNorm<Eigen::Infinity>() > 1e-8) {
      throw std::runtime_error("restricted fit did not reach gradient tolerance");
    }
  } else {
    // nonsmooth robust loss: smoothing path with projected gradient descent
    double mu = 1.0;
    double lip = 1.0;
    while (mu >= 1e-8) {
      for (int it = 0; it < 400; ++it) {
        const Eigen::VectorXd z = Xs * b;
        Eigen::VectorXd d(z.size());
        double val = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          val += w[i] * per_obs_loss(fam, problem.response[i], z[i], mu);
          d[i] = w[i] * per_obs_deriv(fam, problem.response[i], z[i], mu);
        }
        val /= wtot;
        const Eigen::VectorXd grad = Xs.transpose() * d / wtot;
        if (grad.lpNorm<Eigen::Infinity>() <= 1e-10) break;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
          const Eigen::VectorXd cand = b - grad / lip;
          const Eigen::VectorXd zc = Xs * cand;
          double vc = 0.0;
          for (Eigen::Index i = 0; i < zc.size(); ++i) {
            vc += w[i] * per_obs_loss(fam, problem.response[i], zc[i], mu);
          }
          vc /= wtot;
          if (vc <= val - 0.5 * grad.squaredNorm() / lip + 1e-15) {
            b = cand;
            moved = true;
            lip *= 0.9;
            break;
          }
          lip *= 2.0;
        }
        if (!moved) break;
      }
      mu *= 0.5;
    }
  }

  Eigen::Index c = 0;
  for (Eigen::Index j : S) beta[j] = b[c++];
  return beta;
}

Eigen::VectorXd soft_threshold_fit(const DesignMatrix& design,
                                   const Eigen::VectorXd& response,
                                   double lambda) {
  const Eigen::Index p = design.p();
  const Eigen::MatrixXd g = gram(design);
  if ((g - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument("design is not orthonormal (X'X/n != I)");
  }
  const Eigen::VectorXd z =
      design.X.transpose() * response / static_cast<double>(design.n());
  return soft_threshold(z, 0.5 * lambda);
}

}  // namespace qlasso
