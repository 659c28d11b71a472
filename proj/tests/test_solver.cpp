#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "qlasso/rng.hpp"
#include "qlasso/simulation.hpp"
#include "qlasso/solver.hpp"

using namespace qlasso;

namespace {

PenalizedProblem gaussian_problem(int n, int p, std::uint64_t seed, double lambda,
                                  int sparse = 2) {
  rng::Stream stream(seed, 3);
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = stream.normal();
  }
  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < sparse; ++j) beta0[j] = (j % 2 ? -1.5 : 2.0);
  Eigen::VectorXd y = X * beta0;
  for (int i = 0; i < n; ++i) y[i] += stream.normal();
  PenalizedProblem prob;
  prob.design = DesignMatrix::from_matrix(std::move(X));
  prob.response = std::move(y);
  prob.family = make_family(FamilyKind::gaussian);
  prob.lambda = lambda;
  return prob;
}

}  // namespace

TEST_CASE("lambda at or above lambda_max returns the zero fit") {
  PenalizedProblem prob = gaussian_problem(40, 12, 1, 1.0);
  const double lmax = lambda_max(prob);
  prob.lambda = lmax * 1.0001;
  const FitResult fr = fit(prob);
  CHECK(fr.beta.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(fr.active_set.empty());
  CHECK(fr.converged);
  CHECK(fr.kkt_sup_violation <= 1e-6);
  prob.lambda = lmax * 0.9;
  CHECK(fit(prob).active_set.size() > 0);
}

TEST_CASE("orthonormal design: fit equals the soft-thresholding closed form") {
  rng::Stream stream(4, 9);
  const Eigen::MatrixXd X = make_orthonormal_design(64, 8, 17);
  Eigen::VectorXd y(64);
  for (int i = 0; i < 64; ++i) y[i] = stream.normal() + 0.3 * X(i, 2);

  const double lambda_ls = 0.4;  // || Y - X b ||_n^2 + lambda ||b||_1
  const auto d = DesignMatrix::from_matrix(X);
  const Eigen::VectorXd closed = soft_threshold_fit(d, y, lambda_ls);

  PenalizedProblem prob;
  prob.design = d;
  prob.response = y;
  prob.family = make_family(FamilyKind::gaussian);
  prob.lambda = lambda_ls / 2.0;  // Definition-1 loss carries the 1/2
  const FitResult fr = fit(prob);
  CHECK((fr.beta - closed).lpNorm<Eigen::Infinity>() <= 1e-8);

  // z = (1, -0.1), lambda = 0.4 -> beta = (0.8, 0)
  Eigen::MatrixXd ortho2 = make_orthonormal_design(16, 2, 3);
  const double n = 16.0;
  Eigen::VectorXd target(2);
  target << 1.0, -0.1;
  const Eigen::VectorXd y2 = ortho2 * target;  // X'y2/n = target
  const Eigen::VectorXd b2 =
      soft_threshold_fit(DesignMatrix::from_matrix(ortho2), y2, 0.4);
  CHECK(b2[0] == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(b2[1] == doctest::Approx(0.0));
  // no shrinkage at lambda = 0
  const Eigen::VectorXd b3 =
      soft_threshold_fit(DesignMatrix::from_matrix(ortho2), y2, 0.0);
  CHECK((b3 - target).lpNorm<Eigen::Infinity>() <= 1e-12);
  (void)n;

  CHECK_THROWS_AS(
      soft_threshold_fit(DesignMatrix::from_matrix(2.0 * ortho2), y2, 0.4),
      std::invalid_argument);
}

TEST_CASE("one observation, two coefficients, vanishing penalty") {
  Eigen::MatrixXd X(1, 2);
  X << 1.0, 0.0;
  Eigen::VectorXd y(1);
  y << 2.5;
  PenalizedProblem prob;
  prob.design = DesignMatrix::from_matrix(X);
  prob.response = y;
  prob.family = make_family(FamilyKind::gaussian);
  prob.lambda = 1e-9;
  const FitResult fr = fit(prob);
  CHECK(fr.beta[0] == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(fr.beta[1] == 0.0);
}

TEST_CASE("kkt_residual certifies solver output and rejects non-solutions") {
  PenalizedProblem prob = gaussian_problem(60, 20, 6, 0.3);
  const FitResult fr = fit(prob);
  const KktResidual cert = kkt_residual(prob, fr.beta);
  CHECK(cert.sup_violation <= 1e-6);
  CHECK(cert.sign_ok);

  // at beta = 0 with lambda >= lambda_max the certificate is exactly zero
  PenalizedProblem relaxed = prob;
  relaxed.lambda = lambda_max(prob) * 1.5;
  const KktResidual zero_cert =
      kkt_residual(relaxed, Eigen::VectorXd::Zero(prob.design.p()));
  CHECK(zero_cert.sup_violation == 0.0);
  CHECK(zero_cert.sign_ok);

  // the unpenalized least squares solution has tau = 0, so signs fail
  PenalizedProblem small = gaussian_problem(30, 5, 7, 0.2, 5);
  const Eigen::VectorXd ols =
      small.design.X.colPivHouseholderQr().solve(small.response);
  const KktResidual ols_cert = kkt_residual(small, ols);
  CHECK(ols_cert.tau.lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(!ols_cert.sign_ok);

  PenalizedProblem bad = small;
  bad.lambda = 0.0;
  CHECK_THROWS_AS(kkt_residual(bad, ols), std::invalid_argument);
}

TEST_CASE("restricted fit is the oracle comparator") {
  PenalizedProblem prob = gaussian_problem(50, 10, 8, 0.1, 3);
  const auto S = IndexSet::from_zero_based({0, 1, 2});
  const Eigen::VectorXd beta = restricted_fit(prob, S);
  // normal equations oracle on the selected columns
  Eigen::MatrixXd Xs(50, 3);
  for (int j = 0; j < 3; ++j) Xs.col(j) = prob.design.X.col(j);
  const Eigen::VectorXd ls = Xs.colPivHouseholderQr().solve(prob.response);
  for (int j = 0; j < 3; ++j) CHECK(beta[j] == doctest::Approx(ls[j]).epsilon(1e-10));
  for (int j = 3; j < 10; ++j) CHECK(beta[j] == 0.0);

  CHECK(restricted_fit(prob, IndexSet{}).lpNorm<Eigen::Infinity>() == 0.0);

  // noiseless recovery
  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(10);
  beta0[0] = 1.0;
  beta0[2] = -2.0;
  PenalizedProblem clean = prob;
  clean.response = clean.design.X * beta0;
  const Eigen::VectorXd rec = restricted_fit(clean, IndexSet::from_zero_based({0, 2}));
  CHECK((rec - beta0).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("logistic restricted fit detects separable data") {
  const int n = 30;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  rng::Stream stream(10, 2);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = stream.normal();
    X(i, 1) = stream.normal();
    y[i] = X(i, 0) > 0.0 ? 1.0 : 0.0;  // perfectly separated by column 0
  }
  PenalizedProblem prob;
  prob.design = DesignMatrix::from_matrix(X);
  prob.response = y;
  prob.family = make_family(FamilyKind::logistic);
  prob.lambda = 0.1;
  CHECK_THROWS_AS(restricted_fit(prob, IndexSet::from_zero_based({0})),
                  std::runtime_error);
}

TEST_CASE("logistic fit certifies its KKT conditions") {
  rng::Stream stream(12, 1);
  const int n = 80, p = 30;
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = stream.normal();
  }
  Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(p);
  beta0[0] = 1.0;
  beta0[3] = -1.0;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double pr = 1.0 / (1.0 + std::exp(-X.row(i).dot(beta0)));
    y[i] = stream.uniform() < pr ? 1.0 : 0.0;
  }
  PenalizedProblem prob;
  prob.design = DesignMatrix::from_matrix(X);
  prob.response = y;
  prob.family = make_family(FamilyKind::logistic);
  prob.lambda = 0.05;
  const FitResult fr = fit(prob);
  CHECK(fr.converged);
  CHECK(fr.kkt_sup_violation <= 1e-6);
  CHECK(fr.sign_consistency_ok);
}

TEST_CASE("quantile fit: smoothing path reaches a certified subgradient point") {
  rng::Stream stream(14, 1);
  const int n = 60, p = 4;
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = stream.normal();
    y[i] = 1.2 * X(i, 0) + 0.4 * stream.normal();
  }
  PenalizedProblem prob;
  prob.design = DesignMatrix::from_matrix(X);
  prob.response = y;
  prob.family = make_family(FamilyKind::quantile, 0.25);
  prob.lambda = 0.05;
  SolverConfig cfg;
  cfg.kink_tolerance = 1e-6;
  const FitResult fr = fit(prob, cfg);
  CHECK(fr.converged);
  CHECK(fr.kkt_sup_violation <= 1e-6);

  // brute-force objective comparison on the active coordinate
  auto objective = [&](const Eigen::VectorXd& b) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = y[i] - X.row(i).dot(b);
      acc += u > 0 ? 0.25 * u : -0.75 * u;
    }
    return acc / n + prob.lambda * b.lpNorm<1>();
  };
  double best = std::numeric_limits<double>::infinity();
  for (double b0 = 0.9; b0 <= 1.5; b0 += 0.002) {
    Eigen::VectorXd b = fr.beta;
    b[0] = b0;
    best = std::min(best, objective(b));
  }
  CHECK(objective(fr.beta) <= best + 1e-6);
}

TEST_CASE("huber fit stays smooth and certified") {
  PenalizedProblem prob = gaussian_problem(50, 8, 20, 0.1, 2);
  prob.family = make_family(FamilyKind::huber, 1.0);
  const FitResult fr = fit(prob);
  CHECK(fr.converged);
  CHECK(fr.kkt_sup_violation <= 1e-6);
}

TEST_CASE("solution l1-norm is monotone along the lambda path") {
  PenalizedProblem prob = gaussian_problem(60, 15, 16, 0.0, 4);
  double previous = std::numeric_limits<double>::infinity();
  for (const double lam : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    prob.lambda = lam;
    const double l1 = fit(prob).beta.lpNorm<1>();
    CHECK(l1 <= previous + 1e-7);
    previous = l1;
  }
}

TEST_CASE("permuting design columns permutes the solution") {
  PenalizedProblem prob = gaussian_problem(40, 6, 18, 0.15, 3);
  SolverConfig tight;
  tight.kkt_tolerance = 1e-11;
  const FitResult base = fit(prob, tight);
  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Eigen::MatrixXd Xp(40, 6);
  for (int j = 0; j < 6; ++j) Xp.col(j) = prob.design.X.col(perm[j]);
  PenalizedProblem permuted = prob;
  permuted.design = DesignMatrix::from_matrix(Xp);
  const FitResult shuffled = fit(permuted, tight);
  for (int j = 0; j < 6; ++j) {
    CHECK(shuffled.beta[j] == doctest::Approx(base.beta[perm[j]]).epsilon(1e-8));
  }
}

TEST_CASE("objective trace is non-increasing") {
  PenalizedProblem prob = gaussian_problem(50, 12, 19, 0.2, 3);
  SolverConfig cfg;
  cfg.record_objective_trace = true;
  const FitResult fr = fit(prob, cfg);
  REQUIRE(fr.objective_trace.size() > 2);
  for (size_t k = 1; k < fr.objective_trace.size(); ++k) {
    CHECK(fr.objective_trace[k] <=
          fr.objective_trace[k - 1] * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("problem validation rejects malformed inputs") {
  PenalizedProblem prob = gaussian_problem(20, 4, 77, 0.1);
  PenalizedProblem bad = prob;
  bad.response = Eigen::VectorXd::Zero(7);
  CHECK_THROWS_AS(fit(bad), std::invalid_argument);

  bad = prob;
  bad.lambda = -0.5;
  CHECK_THROWS_AS(fit(bad), std::invalid_argument);

  bad = prob;
  bad.weights = Eigen::VectorXd::Zero(20);  // weights must be positive
  CHECK_THROWS_AS(fit(bad), std::invalid_argument);

  bad = prob;
  bad.family = make_family(FamilyKind::logistic);  // responses leave {0,1}
  CHECK_THROWS_AS(fit(bad), std::invalid_argument);
}

TEST_CASE("row multiplicities reproduce the expanded problem") {
  // 4 distinct rows duplicated many times vs the equivalent weighted problem
  rng::Stream stream(23, 5);
  Eigen::MatrixXd rows(4, 3);
  for (int r = 0; r < 4; ++r) {
    for (int j = 0; j < 3; ++j) rows(r, j) = stream.normal();
  }
  Eigen::VectorXd mult(4);
  mult << 3, 7, 2, 8;
  Eigen::VectorXd ybar(4);
  for (int r = 0; r < 4; ++r) ybar[r] = stream.normal();

  const auto total = static_cast<int>(mult.sum());
  Eigen::MatrixXd Xbig(total, 3);
  Eigen::VectorXd ybig(total);
  int at = 0;
  for (int r = 0; r < 4; ++r) {
    for (int k = 0; k < static_cast<int>(mult[r]); ++k) {
      Xbig.row(at) = rows.row(r);
      ybig[at] = ybar[r];
      ++at;
    }
  }

  for (const std::string spec : {"gaussian", "logistic"}) {
    const Family fam = parse_family(spec);
    Eigen::VectorXd resp_small = ybar, resp_big = ybig;
    if (spec == "logistic") {
      resp_small = (ybar.array().tanh() * 0.4 + 0.5).matrix();
      for (int r = 0, pos = 0; r < 4; ++r) {
        for (int k = 0; k < static_cast<int>(mult[r]); ++k) {
          resp_big[pos++] = resp_small[r];
        }
      }
    }
    PenalizedProblem grouped;
    grouped.design = DesignMatrix::from_matrix(rows);
    grouped.response = resp_small;
    grouped.family = fam;
    grouped.lambda = 0.07;
    grouped.weights = mult;
    PenalizedProblem expanded;
    expanded.design = DesignMatrix::from_matrix(Xbig);
    expanded.response = resp_big;
    expanded.family = fam;
    expanded.lambda = 0.07;
    const FitResult a = fit(grouped);
    const FitResult b = fit(expanded);
    CHECK((a.beta - b.beta).lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-9));
  }
}
