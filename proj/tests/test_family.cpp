#include <doctest.h>

#include <cmath>

#include "qlasso/family.hpp"
#include "qlasso/rng.hpp"

using namespace qlasso;

namespace {

// independent oracle: composite Simpson on a fixed fine grid
double oracle_integral(const std::function<double(double)>& f, double a, double b,
                       int panels = 20000) {
  if (a == b) return 0.0;
  const double h = (b - a) / (2.0 * panels);
  double acc = f(a) + f(b);
  for (int k = 1; k < 2 * panels; ++k) {
    acc += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  }
  return acc * h / 3.0;
}

double oracle_quasi_loss(const std::function<double(double)>& V,
                         const std::function<double(double)>& G, double y,
                         double z) {
  const double mu = G(z);
  return -oracle_integral([&](double u) { return (y - u) / V(u); }, y, mu);
}

double central_diff(const std::function<double(double)>& f, double z,
                    double h = 1e-6) {
  return (f(z + h) - f(z - h)) / (2.0 * h);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("gaussian loss matches the quadratic closed form and the integral") {
  const Family f = make_family(FamilyKind::gaussian);
  CHECK(loss(f, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  const double oracle = oracle_quasi_loss([](double) { return 1.0; },
                                          [](double z) { return z; }, 1.0, 0.0);
  CHECK(loss(f, 1.0, 0.0) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(loss(f, 0.3, 0.7) - loss(f, 0.3, 0.7) == 0.0);
}

TEST_CASE("logistic loss matches log(1+e^z) - yz and its quadrature oracle") {
  const Family f = make_family(FamilyKind::logistic);
  CHECK(loss(f, 0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  for (const double z : {-3.0, -0.5, 0.4, 2.0}) {
    CHECK(loss(f, 0.0, z) - loss(f, 0.0, 0.0) ==
          doctest::Approx(std::log((1.0 + std::exp(z)) / 2.0)).epsilon(1e-12));
    const double oracle = oracle_quasi_loss(
        [](double u) { return u * (1.0 - u); }, sigmoid, 0.25, z);
    CHECK(loss(f, 0.25, z) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("built-in families report the documented basic structure") {
  const Family g = make_family(FamilyKind::gaussian);
  CHECK(g.quasi->variance(3.7) == 1.0);
  CHECK(g.quasi->inverse_link(1.3) == 1.3);
  const Family l = make_family(FamilyKind::logistic);
  CHECK(l.quasi->variance(0.25) == doctest::Approx(0.25 * 0.75));
  CHECK(l.quasi->inverse_link(0.0) == doctest::Approx(0.5));
  CHECK(l.robust.has_value());  // both views
  // quantile at the median is least absolute deviations
  const Family q = make_family(FamilyKind::quantile, 0.5);
  const Family lad = make_family(FamilyKind::lad);
  for (const double z : {-2.0, -0.3, 0.0, 1.7}) {
    CHECK(loss(q, 0.0, z) == doctest::Approx(std::abs(z) / 2.0).epsilon(1e-14));
    CHECK(loss(q, 0.4, z) == doctest::Approx(loss(lad, 0.4, z)).epsilon(1e-14));
  }
}

TEST_CASE("loss derivatives match the documented values and finite differences") {
  const Family g = make_family(FamilyKind::gaussian);
  CHECK(loss_derivative(g, 2.0, 0.0) == doctest::Approx(-2.0).epsilon(1e-12));
  const Family l = make_family(FamilyKind::logistic);
  CHECK(loss_derivative(l, 1.0, 0.0) == doctest::Approx(-0.5).epsilon(1e-12));
  const Family q = make_family(FamilyKind::quantile, 0.3);
  CHECK(loss_derivative(q, 1.0, 0.2) == doctest::Approx(-0.3));
  CHECK(loss_derivative(q, -1.0, 0.2) == doctest::Approx(0.7));

  rng::Stream stream(42, 0);
  const Family probit = make_family(FamilyKind::binary_link);
  const Family huber = make_family(FamilyKind::huber, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double z = 4.0 * (stream.uniform() - 0.5);
    {
      const double y = 3.0 * (stream.uniform() - 0.5);
      const double d = loss_derivative(g, y, z);
      const double fd = central_diff([&](double t) { return loss(g, y, t); }, z);
      CHECK(d == doctest::Approx(fd).epsilon(1e-6));
    }
    {
      const double y = stream.uniform();
      const double d = loss_derivative(l, y, z);
      const double fd = central_diff([&](double t) { return loss(l, y, t); }, z);
      CHECK(d == doctest::Approx(fd).epsilon(1e-6));
      const double dp = loss_derivative(probit, y, z);
      const double fdp =
          central_diff([&](double t) { return loss(probit, y, t); }, z);
      CHECK(dp == doctest::Approx(fdp).epsilon(1e-6));
    }
    {
      const double y = 3.0 * (stream.uniform() - 0.5);
      if (std::abs(y - z) > 1e-3) {  // away from the huber knot curvature jump
        const double d = loss_derivative(huber, y, z);
        const double fd =
            central_diff([&](double t) { return loss(huber, y, t); }, z);
        CHECK(d == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("convexity: second differences of rho(y, .) are nonnegative") {
  rng::Stream stream(7, 0);
  const std::vector<Family> families = {
      make_family(FamilyKind::gaussian), make_family(FamilyKind::logistic),
      make_family(FamilyKind::binary_link), make_family(FamilyKind::quantile, 0.25),
      make_family(FamilyKind::huber, 1.345)};
  for (const auto& f : families) {
    for (int rep = 0; rep < 50; ++rep) {
      const double y = f.response_domain.hi <= 1.0 ? stream.uniform()
                                                   : 4.0 * (stream.uniform() - 0.5);
      const double h = 0.05;
      for (double z = -3.0; z <= 3.0; z += 0.25) {
        const double dd = loss(f, y, z + h) - 2.0 * loss(f, y, z) + loss(f, y, z - h);
        CHECK(dd >= -1e-9);
      }
    }
  }
}

TEST_CASE("robust losses are 1-Lipschitz in the linear predictor") {
  rng::Stream stream(11, 0);
  const std::vector<Family> families = {
      make_family(FamilyKind::quantile, 0.25), make_family(FamilyKind::lad),
      make_family(FamilyKind::logistic), make_family(FamilyKind::huber, 0.9)};
  for (const auto& f : families) {
    CHECK(f.robust->lipschitz_constant <= 1.0 + 1e-15);
    for (int i = 0; i < 1000; ++i) {
      const double y = f.response_domain.hi <= 1.0
                           ? (stream.uniform() < 0.5 ? 0.0 : 1.0)
                           : 6.0 * (stream.uniform() - 0.5);
      const double z1 = 6.0 * (stream.uniform() - 0.5);
      const double z2 = 6.0 * (stream.uniform() - 0.5);
      const double lhs = std::abs(f.robust->rho(y, z1) - f.robust->rho(y, z2));
      CHECK(lhs <= std::abs(z1 - z2) * (1.0 + 1e-12) + 1e-15);
    }
  }
  // huber above the normalization threshold is rescaled back to constant one
  const Family big = make_family(FamilyKind::huber, 2.5);
  CHECK(big.robust->lipschitz_constant == doctest::Approx(1.0));
}

TEST_CASE("canonical links have H(z) = z") {
  const Family g = make_family(FamilyKind::gaussian);
  const Family l = make_family(FamilyKind::logistic);
  for (double z = -4.0; z <= 4.0; z += 0.37) {
    CHECK(g.quasi->H(z) == doctest::Approx(z).epsilon(1e-12));
    CHECK(l.quasi->H(z) == doctest::Approx(z).epsilon(1e-12));
    CHECK(g.quasi->h(z) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l.quasi->h(z) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("regret: closed forms, quadrature oracle, nonnegativity") {
  const Family g = make_family(FamilyKind::gaussian);
  CHECK(regret(g, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(regret(g, 0.8, 0.8) == 0.0);

  const Family l = make_family(FamilyKind::logistic);
  for (const double mu : {0.2, 0.5, 0.9}) {
    for (const double mu0 : {0.1, 0.5, 0.8}) {
      const double kl = mu0 * std::log(mu0 / mu) +
                        (1.0 - mu0) * std::log((1.0 - mu0) / (1.0 - mu));
      CHECK(regret(l, mu, mu0) == doctest::Approx(kl).epsilon(1e-12));
      const double oracle = oracle_integral(
          [&](double u) { return (u - mu0) / (u * (1.0 - u)); }, mu0, mu);
      CHECK(regret(l, mu, mu0) == doctest::Approx(oracle).epsilon(1e-9));
      CHECK(regret(l, mu, mu0) >= 0.0);
      if (mu != mu0) CHECK(regret(l, mu, mu0) > 1e-12);
    }
  }

  Eigen::VectorXd f(3), mu0(3);
  f << 0.0, 1.0, -1.0;
  mu0 << 0.5, 0.5, 0.5;
  double manual = 0.0;
  for (int i = 0; i < 3; ++i) manual += regret(l, sigmoid(f[i]), mu0[i]);
  CHECK(average_regret(l, f, mu0) == doctest::Approx(manual / 3.0).epsilon(1e-14));
}

TEST_CASE("regret and loss do not depend on the base point y0") {
  // same gaussian family with a shifted y0 evaluated through quadrature
  const Family shifted = make_custom_quasi(
      [](double) { return 1.0; }, [](double z) { return z; },
      [](double) { return 1.0; }, /*y0=*/3.0,
      Interval{-std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity()},
      "gaussian-shifted");
  const Family base = make_family(FamilyKind::gaussian);
  for (const double y : {-1.0, 0.4}) {
    for (const double z : {-0.7, 0.0, 1.3}) {
      CHECK(loss(shifted, y, z) == doctest::Approx(loss(base, y, z)).epsilon(1e-9));
    }
  }
  CHECK(regret(shifted, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-9));
  // H shifts by a constant but h is unchanged
  CHECK(shifted.quasi->h(0.4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("custom quasi family with the logistic kernel reproduces closed forms") {
  const Family custom = make_custom_quasi(
      [](double u) { return u * (1.0 - u); }, sigmoid,
      [](double z) {
        const double s = sigmoid(z);
        return s * (1.0 - s);
      },
      0.5, Interval{0.0, 1.0}, "custom-logit");
  const Family l = make_family(FamilyKind::logistic);
  for (const double z : {-1.5, 0.2, 2.5}) {
    CHECK(loss(custom, 0.25, z) == doctest::Approx(loss(l, 0.25, z)).epsilon(1e-9));
  }
  CHECK(regret(custom, 0.3, 0.6) == doctest::Approx(regret(l, 0.3, 0.6)).epsilon(1e-9));
  CHECK(custom.quasi->H(1.1) == doctest::Approx(1.1).epsilon(1e-8));
}

TEST_CASE("condition constants on the interval |z| <= K_X + K_0") {
  const Family l = make_family(FamilyKind::logistic);
  for (const double k : {0.5, 1.5, 3.0}) {
    const ConditionConstants c = estimate_condition_constants(l, k, 0.0, 257);
    CHECK(c.C_h == doctest::Approx(1.0).epsilon(1e-12));  // canonical link
    const double vg_edge = sigmoid(k) * (1.0 - sigmoid(k));
    CHECK(c.C_V == doctest::Approx(2.0 / vg_edge).epsilon(1e-10));
  }
  const Family g = make_family(FamilyKind::gaussian);
  const ConditionConstants cg = estimate_condition_constants(g, 2.0, 1.0, 129);
  CHECK(cg.C_V == doctest::Approx(2.0));
  CHECK(cg.C_h == doctest::Approx(1.0));
  CHECK(cg.L_h == 0.0);
  CHECK(cg.L_g == 0.0);
  // logistic Lipschitz constants: L_g = 2 sup |g'|, attained inside
  const ConditionConstants cl = estimate_condition_constants(l, 2.0, 0.0, 4097);
  CHECK(cl.L_h == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(cl.L_g == doctest::Approx(2.0 / (6.0 * std::sqrt(3.0))).epsilon(1e-3));

  CHECK_THROWS_AS(estimate_condition_constants(l, 1.0, 0.0, 32),
                  std::invalid_argument);
  // h vanishes at the origin for a cubic link
  const Family cubic = make_custom_quasi(
      [](double) { return 1.0; }, [](double z) { return z * z * z; },
      [](double z) { return 3.0 * z * z; }, 0.0,
      Interval{-std::numeric_limits<double>::infinity(),
               std::numeric_limits<double>::infinity()},
      "cubic");
  CHECK_THROWS_AS(estimate_condition_constants(cubic, 1.0, 0.0, 65),
                  condition_failure);
}

TEST_CASE("Condition B curvature from user-supplied conditional losses") {
  // logistic conditional law: l(z) = log(1+e^z) - pi z has l'' = V o G
  auto make_l = [](double pi) {
    return [pi](double z) {
      return (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) -
             pi * z;
    };
  };
  const double k = 1.5;
  const double cl = estimate_condition_cl({make_l(0.3), make_l(0.7)}, k, 0.0, 513);
  const double expected = 2.0 / (sigmoid(k) * (1.0 - sigmoid(k)));
  CHECK(cl == doctest::Approx(expected).epsilon(1e-4));
  // a flat conditional loss has no curvature
  CHECK_THROWS_AS(
      estimate_condition_cl({[](double z) { return std::abs(z) * 0.0; }}, 1.0, 0.0, 65),
      condition_failure);
}

TEST_CASE("family parsing and formatting round-trip") {
  for (const std::string spec :
       {"gaussian", "logistic", "probit", "lad", "quantile:0.25", "huber:1.345"}) {
    const Family f = parse_family(spec);
    CHECK(format_family(f) == spec);
  }
  CHECK_THROWS_AS(parse_family("cauchy"), std::invalid_argument);
  CHECK_THROWS_AS(parse_family("quantile:1.5"), std::invalid_argument);
  CHECK_THROWS_AS(make_family(FamilyKind::huber, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(regret(make_family(FamilyKind::logistic), 1.5, 0.5),
                  std::domain_error);
  CHECK_THROWS_AS(regret(make_family(FamilyKind::lad), 0.5, 0.5),
                  std::invalid_argument);
}
