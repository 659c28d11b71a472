#include "qlasso/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qlasso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double xlogx(double t) { return t > 0.0 ? t * std::log(t) : 0.0; }

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Adaptive Simpson with absolute+relative control; integrands here are the
// smooth 1-D kernels of Q, gamma and B.
double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                            double m, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0) {
    throw std::runtime_error("quadrature failed to converge");
  }
  if (std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = simpson(a, b, fa, fm, fb);
  const double tol = std::max(rel_tol * std::abs(whole), 1e-15);
  return adaptive_simpson_rec(f, a, m, b, fa, fm, fb, whole, tol, 48);
}

void check_mean_in_domain(const QuasiFamily& q, double mu) {
  if (!q.mean_domain.contains(mu)) {
    throw std::domain_error("mean value outside the family mean domain");
  }
}

double quasi_loss(const QuasiFamily& q, double y, double z) {
  if (q.loss_closed) return q.loss_closed(y, z);
  const double mu = q.inverse_link(z);
  check_mean_in_domain(q, mu);
  // rho(y,z) = -Q(y, G(z)) = -int_y^{G(z)} (y-u)/V(u) du
  return -integrate([&](double u) { return (y - u) / q.variance(u); }, y, mu);
}

double quasi_regret(const QuasiFamily& q, double mu, double mu0) {
  if (q.regret_closed) return q.regret_closed(mu, mu0);
  check_mean_in_domain(q, mu);
  check_mean_in_domain(q, mu0);
  return integrate([&](double u) { return (u - mu0) / q.variance(u); }, mu0, mu);
}

RobustLoss logistic_robust() {
  RobustLoss r;
  r.rho = [](double y, double z) { return log1pexp(z) - y * z; };
  r.drho_dz = [](double y, double z) { return sigmoid(z) - y; };
  r.subdifferential = [](double y, double z, double) {
    const double d = sigmoid(z) - y;
    return DerivativeInterval{d, d, d, false};
  };
  r.lipschitz_constant = 1.0;
  r.smooth = true;
  return r;
}

Family gaussian_family() {
  Family f;
  f.kind = FamilyKind::gaussian;
  f.label = "gaussian";
  QuasiFamily q;
  q.variance = [](double) { return 1.0; };
  q.inverse_link = [](double z) { return z; };
  q.link_derivative = [](double) { return 1.0; };
  q.y0 = 0.0;
  q.mean_domain = {-kInf, kInf};
  q.loss_closed = [](double y, double z) { return 0.5 * (y - z) * (y - z); };
  q.regret_closed = [](double mu, double mu0) {
    return 0.5 * (mu - mu0) * (mu - mu0);
  };
  q.h_closed = [](double) { return 1.0; };
  q.canonical_link_closed = [](double mu) { return mu; };
  f.quasi = std::move(q);
  return f;
}

Family logistic_family() {
  Family f;
  f.kind = FamilyKind::logistic;
  f.label = "logistic";
  f.response_domain = {0.0, 1.0};
  QuasiFamily q;
  q.variance = [](double u) { return u * (1.0 - u); };
  q.inverse_link = [](double z) { return sigmoid(z); };
  q.link_derivative = [](double z) {
    const double s = sigmoid(z);
    return s * (1.0 - s);
  };
  q.y0 = 0.5;
  q.mean_domain = {0.0, 1.0};
  q.loss_closed = [](double y, double z) {
    return log1pexp(z) - y * z + xlogx(y) + xlogx(1.0 - y);
  };
  q.regret_closed = [](double mu, double mu0) {
    if (!(mu > 0.0 && mu < 1.0)) {
      throw std::domain_error("mean value outside the family mean domain");
    }
    return xlogx(mu0) - mu0 * std::log(mu) + xlogx(1.0 - mu0) -
           (1.0 - mu0) * std::log(1.0 - mu);
  };
  q.h_closed = [](double) { return 1.0; };
  q.canonical_link_closed = [](double mu) {
    return std::log(mu / (1.0 - mu));
  };
  f.quasi = std::move(q);
  f.robust = logistic_robust();
  return f;
}

Family quantile_family(double alpha, FamilyKind kind, std::string label) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("quantile level must lie in (0, 1)");
  }
  Family f;
  f.kind = kind;
  f.param = alpha;
  f.label = std::move(label);
  RobustLoss r;
  r.rho = [alpha](double y, double z) {
    const double u = y - z;
    return u > 0.0 ? alpha * u : (1.0 - alpha) * (-u);
  };
  r.drho_dz = [alpha](double y, double z) {
    if (z < y) return -alpha;
    if (z > y) return 1.0 - alpha;
    return 0.5 - alpha;  // midpoint of [-alpha, 1-alpha]
  };
  r.subdifferential = [alpha](double y, double z, double kink_tol) {
    if (std::abs(y - z) <= kink_tol) {
      return DerivativeInterval{0.5 - alpha, -alpha, 1.0 - alpha, true};
    }
    const double d = z < y ? -alpha : 1.0 - alpha;
    return DerivativeInterval{d, d, d, false};
  };
  r.prox = [alpha](double y, double w, double mu) {
    // prox of mu * rho(y, .) at w, via u = y - v
    const double a = y - w;
    double u;
    if (a > mu * alpha) {
      u = a - mu * alpha;
    } else if (a < -mu * (1.0 - alpha)) {
      u = a + mu * (1.0 - alpha);
    } else {
      u = 0.0;
    }
    return y - u;
  };
  r.lipschitz_constant = std::max(alpha, 1.0 - alpha);
  r.smooth = false;
  f.robust = std::move(r);
  return f;
}

Family huber_family(double k) {
  if (!(k > 0.0)) throw std::invalid_argument("huber parameter must be positive");
  Family f;
  f.kind = FamilyKind::huber;
  f.param = k;
  {
    std::ostringstream os;
    os << "huber:" << k;
    f.label = os.str();
  }
  // Rescale by max(1, k) so the Lipschitz constant never exceeds one.
  const double scale = std::max(1.0, k);
  RobustLoss r;
  r.rho = [k, scale](double y, double z) {
    const double u = std::abs(y - z);
    const double v = u <= k ? 0.5 * u * u : k * u - 0.5 * k * k;
    return v / scale;
  };
  r.drho_dz = [k, scale](double y, double z) {
    const double u = y - z;
    return -std::clamp(u, -k, k) / scale;
  };
  r.subdifferential = [k, scale](double y, double z, double) {
    const double d = -std::clamp(y - z, -k, k) / scale;
    return DerivativeInterval{d, d, d, false};
  };
  r.lipschitz_constant = k / scale;
  r.smooth = true;
  f.robust = std::move(r);
  return f;
}

}  // namespace

double QuasiFamily::h(double z) const {
  if (h_closed) return h_closed(z);
  const double mu = inverse_link(z);
  check_mean_in_domain(*this, mu);
  const double v = variance(mu);
  if (!(v > 0.0)) throw condition_failure("variance function vanishes");
  return link_derivative(z) / v;
}

double QuasiFamily::canonical_link(double mu) const {
  check_mean_in_domain(*this, mu);
  // normalized so that gamma(y0) = 0
  if (canonical_link_closed) {
    return canonical_link_closed(mu) - canonical_link_closed(y0);
  }
  return integrate([&](double u) { return 1.0 / variance(u); }, y0, mu);
}

double QuasiFamily::H(double z) const { return canonical_link(inverse_link(z)); }

Family make_family(FamilyKind kind, double param) {
  switch (kind) {
    case FamilyKind::gaussian:
      return gaussian_family();
    case FamilyKind::logistic:
      return logistic_family();
    case FamilyKind::binary_link:
      // default instance: probit
      return make_binary_link_family(std_normal_cdf, std_normal_pdf, "probit");
    case FamilyKind::quantile: {
      std::ostringstream os;
      os << "quantile:" << param;
      return quantile_family(param, FamilyKind::quantile, os.str());
    }
    case FamilyKind::lad:
      return quantile_family(0.5, FamilyKind::lad, "lad");
    case FamilyKind::huber:
      return huber_family(param);
  }
  throw std::invalid_argument("unknown family kind");
}

Family make_binary_link_family(std::function<double(double)> G,
                               std::function<double(double)> g,
                               std::string label) {
  Family f;
  f.kind = FamilyKind::binary_link;
  f.label = std::move(label);
  f.response_domain = {0.0, 1.0};
  QuasiFamily q;
  q.variance = [](double u) { return u * (1.0 - u); };
  q.link_derivative = std::move(g);
  q.y0 = 0.5;
  q.mean_domain = {0.0, 1.0};
  // With V(u) = u(1-u) the criterion integrals have the Bernoulli closed form
  // regardless of the link.
  q.loss_closed = [G](double y, double z) {
    const double mu = G(z);
    if (!(mu > 0.0 && mu < 1.0)) {
      throw std::domain_error("mean value outside the family mean domain");
    }
    return -(y * std::log(mu) + (1.0 - y) * std::log(1.0 - mu)) + xlogx(y) +
           xlogx(1.0 - y);
  };
  q.inverse_link = std::move(G);
  q.regret_closed = [](double mu, double mu0) {
    if (!(mu > 0.0 && mu < 1.0)) {
      throw std::domain_error("mean value outside the family mean domain");
    }
    return xlogx(mu0) - mu0 * std::log(mu) + xlogx(1.0 - mu0) -
           (1.0 - mu0) * std::log(1.0 - mu);
  };
  q.canonical_link_closed = [](double mu) {
    return std::log(mu / (1.0 - mu));
  };
  f.quasi = std::move(q);
  return f;
}

Family make_custom_quasi(std::function<double(double)> V,
                         std::function<double(double)> G,
                         std::function<double(double)> g, double y0,
                         Interval mean_domain, std::string label) {
  if (!mean_domain.contains(y0)) {
    throw std::invalid_argument("y0 must lie inside the mean domain");
  }
  Family f;
  f.kind = FamilyKind::binary_link;  // treated as generic quasi family
  f.label = std::move(label);
  QuasiFamily q;
  q.variance = std::move(V);
  q.inverse_link = std::move(G);
  q.link_derivative = std::move(g);
  q.y0 = y0;
  q.mean_domain = mean_domain;
  f.quasi = std::move(q);
  return f;
}

Family parse_family(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : text.substr(colon + 1);
  auto numeric = [&](const char* what) {
    if (arg.empty()) throw std::invalid_argument(std::string("missing ") + what);
    return std::stod(arg);
  };
  if (kind == "gaussian") return make_family(FamilyKind::gaussian);
  if (kind == "logistic") return make_family(FamilyKind::logistic);
  if (kind == "probit") return make_family(FamilyKind::binary_link);
  if (kind == "lad") return make_family(FamilyKind::lad);
  if (kind == "quantile")
    return make_family(FamilyKind::quantile, numeric("quantile level"));
  if (kind == "huber") return make_family(FamilyKind::huber, numeric("huber parameter"));
  throw std::invalid_argument("unknown family: " + text);
}

std::string format_family(const Family& family) { return family.label; }

double loss(const Family& family, double y, double z) {
  if (family.quasi) return quasi_loss(*family.quasi, y, z);
  return family.robust->rho(y, z);
}

double loss_derivative(const Family& family, double y, double z) {
  if (family.quasi) {
    const QuasiFamily& q = *family.quasi;
    return -(y - q.inverse_link(z)) * q.h(z);
  }
  return family.robust->drho_dz(y, z);
}

DerivativeInterval loss_derivative_interval(const Family& family, double y,
                                            double z, double kink_tol) {
  if (family.quasi) {
    const double d = loss_derivative(family, y, z);
    return {d, d, d, false};
  }
  return family.robust->subdifferential(y, z, kink_tol);
}

double regret(const Family& family, double mu, double mu0) {
  if (!family.quasi) {
    throw std::invalid_argument("regret requires a quasi-likelihood family");
  }
  return quasi_regret(*family.quasi, mu, mu0);
}

double average_regret(const Family& family, const Eigen::VectorXd& linear_predictor,
                      const Eigen::VectorXd& mu0) {
  if (linear_predictor.size() != mu0.size()) {
    throw std::invalid_argument("average_regret: size mismatch");
  }
  if (linear_predictor.size() == 0) return 0.0;
  const QuasiFamily& q = *family.quasi;
  double total = 0.0;
  for (Eigen::Index i = 0; i < linear_predictor.size(); ++i) {
    total += quasi_regret(q, q.inverse_link(linear_predictor[i]), mu0[i]);
  }
  return total / static_cast<double>(linear_predictor.size());
}

ConditionConstants estimate_condition_constants(const Family& family, double K_X,
                                                double K_0, int grid_points) {
  if (grid_points < 64) {
    throw std::invalid_argument("condition constants need at least 64 grid points");
  }
  if (!family.quasi) {
    throw std::invalid_argument(
        "conditions A3-A6 apply to quasi-likelihood families; "
        "use estimate_condition_cl for Condition B");
  }
  const QuasiFamily& q = *family.quasi;
  const double radius = K_X + K_0;
  ConditionConstants out;
  out.interval_radius = radius;

  double h_min = kInf, h_max = -kInf;
  double vg_min = kInf, vg_max = -kInf;
  double lh = 0.0, lg = 0.0;
  double prev_h = 0.0, prev_g = 0.0, prev_z = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double z = -radius + 2.0 * radius * i / (grid_points - 1);
    const double mu = q.inverse_link(z);
    if (!q.mean_domain.contains(mu)) {
      throw condition_failure("inverse link leaves the mean domain on the interval");
    }
    const double vg = q.variance(mu);
    const double hz = q.h(z);
    if (!(vg > 0.0) || !std::isfinite(vg)) {
      throw condition_failure("V o G vanishes or diverges on the interval");
    }
    if (!(hz > 0.0) || !std::isfinite(hz)) {
      throw condition_failure("h vanishes or diverges on the interval");
    }
    h_min = std::min(h_min, hz);
    h_max = std::max(h_max, hz);
    vg_min = std::min(vg_min, vg);
    vg_max = std::max(vg_max, vg);
    const double gz = q.link_derivative(z);
    if (i > 0) {
      const double dz = z - prev_z;
      lh = std::max(lh, std::abs(hz - prev_h) / dz);
      lg = std::max(lg, std::abs(gz - prev_g) / dz);
    }
    prev_h = hz;
    prev_g = gz;
    prev_z = z;
  }
  out.C_h = std::max(h_max, 1.0 / h_min);
  out.C_V = std::max(2.0 * vg_max, 2.0 / vg_min);
  out.L_h = lh;
  out.L_g = 2.0 * lg;  // A6 carries the factor |z - z0| / 2
  return out;
}

double estimate_condition_cl(
    const std::vector<std::function<double(double)>>& conditional_losses,
    double K_X, double K_0, int grid_points) {
  if (grid_points < 64) {
    throw std::invalid_argument("condition constants need at least 64 grid points");
  }
  if (conditional_losses.empty()) {
    throw std::invalid_argument("Condition B needs at least one conditional loss");
  }
  const double radius = K_X + K_0;
  const double dz = 2.0 * radius / (grid_points - 1);
  double min_curvature = kInf;
  for (const auto& l : conditional_losses) {
    for (int i = 0; i < grid_points; ++i) {
      const double z = -radius + dz * i;
      const double dd = (l(z + dz) - 2.0 * l(z) + l(z - dz)) / (dz * dz);
      min_curvature = std::min(min_curvature, dd);
    }
  }
  if (!(min_curvature > 0.0)) {
    throw condition_failure("conditional loss has no curvature on the interval");
  }
  return 2.0 / min_curvature;
}

}  // namespace qlasso
