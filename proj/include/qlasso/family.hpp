#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlasso {

// Thrown when a regularity bound (A3/A4/B style) cannot hold on the
// requested interval, e.g. h or V∘G vanishes on the evaluation grid.
class condition_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo;
  double hi;
  bool contains(double x) const { return x > lo && x < hi; }
  bool contains_closed(double x) const { return x >= lo && x <= hi; }
};

// Quasi-likelihood family: variance function V on the mean domain, strictly
// increasing inverse link G with derivative g, and the derived objects
//   gamma(mu) = int_{y0}^{mu} du / V(u)        (canonical link up to a shift)
//   H(z)      = gamma(G(z)),   h(z) = H'(z) = g(z) / V(G(z))
//   loss      rho(y, z) = -Q(y, G(z)),  Q(y, mu) = int_y^mu (y-u)/V(u) du
//   regret    B(mu, mu0) = int_{mu0}^mu (u - mu0) / V(u) du
// Closed forms are used when installed; otherwise adaptive quadrature.
struct QuasiFamily {
  std::function<double(double)> variance;
  std::function<double(double)> inverse_link;
  std::function<double(double)> link_derivative;
  double y0 = 0.0;
  Interval mean_domain{-std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity()};

  std::function<double(double, double)> loss_closed;    // rho(y, z)
  std::function<double(double, double)> regret_closed;  // B(mu, mu0)
  std::function<double(double)> h_closed;
  std::function<double(double)> canonical_link_closed;  // gamma(mu)

  double h(double z) const;
  double H(double z) const;
  double canonical_link(double mu) const;
};

struct DerivativeInterval {
  double selection;  // midpoint of the subdifferential at kinks
  double lo;
  double hi;
  bool at_kink;
};

// Per-response loss that is Lipschitz in the linear predictor with constant
// at most one (after normalization).
struct RobustLoss {
  std::function<double(double, double)> rho;
  std::function<double(double, double)> drho_dz;  // subgradient selection
  std::function<DerivativeInterval(double, double, double)> subdifferential;
  // prox of mu * rho(y, .) evaluated at w; empty for smooth losses
  std::function<double(double, double, double)> prox;
  double lipschitz_constant = 1.0;
  bool smooth = false;
};

// Bounds of Conditions A3-A6 and B on |z| <= K_X + K_0.
struct ConditionConstants {
  double C_h = std::numeric_limits<double>::quiet_NaN();
  double C_V = std::numeric_limits<double>::quiet_NaN();
  double L_h = std::numeric_limits<double>::quiet_NaN();
  double L_g = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> C_l;
  double interval_radius = 0.0;
};

enum class FamilyKind { gaussian, logistic, binary_link, quantile, lad, huber };

struct Family {
  FamilyKind kind = FamilyKind::gaussian;
  double param = 0.0;  // alpha for quantile, k for huber
  std::string label;   // serialized form, e.g. "quantile:0.25"
  Interval response_domain{-std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity()};
  std::optional<QuasiFamily> quasi;
  std::optional<RobustLoss> robust;

  bool is_smooth() const { return quasi.has_value() || (robust && robust->smooth); }
  bool has_quasi() const { return quasi.has_value(); }
};

Family make_family(FamilyKind kind, double param = 0.0);
Family make_binary_link_family(std::function<double(double)> G,
                               std::function<double(double)> g,
                               std::string label = "binary_link");
// Fully custom quasi family; loss and regret evaluated by quadrature.
Family make_custom_quasi(std::function<double(double)> V,
                         std::function<double(double)> G,
                         std::function<double(double)> g, double y0,
                         Interval mean_domain, std::string label = "custom");

Family parse_family(const std::string& text);
std::string format_family(const Family& family);

double loss(const Family& family, double y, double z);
double loss_derivative(const Family& family, double y, double z);
DerivativeInterval loss_derivative_interval(const Family& family, double y,
                                            double z, double kink_tol = 1e-9);
double regret(const Family& family, double mu, double mu0);
double average_regret(const Family& family, const Eigen::VectorXd& linear_predictor,
                      const Eigen::VectorXd& mu0);

ConditionConstants estimate_condition_constants(const Family& family, double K_X,
                                                double K_0, int grid_points);
// Condition B: l_i(z) = E[rho(Y_i, z) | x_i] supplied by the caller; C_l is
// 2 / inf l_i'' with the second derivative taken by central differences.
double estimate_condition_cl(
    const std::vector<std::function<double(double)>>& conditional_losses,
    double K_X, double K_0, int grid_points);

}  // namespace qlasso
