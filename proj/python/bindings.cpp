#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qlasso/io.hpp"

namespace py = pybind11;
using namespace qlasso;

namespace {

IndexSet set_from_list(const std::vector<Eigen::Index>& one_based) {
  return IndexSet::from_one_based(one_based);
}

py::dict tuning_dict(const TuningLevels& lv) {
  py::dict d;
  d["lambda_eps"] = lv.lambda_eps;
  d["lambda_0"] = lv.lambda_0;
  d["lambda_eps_robust"] = lv.lambda_eps_robust;
  d["alpha_oracle"] = lv.alpha_oracle;
  d["alpha_robust"] = lv.alpha_robust;
  d["alpha_select"] = lv.alpha_select;
  return d;
}

}  // namespace

PYBIND11_MODULE(_qlasso, m) {
  m.doc() = "l1-penalized quasi-likelihood and robust estimation";

  py::class_<Family>(m, "Family")
      .def_property_readonly("label", &format_family)
      .def_property_readonly("is_smooth", &Family::is_smooth)
      .def_property_readonly("has_quasi", &Family::has_quasi)
      .def("__repr__",
           [](const Family& f) { return "<qlasso.Family " + format_family(f) + ">"; });

  m.def("make_family", &parse_family, py::arg("spec"),
        "family from its text form, e.g. 'gaussian', 'logistic', 'quantile:0.25'");
  m.def("loss", &loss, py::arg("family"), py::arg("y"), py::arg("z"));
  m.def("loss_derivative", &loss_derivative, py::arg("family"), py::arg("y"),
        py::arg("z"));
  m.def("regret", &regret, py::arg("family"), py::arg("mu"), py::arg("mu0"));
  m.def("average_regret", &average_regret, py::arg("family"),
        py::arg("linear_predictor"), py::arg("mu0"));
  m.def(
      "condition_constants",
      [](const Family& f, double kx, double k0, int grid) {
        const ConditionConstants c = estimate_condition_constants(f, kx, k0, grid);
        py::dict d;
        d["C_h"] = c.C_h;
        d["C_V"] = c.C_V;
        d["L_h"] = c.L_h;
        d["L_g"] = c.L_g;
        d["interval_radius"] = c.interval_radius;
        return d;
      },
      py::arg("family"), py::arg("K_X"), py::arg("K_0"), py::arg("grid_points") = 2049);

  py::class_<CompatibilityResult>(m, "CompatibilityResult")
      .def_readonly("phi_sq", &CompatibilityResult::phi_sq)
      .def_readonly("minimizer", &CompatibilityResult::minimizer)
      .def_readonly("certificate_gap", &CompatibilityResult::certificate_gap)
      .def_property_readonly("method", [](const CompatibilityResult& r) {
        return r.method == CompatibilityMethod::exact_qp_enumeration
                   ? "exact_qp_enumeration"
                   : "projected_search";
      });

  m.def(
      "compatibility_constant",
      [](const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& S, double L) {
        return compatibility_constant(DesignMatrix::from_matrix(X),
                                      set_from_list(S), L);
      },
      py::arg("X"), py::arg("S"), py::arg("L") = 3.0,
      "phi^2(L, S) for one-based S");
  m.def(
      "restricted_eigenvalue",
      [](const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& S, double L) {
        return restricted_eigenvalue(DesignMatrix::from_matrix(X),
                                     set_from_list(S), L);
      },
      py::arg("X"), py::arg("S"), py::arg("L") = 3.0);
  m.def(
      "effective_sparsity",
      [](const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& S) {
        return effective_sparsity(DesignMatrix::from_matrix(X), set_from_list(S));
      },
      py::arg("X"), py::arg("S"));
  m.def(
      "weighted_gram",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& beta0,
         const Family& family) {
        const WeightedGram g =
            weighted_gram(DesignMatrix::from_matrix(X), beta0, family);
        return py::make_tuple(g.Sigma, g.weights_sq);
      },
      py::arg("X"), py::arg("beta0"), py::arg("family"));
  m.def(
      "irrepresentable_theta",
      [](const Eigen::MatrixXd& sigma, const std::vector<Eigen::Index>& S) {
        return irrepresentable_theta(sigma, set_from_list(S));
      },
      py::arg("sigma"), py::arg("S"));
  m.def("gram_sup_distance", &gram_sup_distance, py::arg("sigma_hat"),
        py::arg("sigma"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("beta", &FitResult::beta)
      .def_property_readonly(
          "active_set", [](const FitResult& f) { return f.active_set.one_based(); })
      .def_readonly("kkt_sup_violation", &FitResult::kkt_sup_violation)
      .def_readonly("sign_consistency_ok", &FitResult::sign_consistency_ok)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("objective", &FitResult::objective)
      .def_readonly("converged", &FitResult::converged);

  m.def(
      "fit",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Family& family,
         double lambda, const Eigen::VectorXd& weights, double kkt_tolerance,
         int max_iterations) {
        PenalizedProblem prob;
        prob.design = DesignMatrix::from_matrix(X);
        prob.response = y;
        prob.family = family;
        prob.lambda = lambda;
        if (weights.size()) prob.weights = weights;
        SolverConfig cfg;
        cfg.kkt_tolerance = kkt_tolerance;
        cfg.max_iterations = max_iterations;
        return fit(prob, cfg);
      },
      py::arg("X"), py::arg("y"), py::arg("family"), py::arg("lambda"),
      py::arg("weights") = Eigen::VectorXd(), py::arg("kkt_tolerance") = 1e-6,
      py::arg("max_iterations") = 100000);
  m.def(
      "kkt_residual",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Family& family,
         double lambda, const Eigen::VectorXd& beta) {
        PenalizedProblem prob;
        prob.design = DesignMatrix::from_matrix(X);
        prob.response = y;
        prob.family = family;
        prob.lambda = lambda;
        const KktResidual r = kkt_residual(prob, beta);
        return py::make_tuple(r.tau, r.sup_violation, r.sign_ok);
      },
      py::arg("X"), py::arg("y"), py::arg("family"), py::arg("lambda"),
      py::arg("beta"));
  m.def(
      "restricted_fit",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Family& family,
         const std::vector<Eigen::Index>& S) {
        PenalizedProblem prob;
        prob.design = DesignMatrix::from_matrix(X);
        prob.response = y;
        prob.family = family;
        prob.lambda = 1.0;  // unused by the restricted fit
        return restricted_fit(prob, set_from_list(S));
      },
      py::arg("X"), py::arg("y"), py::arg("family"), py::arg("S"));
  m.def(
      "soft_threshold_fit",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
        return soft_threshold_fit(DesignMatrix::from_matrix(X), y, lambda);
      },
      py::arg("X"), py::arg("y"), py::arg("lambda"));
  m.def(
      "lambda_max",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Family& family) {
        PenalizedProblem prob;
        prob.design = DesignMatrix::from_matrix(X);
        prob.response = y;
        prob.family = family;
        prob.lambda = 1.0;
        return lambda_max(prob);
      },
      py::arg("X"), py::arg("y"), py::arg("family"));

  m.def(
      "tuning_levels",
      [](double sigma, double kappa, double kx, double k0, double ch, double cv,
         double lh, double lg, double n, double p, double t) {
        TheoryConstants c;
        c.sigma = sigma;
        c.kappa = kappa;
        c.K_X = kx;
        c.K_0 = k0;
        c.C_h = ch;
        c.C_V = cv;
        c.L_h = lh;
        c.L_g = lg;
        return tuning_dict(tuning_levels(c, n, p, t));
      },
      py::arg("sigma"), py::arg("kappa"), py::arg("K_X"), py::arg("K_0"),
      py::arg("C_h"), py::arg("C_V"), py::arg("L_h"), py::arg("L_g"), py::arg("n"),
      py::arg("p"), py::arg("t"));

  m.def(
      "simulate",
      [](const std::string& config_json, bool include_records) {
        const auto config =
            io::scenario_from_json(io::json::parse(config_json));
        const auto records = run_scenario(config);
        io::json out;
        out["summary"] = io::to_json(verify_theorems(records, config));
        if (include_records) {
          out["records"] = io::json::array();
          for (const auto& r : records) out["records"].push_back(io::to_json(r));
        }
        return out.dump();
      },
      py::arg("config_json"), py::arg("include_records") = false,
      "run a scenario given as a JSON string; returns a JSON string");

  m.def("example_sec4", []() {
    Eigen::MatrixXd m1(2, 3), m2(2, 3);
    m1 << 5.0 / 13.0, 0.0, 1.0, 12.0 / 13.0, 1.0, 0.0;
    m2 << 12.0 / 13.0, 0.0, 1.0, 5.0 / 13.0, 1.0, 0.0;
    const double rt2 = std::sqrt(2.0);
    const auto S = IndexSet::from_one_based({3});
    const auto d1 = DesignMatrix::from_matrix(rt2 * m1);
    const auto d2 = DesignMatrix::from_matrix(rt2 * m2);
    py::dict out;
    out["phi_sq_first"] = compatibility_constant(d1, S, 3.0).phi_sq;
    out["phi_sq_second"] = compatibility_constant(d2, S, 3.0).phi_sq;
    out["gamma_effective_first"] = effective_sparsity(d1, S);
    out["theta_first"] = irrepresentable_theta(gram(d1), S);
    return out;
  });

  m.attr("__version__") = "0.1.0";
}
