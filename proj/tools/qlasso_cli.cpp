#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "qlasso/io.hpp"

namespace {

using qlasso::io::json;

void write_or_print(const std::optional<std::string>& out, const json& j) {
  if (out) {
    std::ofstream f(*out);
    if (!f) throw std::runtime_error("cannot write " + *out);
    f << j.dump(2) << '\n';
  } else {
    std::cout << j.dump(2) << '\n';
  }
}

std::vector<Eigen::Index> parse_index_list(const std::string& text) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoll(tok));
  }
  return out;
}

int resolve_threads(int cli_threads) {
  if (cli_threads > 0) return cli_threads;
  if (const char* env = std::getenv("QLASSO_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;  // library default
}

int run(int argc, char** argv) {
  CLI::App app{"l1-penalized quasi-likelihood and robust estimation toolkit"};
  app.require_subcommand(1);

  std::string design_path, response_path, weights_path, family_spec = "gaussian";
  std::string set_spec, config_path, sigma_path, beta0_path;
  std::optional<std::string> out_path;
  double lambda = 0.1, L = 3.0, t = -1.0;
  double n_arg = 100, p_arg = 2, gamma_eff = 1.0, sigma = 1.0, kappa = 0.0;
  double kx = 1.0, k0 = 0.0, gamma_x = 0.25;
  std::optional<double> theta_arg, lambda_x_arg;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  double kkt_tol = 1e-6;

  auto* cmd_fit = app.add_subcommand("fit", "solve the l1-penalized problem");
  cmd_fit->add_option("--design", design_path)->required();
  cmd_fit->add_option("--response", response_path)->required();
  cmd_fit->add_option("--family", family_spec);
  cmd_fit->add_option("--lambda", lambda)->required();
  cmd_fit->add_option("--weights", weights_path);
  cmd_fit->add_option("--kkt-tolerance", kkt_tol);
  cmd_fit->add_option("--out", out_path);

  auto* cmd_diag = app.add_subcommand("diagnose", "design diagnostics");
  cmd_diag->add_option("--design", design_path)->required();
  cmd_diag->add_option("--set", set_spec)->required();
  cmd_diag->add_option("--L", L);
  cmd_diag->add_option("--family", family_spec);
  cmd_diag->add_option("--beta0", beta0_path);
  cmd_diag->add_option("--sigma", sigma_path);
  cmd_diag->add_option("--out", out_path);

  auto* cmd_cal = app.add_subcommand("calibrate", "theory constants and bounds");
  cmd_cal->add_option("--family", family_spec);
  cmd_cal->add_option("--n", n_arg)->required();
  cmd_cal->add_option("--p", p_arg)->required();
  cmd_cal->add_option("--t", t);
  cmd_cal->add_option("--lambda", lambda)->required();
  cmd_cal->add_option("--gamma-eff", gamma_eff)->required();
  cmd_cal->add_option("--sigma", sigma);
  cmd_cal->add_option("--kappa", kappa);
  cmd_cal->add_option("--kx", kx);
  cmd_cal->add_option("--k0", k0);
  cmd_cal->add_option("--theta", [&](const CLI::results_t& r) {
    theta_arg = std::stod(r[0]);
    return true;
  });
  cmd_cal->add_option("--lambda-x", [&](const CLI::results_t& r) {
    lambda_x_arg = std::stod(r[0]);
    return true;
  });
  cmd_cal->add_option("--gamma-x", gamma_x);
  cmd_cal->add_option("--out", out_path);

  std::string records_path, summary_path;
  auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo verification runs");
  cmd_sim->add_option("--config", config_path)->required();
  cmd_sim->add_option("--out", records_path);
  cmd_sim->add_option("--summary", summary_path);
  cmd_sim
      ->add_option("--seed", [&](const CLI::results_t& r) {
        seed = std::stoull(r[0]);
        seed_given = true;
        return true;
      })
      ->description("override the master seed");
  cmd_sim->add_option("--threads", threads);
  double sim_t = -2.0, sim_lambda = -1.0;
  cmd_sim->add_option("--t", sim_t)->description("override the confidence variable t");
  cmd_sim->add_option("--lambda", sim_lambda)
      ->description("override the penalty (switches the rule to fixed)");

  auto* cmd_sec4 = app.add_subcommand(
      "example-sec4", "reproduce the two worked compatibility examples");
  cmd_sec4->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  if (cmd_fit->parsed()) {
    qlasso::PenalizedProblem prob;
    prob.design = qlasso::DesignMatrix::from_matrix(
        qlasso::io::read_csv_matrix(design_path));
    prob.response = qlasso::io::read_csv_vector(response_path);
    prob.family = qlasso::parse_family(family_spec);
    prob.lambda = lambda;
    if (!weights_path.empty()) {
      prob.weights = qlasso::io::read_csv_vector(weights_path);
    }
    qlasso::SolverConfig cfg;
    cfg.kkt_tolerance = kkt_tol;
    const qlasso::FitResult fit = qlasso::fit(prob, cfg);
    write_or_print(out_path, qlasso::io::to_json(fit));
    return 0;
  }

  if (cmd_diag->parsed()) {
    const auto design = qlasso::DesignMatrix::from_matrix(
        qlasso::io::read_csv_matrix(design_path));
    const auto S = qlasso::IndexSet::from_one_based(parse_index_list(set_spec));
    const auto set_1b = S.one_based();

    json records = json::array();
    const auto compat = qlasso::compatibility_constant(design, S, L);
    const char* method =
        compat.method == qlasso::CompatibilityMethod::exact_qp_enumeration
            ? "exact_qp_enumeration"
            : "projected_search";
    records.push_back({{"quantity", "phi_sq"},
                       {"set", set_1b},
                       {"L", L},
                       {"value", compat.phi_sq},
                       {"method", method},
                       {"certificate_gap", compat.certificate_gap}});
    records.push_back({{"quantity", "phi_re_sq"},
                       {"set", set_1b},
                       {"L", L},
                       {"value", qlasso::restricted_eigenvalue(design, S, L)},
                       {"method", method}});
    const auto compat3 = qlasso::compatibility_constant(design, S, 3.0);
    if (compat3.phi_sq > 1e-12) {
      records.push_back({{"quantity", "gamma_effective"},
                         {"set", set_1b},
                         {"L", 3.0},
                         {"value", static_cast<double>(S.size()) / compat3.phi_sq},
                         {"method", method},
                         {"certificate_gap", compat3.certificate_gap}});
    } else {
      records.push_back({{"quantity", "gamma_effective"},
                         {"set", set_1b},
                         {"L", 3.0},
                         {"value", nullptr},
                         {"error", "compatibility fails: phi^2(3, S) = 0"}});
    }
    Eigen::MatrixXd gram_used = qlasso::gram(design);
    if (!beta0_path.empty()) {
      const auto beta0 = qlasso::io::read_csv_vector(beta0_path);
      gram_used =
          qlasso::weighted_gram(design, beta0, qlasso::parse_family(family_spec))
              .Sigma;
    }
    double rcond = 0.0;
    records.push_back({{"quantity", "irrepresentable_theta"},
                       {"set", set_1b},
                       {"value", qlasso::irrepresentable_theta(gram_used, S, &rcond)},
                       {"rcond", rcond},
                       {"weighted", !beta0_path.empty()}});
    if (!sigma_path.empty()) {
      const auto sigma_ref = qlasso::io::read_csv_matrix(sigma_path);
      records.push_back(
          {{"quantity", "lambda_X"},
           {"value", qlasso::gram_sup_distance(gram_used, sigma_ref)}});
    }
    write_or_print(out_path, records);
    return 0;
  }

  if (cmd_cal->parsed()) {
    const qlasso::Family family = qlasso::parse_family(family_spec);
    qlasso::TheoryConstants c;
    c.sigma = sigma;
    c.kappa = kappa;
    c.K_X = kx;
    c.K_0 = k0;
    if (family.quasi) {
      const auto cc = qlasso::estimate_condition_constants(family, kx, k0, 2049);
      c.C_h = cc.C_h;
      c.C_V = cc.C_V;
      c.L_h = cc.L_h;
      c.L_g = cc.L_g;
    }
    const double tt = t < 0.0 ? std::log(n_arg) : t;
    const auto report = qlasso::make_bound_report(c, n_arg, p_arg, tt, lambda,
                                                  gamma_eff, theta_arg,
                                                  lambda_x_arg, gamma_x);
    std::cout << qlasso::io::precondition_table(report.preconditions);
    write_or_print(out_path, qlasso::io::to_json(report));
    return 0;
  }

  if (cmd_sim->parsed()) {
    qlasso::ScenarioConfig config = qlasso::io::read_scenario_file(config_path);
    if (seed_given) config.master_seed = seed;
    if (sim_t > -2.0) config.t = sim_t;
    if (sim_lambda > 0.0) {
      config.lambda_rule = qlasso::LambdaRule::fixed_value;
      config.lambda_value = sim_lambda;
    }
    const int resolved = resolve_threads(threads);
    if (resolved > 0) config.threads = resolved;
    const auto records = qlasso::run_scenario(config);
    if (!records_path.empty()) {
      std::ofstream f(records_path);
      if (!f) throw std::runtime_error("cannot write " + records_path);
      for (const auto& r : records) {
        f << qlasso::io::to_json(r).dump() << '\n';
      }
    }
    const auto summary = qlasso::verify_theorems(records, config);
    if (!summary_path.empty()) {
      std::ofstream f(summary_path);
      if (!f) throw std::runtime_error("cannot write " + summary_path);
      f << qlasso::io::to_json(summary).dump(2) << '\n';
    }
    std::cout << qlasso::io::summary_table(summary);
    return 0;
  }

  if (cmd_sec4->parsed()) {
    const double rt2 = std::sqrt(2.0);
    Eigen::MatrixXd m1(2, 3), m2(2, 3);
    m1 << 5.0 / 13.0, 0.0, 1.0, 12.0 / 13.0, 1.0, 0.0;
    m2 << 12.0 / 13.0, 0.0, 1.0, 5.0 / 13.0, 1.0, 0.0;
    m1 *= rt2;
    m2 *= rt2;
    const auto S = qlasso::IndexSet::from_one_based({3});
    const auto d1 = qlasso::DesignMatrix::from_matrix(m1);
    const auto d2 = qlasso::DesignMatrix::from_matrix(m2);
    const auto c1 = qlasso::compatibility_constant(d1, S, 3.0);
    const auto c2 = qlasso::compatibility_constant(d2, S, 3.0);
    const double geff1 = qlasso::effective_sparsity(d1, S);
    const double theta1 = qlasso::irrepresentable_theta(qlasso::gram(d1), S);
    const double theta2 = qlasso::irrepresentable_theta(qlasso::gram(d2), S);

    json j;
    j["first"] = {{"phi_sq", c1.phi_sq},
                  {"gamma_effective", geff1},
                  {"theta", theta1},
                  {"certificate_gap", c1.certificate_gap}};
    j["second"] = {{"phi_sq", c2.phi_sq},
                   {"gamma_effective", nullptr},
                   {"theta", theta2},
                   {"certificate_gap", c2.certificate_gap}};
    std::cout << "first matrix : phi^2(3,S) = " << c1.phi_sq
              << "  (expected 2/13 = " << 2.0 / 13.0 << ")\n"
              << "               Gamma_effective = " << geff1
              << "  (expected 6.5)\n"
              << "               theta = " << theta1
              << "  (expected 5/13 = " << 5.0 / 13.0 << ")\n"
              << "second matrix: phi^2(3,S) = " << c2.phi_sq
              << "  (expected 0; compatibility fails)\n"
              << "               Gamma_effective undefined (phi = 0)\n"
              << "               theta = " << theta2 << "\n";
    if (out_path) write_or_print(out_path, j);
    const bool ok = std::abs(c1.phi_sq - 2.0 / 13.0) <= 1e-8 &&
                    std::abs(geff1 - 6.5) <= 1e-8 &&
                    std::abs(theta1 - 5.0 / 13.0) <= 1e-10 &&
                    c2.phi_sq <= 1e-6;
    if (!ok) {
      std::cerr << json{{"error",
                         {{"type", "numerical"},
                          {"message", "worked example values not reproduced"}}}}
                       .dump()
                << '\n';
      return 2;
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << json{{"error", {{"type", "validation"}, {"message", e.what()}}}}
                     .dump()
              << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << json{{"error", {{"type", "validation"}, {"message", e.what()}}}}
                     .dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"type", "numerical"}, {"message", e.what()}}}}
                     .dump()
              << '\n';
    return 2;
  }
}
