#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qlasso/io.hpp"
#include "qlasso/rng.hpp"
#include "scenarios.hpp"

using namespace qlasso;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("qlasso_io_test_" + std::to_string(std::rand()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("csv matrices round-trip at full double precision") {
  TempDir tmp;
  rng::Stream stream(5, 5);
  Eigen::MatrixXd m(7, 3);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 3; ++j) {
      m(i, j) = std::ldexp(stream.normal(), (i * 3 + j) % 40 - 20);
    }
  }
  m(0, 0) = 1.0 / 3.0;
  m(1, 1) = -1e-300;
  io::write_csv_matrix(tmp.file("m.csv"), m);
  const Eigen::MatrixXd back = io::read_csv_matrix(tmp.file("m.csv"));
  REQUIRE(back.rows() == m.rows());
  REQUIRE(back.cols() == m.cols());
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);  // bit exact

  Eigen::VectorXd v = m.col(2);
  io::write_csv_vector(tmp.file("v.csv"), v, "resp");
  CHECK((io::read_csv_vector(tmp.file("v.csv")) - v).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(io::read_csv_matrix(tmp.file("missing.csv")), std::invalid_argument);
  {
    std::ofstream bad(tmp.file("ragged.csv"));
    bad << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS_AS(io::read_csv_matrix(tmp.file("ragged.csv")), std::invalid_argument);
}

TEST_CASE("fit results re-parse losslessly") {
  FitResult fr;
  fr.beta = Eigen::VectorXd(3);
  fr.beta << 0.1, 0.0, -2.0 / 3.0;
  fr.active_set = IndexSet::from_zero_based({0, 2});
  fr.kkt_sup_violation = 3.2e-9;
  fr.sign_consistency_ok = true;
  fr.iterations = 412;
  fr.objective = 0.7071067811865476;
  fr.converged = true;
  const io::json j = io::to_json(fr);
  CHECK(j.at("active_set") == std::vector<int>{1, 3});  // one-based surface
  const FitResult back = io::fit_result_from_json(j);
  CHECK(back.beta == fr.beta);
  CHECK(back.active_set == fr.active_set);
  CHECK(back.kkt_sup_violation == fr.kkt_sup_violation);
  CHECK(back.objective == fr.objective);
  CHECK(io::to_json(back).dump() == j.dump());
}

TEST_CASE("run records re-parse losslessly") {
  const ScenarioConfig cfg = scenarios::thm1(30, 5, 1, 2, 8);
  const RunRecord rec = run_replication(cfg, 1);
  const io::json j = io::to_json(rec);
  const RunRecord back = io::run_record_from_json(j);
  CHECK(io::to_json(back).dump() == j.dump());
}

TEST_CASE("scenario configs round-trip through json") {
  ScenarioConfig cfg = scenarios::thm2_logistic(17, 99);
  cfg.threads = 2;
  const io::json j = io::to_json(cfg);
  const ScenarioConfig back = io::scenario_from_json(j);
  CHECK(io::to_json(back).dump() == j.dump());
  CHECK(back.n == cfg.n);
  CHECK(back.family_spec == "logistic");
  CHECK(back.fixed_rows.isApprox(cfg.fixed_rows));
  CHECK(back.checks == cfg.checks);

  CHECK_THROWS_AS(io::scenario_from_json(io::json{{"design_law", "mystery"}}),
                  std::invalid_argument);
}

TEST_CASE("precondition and summary tables render PASS/FAIL rows") {
  std::vector<PreconditionCheck> checks = {{"(s0)", 0.2, 0.25, true},
                                           {"lambda-range", 0.1, 0.05, false}};
  const std::string table = io::precondition_table(checks);
  CHECK(table.find("(s0)") != std::string::npos);
  CHECK(table.find("PASS") != std::string::npos);
  CHECK(table.find("FAIL") != std::string::npos);

  const ScenarioConfig cfg = scenarios::thm1(30, 5, 1, 3, 8);
  const Summary summary = verify_theorems(run_scenario(cfg), cfg);
  const std::string st = io::summary_table(summary);
  CHECK(st.find("thm1") != std::string::npos);
  CHECK(st.find("excluded replications") != std::string::npos);
}

TEST_CASE("bound reports and summaries re-parse losslessly") {
  TheoryConstants c;
  c.sigma = 0.7;
  c.kappa = 1.1;
  c.K_X = 1.5;
  c.K_0 = 0.15;
  c.C_h = 1.0;
  c.C_V = 14.8;
  c.L_g = 0.19;
  c.C_l = 14.8;
  const BoundReport report = make_bound_report(c, 2e9, 2.0, std::log(2e9),
                                               7.1e-3, 4.0 / 9.0, 0.25, 0.001);
  const io::json j = io::to_json(report);
  const BoundReport back = io::bound_report_from_json(j);
  CHECK(io::to_json(back).dump() == j.dump());

  const ScenarioConfig cfg = scenarios::thm1(30, 5, 1, 3, 12);
  const Summary summary = verify_theorems(run_scenario(cfg), cfg);
  const io::json js = io::to_json(summary);
  CHECK(io::to_json(io::summary_from_json(js)).dump() == js.dump());
}
