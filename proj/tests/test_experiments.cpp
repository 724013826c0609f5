#include <sot/experiments.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace sot;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path tmp_dir(const std::string& name) {
  const fs::path d = fs::path(SOT_TEST_TMP) / name;
  fs::remove_all(d);
  return d;
}

CutoffSweepSpec small_cutoff_spec() {
  CutoffSweepSpec s;
  s.marginals.n = 40;
  s.cutoffs = {0.25, 0.5, 10.0};
  s.cfg.max_iter = 20000;
  return s;
}

}  // namespace

TEST(FormatNumber, Examples) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(400000.0), "400000");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-2.5), "-2.5");
  EXPECT_EQ(format_number(kInf), "inf");
  EXPECT_EQ(format_number(-kInf), "-inf");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(FormatNumber, RoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(rng) * std::pow(10.0, k % 30 - 20);
    EXPECT_EQ(std::stod(format_number(x)), x);
  }
}

TEST(CsvField, QuotesOnlyWhenNeeded) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
}

TEST(Table, RejectsRaggedRowsAndWritesCrlf) {
  Table t{{"x", "y"}, {}};
  EXPECT_THROW(t.add({1.0}), std::invalid_argument);
  t.add({1.0, 0.5});
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str(), "x,y\r\n1,0.5\r\n");
}

TEST(Experiments, NamesAndUnknown) {
  EXPECT_EQ(experiment_names().size(), 4u);
  EXPECT_THROW(run_experiment("nope"), std::invalid_argument);
}

TEST(Experiments, CutoffSweepSchemaAndChecks) {
  const auto r = run_cutoff_sweep(small_cutoff_spec());
  EXPECT_EQ(r.name, "cutoff-sweep");
  EXPECT_EQ(r.table("cutoff_sweep").columns,
            (std::vector<std::string>{"c_cut", "transported_mass", "cost", "converged", "iterations"}));
  EXPECT_EQ(r.table("cutoff_sweep").rows.size(), 3u);
  EXPECT_EQ(r.table("cutoff_profiles").rows.size(), 3u * 40u);
  EXPECT_TRUE(r.checks["mass_nondecreasing_in_cutoff"].get<bool>());
  EXPECT_TRUE(r.checks["largest_cutoff_full_transport"].get<bool>());
  EXPECT_THROW((void)r.table("missing"), std::out_of_range);
}

TEST(Experiments, OutputIsDeterministic) {
  const auto d1 = tmp_dir("det1");
  const auto d2 = tmp_dir("det2");
  const auto m = write_experiment(run_cutoff_sweep(small_cutoff_spec()), d1);
  write_experiment(run_cutoff_sweep(small_cutoff_spec()), d2);
  for (const char* f : {"cutoff-sweep.json", "cutoff_sweep.csv", "cutoff_profiles.csv"}) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  for (const char* key : {"experiment", "version", "spec", "outputs", "checks"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_EQ(m["outputs"][0]["file"], "cutoff_sweep.csv");
  const std::string csv = slurp(d1 / "cutoff_sweep.csv");
  EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "c_cut,transported_mass,cost,converged,iterations");
}

TEST(Experiments, GammaSweepSchema) {
  GammaSweepSpec s;
  s.marginals.n = 40;
  s.cfg.epsilon = 0.05;
  s.cfg.max_iter = 20000;
  s.schedule = {0.0, 0.5, 100.0};
  const auto r = run_gamma_sweep(s);
  EXPECT_EQ(r.table("gamma_sweep").columns,
            (std::vector<std::string>{"gamma", "transported_mass", "converged", "iterations"}));
  EXPECT_EQ(r.table("gamma_sweep").rows.size(), 3u);
  EXPECT_TRUE(r.checks.contains("selected_gamma"));
  EXPECT_TRUE(r.checks.contains("saturation_gap"));
  EXPECT_TRUE(r.checks.contains("gamma0_mass"));
}

TEST(Experiments, EpsilonSweepSchema) {
  EpsilonSweepSpec s;
  s.marginals.n = 40;
  s.epsilons = {1.0, 0.1};
  const auto r = run_epsilon_sweep(s);
  EXPECT_EQ(r.table("epsilon_sweep").columns.front(), "epsilon");
  EXPECT_EQ(r.table("epsilon_sweep").rows.size(), 2u);
  EXPECT_EQ(r.table("epsilon_profiles").rows.size(), 80u);
  EXPECT_TRUE(r.checks["a_fully_transported"].get<bool>());
}

TEST(Experiments, BarycenterGridSchema) {
  BarycenterGridSpec s;
  s.n = 40;
  s.cutoffs = {1.0, 0.3};
  s.lambda1 = {0.5};
  s.cfg.epsilon = 0.01;
  s.cfg.max_iter = 500;
  const auto r = run_barycenter_grid(s);
  EXPECT_EQ(r.table("barycenter_grid").columns,
            (std::vector<std::string>{"c_cut", "lambda1", "lambda2", "resem_b1", "resem_b2",
                                      "barycenter_mass", "weighted_cost", "converged", "iterations"}));
  EXPECT_EQ(r.table("barycenter_grid").rows.size(), 2u);
  EXPECT_EQ(r.table("barycenter_profiles").rows.size(), 80u);
  EXPECT_TRUE(r.checks.contains("small_cutoff_reverses_resemblance"));
}
