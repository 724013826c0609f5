// sot: command-line front end.
//
//   sot solve --a A --b B (--cost C | --points --c-cut R) [--gamma R|auto] --out OUT.json
//   sot barycenter --marginals B1 B2 ... --weights 0.5,0.5 (--cost C | --points --c-cut R) --out OUT.json
//   sot experiment NAME --out-dir DIR
//   sot color-transfer --input IMG --target IMG --out IMG
//
// Exit codes: 0 success, 1 invalid input or I/O failure, 2 solver did not
// converge (results are still written).

#include <sot/barycenter.hpp>
#include <sot/color_transfer.hpp>
#include <sot/core.hpp>
#include <sot/experiments.hpp>
#include <sot/image_io.hpp>
#include <sot/io.hpp>
#include <sot/sinkhorn.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::ordered_json;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kNotConverged = 2;

ordered_json to_array(const sot::Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);  // non-finite -> null
  return a;
}

void write_json(const ordered_json& j, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path);
}

struct SolverFlags {
  double epsilon = 0.05;
  std::string gamma = "2";
  int max_iter = 20000;
  double tol = 1e-10;
  bool log_domain = false;

  void add_to(CLI::App* cmd, bool allow_auto) {
    cmd->add_option("--epsilon", epsilon, "entropic regularization")->capture_default_str();
    cmd->add_option("--gamma", gamma, allow_auto ? "mass penalty, or 'auto'" : "mass penalty")
        ->capture_default_str();
    cmd->add_option("--max-iter", max_iter, "iteration cap")->capture_default_str();
    cmd->add_option("--tol", tol, "stop when a sweep changes the log-scalings less than this")
        ->capture_default_str();
    cmd->add_flag("--log-domain", log_domain, "iterate on potentials");
  }

  [[nodiscard]] bool auto_gamma() const { return gamma == "auto"; }

  [[nodiscard]] sot::SolverConfig config() const {
    sot::SolverConfig cfg{.epsilon = epsilon, .gamma = 0.0, .max_iter = max_iter, .tol = tol,
                          .log_domain = log_domain};
    if (!auto_gamma()) cfg.gamma = sot::parse_real(gamma, "--gamma");
    cfg.validate();
    return cfg;
  }
};

struct CostFlags {
  std::string cost_file;
  bool points = false;
  std::string c_cut = "inf";

  void add_to(CLI::App* cmd) {
    auto* cost = cmd->add_option("--cost", cost_file, "dense cost CSV, 'inf' marks blocked pairs");
    auto* pts = cmd->add_flag("--points", points,
                              "squared distance between support coordinates, cut at --c-cut");
    cost->excludes(pts);
    cmd->add_option("--c-cut", c_cut, "distance cutoff for --points")->capture_default_str();
  }
};

/// Support coordinates of a marginal, or the uniform grid i/n when the file
/// has none.
sot::Matrix coordinates(const sot::Marginal& m) {
  if (m.has_support()) return m.support();
  return sot::Matrix(sot::uniform_grid(m.size()));
}

sot::CostMatrix build_cost(const CostFlags& flags, const sot::Marginal& rows,
                           const sot::Marginal& cols) {
  if (!flags.cost_file.empty()) return sot::read_cost_csv(flags.cost_file);
  if (!flags.points) throw std::invalid_argument("give either --cost FILE or --points");
  return sot::truncated_sq_cost(coordinates(rows), coordinates(cols),
                                sot::parse_real(flags.c_cut, "--c-cut"));
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string a_file, b_file, out, plan_csv;
  CostFlags cost;
  SolverFlags solver;
};

int cmd_solve(const SolveArgs& args) {
  const sot::Marginal a = sot::read_marginal(args.a_file);
  const sot::Marginal b = sot::read_marginal(args.b_file);
  const sot::CostMatrix cost = build_cost(args.cost, a, b);
  const std::string cost_name = args.cost.cost_file.empty() ? "--points cost" : args.cost.cost_file;
  if (cost.rows() != a.size()) {
    throw std::invalid_argument(args.a_file + ": has " + std::to_string(a.size()) +
                                " weights but " + cost_name + " has " +
                                std::to_string(cost.rows()) + " rows");
  }
  if (cost.cols() != b.size()) {
    throw std::invalid_argument(args.b_file + ": has " + std::to_string(b.size()) +
                                " weights but " + cost_name + " has " +
                                std::to_string(cost.cols()) + " columns");
  }
  const sot::SolverConfig cfg = args.solver.config();

  ordered_json out;
  out["command"] = "solve";
  out["version"] = sot::kVersion;
  out["inputs"] = {{"a", args.a_file}, {"b", args.b_file}, {"cost", cost_name}};
  if (args.cost.points) out["inputs"]["c_cut"] = sot::parse_real(args.cost.c_cut, "--c-cut");

  sot::SolverResult r;
  sot::SolverConfig used = cfg;
  if (args.solver.auto_gamma()) {
    auto sel = sot::select_gamma(a, b, cost, cfg, sot::default_gamma_schedule());
    used.gamma = sel.gamma;
    ordered_json trace = ordered_json::array();
    for (const auto& p : sel.trace) {
      trace.push_back({{"gamma", p.gamma},
                       {"transported_mass", p.transported_mass},
                       {"converged", p.converged},
                       {"iterations", p.iterations}});
    }
    out["gamma_selection"] = {{"schedule", sot::default_gamma_schedule()},
                              {"saturated", sel.saturated},
                              {"trace", trace}};
    r = std::move(sel.result);
  } else {
    r = sot::solve(a, b, cost, cfg);
  }
  out["config"] = sot::to_json(used);
  out["log_domain_used"] = used.log_domain || sot::needs_log_domain(used);
  out["converged"] = r.converged;
  out["iterations"] = r.iterations;
  out["transported_mass"] = r.transported_mass;
  out["cost"] = r.cost;
  const auto [rows, cols] = sot::marginals(r.plan);
  out["row_sums"] = to_array(rows);
  out["col_sums"] = to_array(cols);
  out["u"] = to_array(r.u);
  out["v"] = to_array(r.v);
  if (r.f.size() > 0) {
    out["f"] = to_array(r.f);
    out["g"] = to_array(r.g);
  }
  write_json(out, args.out);
  if (!args.plan_csv.empty()) sot::write_matrix_csv(r.plan.matrix(), args.plan_csv);
  std::cout << "transported mass " << sot::format_number(r.transported_mass) << ", cost "
            << sot::format_number(r.cost) << ", " << r.iterations << " iterations\n";
  if (!r.converged) {
    std::cerr << "sot solve: no convergence within " << cfg.max_iter
              << " iterations; partial result written to " << args.out << "\n";
    return kNotConverged;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct BarycenterArgs {
  std::vector<std::string> marginal_files;
  std::vector<double> weights;
  std::optional<double> limit_weight;
  std::string out, csv;
  CostFlags cost;
  SolverFlags solver;
};

int cmd_barycenter(const BarycenterArgs& args) {
  std::vector<sot::Marginal> bs;
  for (const auto& f : args.marginal_files) bs.push_back(sot::read_marginal(f));
  const sot::CostMatrix cost = build_cost(args.cost, bs.front(), bs.front());
  const std::string cost_name = args.cost.cost_file.empty() ? "--points cost" : args.cost.cost_file;
  for (std::size_t j = 0; j < bs.size(); ++j) {
    if (bs[j].size() != cost.cols()) {
      throw std::invalid_argument(args.marginal_files[j] + ": has " +
                                  std::to_string(bs[j].size()) + " weights but " + cost_name +
                                  " has " + std::to_string(cost.cols()) + " columns");
    }
  }
  std::vector<double> weights = args.weights;
  if (args.limit_weight) weights = sot::limit_weights(weights, *args.limit_weight);

  sot::BarycenterProblem prob{bs, weights, cost, args.solver.config()};
  if (args.solver.auto_gamma()) throw std::invalid_argument("--gamma auto is only supported by solve");
  const sot::BarycenterResult r = sot::barycenter(prob);

  std::string csv = args.csv;
  if (csv.empty()) csv = std::filesystem::path(args.out).replace_extension(".csv").string();
  // The barycenter lives on the support of the first marginal when the cost
  // was built from coordinates, or when a square cost makes that plausible.
  const bool with_coords =
      args.cost.points || (cost.rows() == cost.cols() && bs.front().has_support());
  sot::Table t{with_coords ? std::vector<std::string>{"index", "coordinate", "weight"}
                           : std::vector<std::string>{"index", "weight"},
               {}};
  const sot::Matrix x = coordinates(bs.front());
  for (Eigen::Index i = 0; i < r.a.size(); ++i) {
    if (with_coords) {
      t.add({static_cast<double>(i), x(i, 0), r.a[i]});
    } else {
      t.add({static_cast<double>(i), r.a[i]});
    }
  }
  t.write_csv(csv);

  ordered_json out;
  out["command"] = "barycenter";
  out["version"] = sot::kVersion;
  out["inputs"] = {{"marginals", args.marginal_files}, {"cost", cost_name}};
  if (args.cost.points) out["inputs"]["c_cut"] = sot::parse_real(args.cost.c_cut, "--c-cut");
  out["weights"] = weights;
  out["config"] = sot::to_json(prob.cfg);
  out["converged"] = r.converged;
  out["iterations"] = r.iterations;
  out["barycenter_mass"] = r.a.mass();
  out["weighted_cost"] = r.weighted_cost;
  out["costs"] = r.costs;
  ordered_json masses = ordered_json::array();
  for (const auto& p : r.plans) masses.push_back(sot::transported_mass(p));
  out["transported_mass"] = masses;
  out["barycenter"] = to_array(r.a.weights());
  out["barycenter_csv"] = csv;
  write_json(out, args.out);
  std::cout << "barycenter mass " << sot::format_number(r.a.mass()) << ", weighted cost "
            << sot::format_number(r.weighted_cost) << ", " << r.iterations << " iterations\n";
  if (!r.converged) {
    std::cerr << "sot barycenter: no convergence within " << prob.cfg.max_iter
              << " iterations; partial result written to " << args.out << "\n";
    return kNotConverged;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_experiment(const std::string& name, const std::string& out_dir) {
  const auto& names = sot::experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown experiment '" + name + "' (known: " + known + ")");
  }
  const auto r = sot::run_experiment(name);
  sot::write_experiment(r, out_dir);
  for (const auto& [key, value] : r.checks.items()) std::cout << key << ": " << value.dump() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ColorArgs {
  std::string input, target, out, report;
  std::string c_cut = "inf";
  sot::TransferSpec spec;
};

int cmd_color_transfer(const ColorArgs& args) {
  sot::TransferSpec spec = args.spec;
  spec.c_cut = sot::parse_real(args.c_cut, "--c-cut");
  spec.validate();
  const auto input = sot::load_image(args.input);
  const auto target = sot::load_image(args.target);

  const auto t0 = std::chrono::steady_clock::now();
  sot::TransferReport r;
  std::string error;
  try {
    r = sot::transfer(input, target, spec);
  } catch (const sot::TransferError& e) {
    r = e.partial();
    error = e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  sot::save_image(r.output, args.out);
  ordered_json rep;
  rep["command"] = "color-transfer";
  rep["version"] = sot::kVersion;
  rep["input"] = args.input;
  rep["target"] = args.target;
  rep["output"] = args.out;
  rep["c_cut"] = spec.c_cut;  // +inf is written as null
  rep["subsample_size"] = spec.subsample_size;
  rep["config"] = sot::to_json(spec.cfg);
  rep["converged"] = r.solve.converged;
  rep["iterations"] = r.solve.iterations;
  rep["transported_mass"] = r.solve.transported_mass;
  rep["clamped_values"] = r.clamped;
  rep["runtime_seconds"] = seconds;
  const std::string report =
      args.report.empty() ? std::filesystem::path(args.out).replace_extension(".json").string()
                          : args.report;
  write_json(rep, report);
  std::cout << "transported mass " << sot::format_number(r.solve.transported_mass) << ", "
            << r.clamped << " clamped values, report " << report << "\n";
  if (!error.empty()) {
    std::cerr << "sot color-transfer: " << error << "\n";
    return kNotConverged;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised optimal transport solver"};
  app.set_version_flag("--version", std::string(sot::kVersion));
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "two-marginal sOT");
  s->add_option("--a", solve.a_file, "source marginal file")->required();
  s->add_option("--b", solve.b_file, "target marginal file")->required();
  solve.cost.add_to(s);
  solve.solver.add_to(s, true);
  s->add_option("--out", solve.out, "result JSON")->required();
  s->add_option("--plan-csv", solve.plan_csv, "also write the dense plan");

  BarycenterArgs bary;
  bary.solver.epsilon = 0.01;
  auto* b = app.add_subcommand("barycenter", "sOT barycenter");
  b->add_option("--marginals", bary.marginal_files, "marginal files")->required()->expected(1, -1);
  b->add_option("--weights", bary.weights, "comma-separated weights summing to 1")
      ->required()
      ->delimiter(',');
  b->add_option("--limit-weight", bary.limit_weight,
                "replace zero weights by this delta and rescale the rest");
  bary.cost.add_to(b);
  bary.solver.add_to(b, false);
  b->add_option("--out", bary.out, "result JSON")->required();
  b->add_option("--csv", bary.csv, "barycenter CSV (default: --out with .csv)");

  std::string exp_name;
  std::string out_dir = ".";
  auto* e = app.add_subcommand("experiment", "run a scripted experiment");
  e->add_option("name", exp_name, "gamma-sweep | epsilon-sweep | cutoff-sweep | barycenter-grid")
      ->required();
  e->add_option("--out-dir", out_dir, "directory for CSV and JSON output")->capture_default_str();

  ColorArgs color;
  auto* c = app.add_subcommand("color-transfer", "recolor an image after a target");
  c->add_option("--input", color.input, "image to recolor (PNG or JPEG)")->required();
  c->add_option("--target", color.target, "image providing the palette")->required();
  c->add_option("--out", color.out, "output image (.png or .jpg)")->required();
  c->add_option("--report", color.report, "report JSON (default: --out with .json)");
  c->add_option("--c-cut", color.c_cut, "cutoff on squared RGB distance")->capture_default_str();
  c->add_option("--subsample", color.spec.subsample_size, "pixels per side of the coupled images")
      ->capture_default_str();
  c->add_option("--epsilon", color.spec.cfg.epsilon)->capture_default_str();
  c->add_option("--gamma", color.spec.cfg.gamma)->capture_default_str();
  c->add_option("--max-iter", color.spec.cfg.max_iter)->capture_default_str();
  c->add_option("--tol", color.spec.cfg.tol)->capture_default_str();
  c->add_flag("--log-domain", color.spec.cfg.log_domain);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*s) return cmd_solve(solve);
    if (*b) return cmd_barycenter(bary);
    if (*e) return cmd_experiment(exp_name, out_dir);
    if (*c) return cmd_color_transfer(color);
  } catch (const std::exception& err) {
    std::cerr << "sot: " << err.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}
