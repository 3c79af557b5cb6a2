// vertiflow command line: validate, throughput, design, sweep, metrics, gen-case.
//
// Exit codes: 0 ok, 1 model fails validation, 2 malformed input or usage,
// 3 solver failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vertiflow/io.hpp"
#include "vertiflow/metrics.hpp"

namespace vf = vertiflow;

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitMalformed = 2;
constexpr int kExitSolver = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vf::ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError(path + ": cannot write file");
  out << text;
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) throw UsageError(what + ": '" + s + "' is not a number");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

// "a:b:s" (inclusive) or a comma-separated ascending list.
std::vector<double> parse_grid(const std::string& spec, const std::string& what) {
  std::vector<double> g;
  if (spec.find(':') != std::string::npos) {
    const std::vector<std::string> parts = split(spec, ':');
    if (parts.size() != 3) throw UsageError(what + ": expected start:stop:step");
    const double a = parse_number(parts[0], what);
    const double b = parse_number(parts[1], what);
    const double s = parse_number(parts[2], what);
    if (!(s > 0.0) || b < a) throw UsageError(what + ": need step > 0 and stop >= start");
    const long n = static_cast<long>(std::floor((b - a) / s + 1e-9)) + 1;
    if (n > 100000) throw UsageError(what + ": grid too large");
    for (long i = 0; i < n; ++i) g.push_back(vf::round9(a + static_cast<double>(i) * s));
  } else {
    for (const std::string& p : split(spec, ',')) g.push_back(parse_number(p, what));
  }
  if (g.empty()) throw UsageError(what + ": empty grid");
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (!(g[i] > g[i - 1])) throw UsageError(what + ": grid must be strictly ascending");
  }
  return g;
}

std::pair<int, int> parse_int_range(const std::string& s, const std::string& what) {
  const std::vector<std::string> parts = split(s, ':');
  if (parts.size() != 2) throw UsageError(what + ": expected lo:hi");
  const double lo = parse_number(parts[0], what);
  const double hi = parse_number(parts[1], what);
  if (lo != std::floor(lo) || hi != std::floor(hi)) throw UsageError(what + ": bounds must be integers");
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

vf::NetworkFile load_model(const std::string& path) {
  vf::NetworkFile f = vf::read_network_file(path);
  const vf::ValidationReport r = vf::validate_file(f);
  if (!r.ok()) throw vf::ValidationError(path + ": model is invalid\n" + r.str());
  return f;
}

void echo_hash(const std::string& hash) { std::cerr << "config-hash: " << hash << "\n"; }

struct SolveOptions {
  std::string method = "direct-milp";
  double big_m = 0.0;
  double big_m_lambda = 0.0;
  long node_limit = 200000;

  vf::SweepConfig config() const {
    vf::SweepConfig c;
    c.method = vf::parse_design_method(method);
    c.big_m = big_m;
    c.big_m_lambda = big_m_lambda;
    c.node_limit = node_limit;
    return c;
  }
};

// ---- subcommands ----

int cmd_validate(const std::string& path) {
  const vf::NetworkFile f = vf::read_network_file(path);
  echo_hash(vf::config_hash(f, "validate"));
  const vf::ValidationReport r = vf::validate_file(f);
  std::cout << "nodes " << f.network.num_nodes() << ", links " << f.network.num_links() << ", demands "
            << f.demands.size() << ", candidates " << f.candidates.size() << "\n";
  if (r.ok()) {
    const std::vector<vf::Scenario> sc = vf::enumerate_scenarios(f.network);
    std::cout << "scenarios " << sc.size() << "\n";
    if (f.candidates.size() > 0) {
      const vf::BackupTopology t = vf::build_backup_topology(f.network, f.candidates, f.policy);
      for (const std::string& w : t.warnings) std::cout << "warning: " << w << "\n";
    }
    std::cout << "ok\n";
    return 0;
  }
  std::cout << r.str();
  return kExitInvalid;
}

int cmd_throughput(const std::string& path, const std::string& out) {
  const vf::NetworkFile f = load_model(path);
  echo_hash(vf::config_hash(f, "throughput"));
  const vf::IndicatorMatrices ind = vf::build_incidence(f.network, f.demands);
  std::ostringstream csv;
  csv << "element,level,probability,throughput,certificate_residual\n";
  double expected = 0.0;
  for (const vf::Scenario& s : vf::enumerate_scenarios(f.network)) {
    vf::ThroughputResult r;
    try {
      r = vf::throughput(s, ind);
    } catch (const vf::SolverStalled& e) {
      throw vf::SolveFailure(e.what());
    }
    expected += s.probability * r.throughput();
    csv << vf::to_string(s.element) << ',' << s.level << ',' << vf::fmt(s.probability) << ',' << vf::fmt(r.throughput())
        << ',' << vf::fmt(r.report.max_residual()) << '\n';
  }
  write_text(out, csv.str());
  std::cerr << "expected throughput: " << vf::fmt(expected) << "\n";
  return 0;
}

int cmd_design(const std::string& path, double budget, double w, const SolveOptions& o, const std::string& out,
               const std::string& lp_dump) {
  const vf::NetworkFile f = load_model(path);
  const vf::SweepConfig cfg = o.config();
  const std::string hash = vf::config_hash(f, "design;budget=" + vf::fmt(budget) + ";w=" + vf::fmt(w) + ";" + cfg.tag());
  echo_hash(hash);
  const vf::DesignSpec spec = vf::sweep_spec(f, budget, w, cfg);
  if (!lp_dump.empty()) {
    const vf::DesignMethod m = cfg.method;
    if (m == vf::DesignMethod::brute_force) throw UsageError("--lp-dump needs a MILP method");
    const vf::DesignMilp d = vf::build_design_milp(spec, m == vf::DesignMethod::dual_milp);
    std::ostringstream lp;
    vf::write_lp_text(lp, d.mip.lp, d.mip.binaries);
    write_text(lp_dump, lp.str());
  }
  const vf::DesignResult r = vf::solve_point(spec, cfg);
  if (!r.stats.proven_optimal) std::cerr << "warning: node limit reached, design not proven optimal\n";
  if (r.bigm.status == vf::BigMReport::Status::suspect) std::cerr << "warning: big-M bounds still binding after retries\n";
  write_text(out, vf::design_to_json(spec, r, hash).dump(2) + "\n");
  return 0;
}

int cmd_sweep(const std::string& path, const std::string& budgets, const std::string& ws, const SolveOptions& o,
              std::string out_dir, int jobs) {
  const std::vector<double> b = parse_grid(budgets, "--budgets");
  const std::vector<double> w = parse_grid(ws, "--w");
  if (jobs < 1) throw UsageError("--jobs must be at least 1");
  const vf::NetworkFile f = load_model(path);
  vf::SweepConfig cfg = o.config();
  cfg.budgets = b;
  cfg.valuations = w;
  cfg.jobs = jobs;
  const std::string hash = vf::config_hash(f, "sweep;" + cfg.tag());
  echo_hash(hash);
  if (out_dir.empty()) {
    const char* env = std::getenv("VERTIFLOW_OUT_DIR");
    out_dir = env != nullptr && *env != '\0' ? env : "vertiflow-out";
  }
  const vf::SweepOutput s = vf::run_sweep(f, cfg, hash);
  const std::filesystem::path dir(out_dir);
  write_text((dir / "metrics.csv").string(), s.metrics_csv);
  write_text((dir / "plot.csv").string(), s.plot_csv);
  write_text((dir / "designs.json").string(), s.designs_json);
  std::cerr << "wrote " << (dir / "metrics.csv").string() << ", plot.csv, designs.json (" << b.size() * w.size()
            << " grid points)\n";
  return 0;
}

int cmd_metrics(const std::string& path, const std::string& design_path, const std::string& out, const std::string& plot) {
  const vf::NetworkFile f = load_model(path);
  const std::string text = read_text(design_path);
  vf::Json j;
  try {
    j = vf::detail::parse_text(text);
  } catch (const vf::ParseError& e) {
    throw vf::ParseError(design_path + ": " + e.what());
  }
  double budget = 0.0, w = 0.0;
  std::string method = "direct-milp";
  vf::SelectionMatrix z;
  try {
    const vf::detail::Reader root(j);
    budget = root.at("budget").number();
    w = root.at("w").number();
    if (root.has("method")) method = root.at("method").string();
    z = vf::selection_from_json(j, f.candidates);
  } catch (const vf::ParseError& e) {
    throw vf::ParseError(design_path + ": " + e.what());
  }
  const std::string hash = vf::config_hash(f, "metrics;design=" + vf::hex64(vf::fnv1a64(text)));
  echo_hash(hash);
  const vf::DesignSpec spec = vf::make_spec(f, budget, w);
  vf::SweepPoint p;
  p.budget = budget;
  p.valuation = w;
  vf::DesignResult& r = p.design;
  r.method = vf::parse_design_method(method);
  r.feasible = true;
  r.z = z;
  r.capacities = vf::capacity_from_selection(z, f.candidates);
  r.cost = vf::selection_cost(z, f.candidates);
  const vf::DesignEvaluation ev = vf::evaluate_capacities(spec, r.capacities);
  r.expected_throughput = ev.expected_throughput;
  r.per_scenario = ev.scenarios;
  r.objective = r.expected_throughput - w * r.cost;
  p.metrics = vf::compute_metrics(spec, r);
  write_text(out, std::string(vf::metrics_csv_header()) + vf::metrics_csv_row(p));
  if (!plot.empty()) write_text(plot, std::string(vf::plot_csv_header()) + vf::plot_csv_rows(p, f.demands));
  return 0;
}

int cmd_gen_case(const std::string& topology, int nodes, int od_pairs, int candidates, std::uint64_t seed,
                 double radius, double hub_cap, const std::string& node_range, const std::string& link_range,
                 const std::string& out) {
  vf::CaseParams p = vf::CaseParams::defaults(vf::parse_topology(topology));
  if (nodes > 0) p.nodes = nodes;
  if (od_pairs > 0) p.od_pairs = od_pairs;
  if (candidates >= 0) p.candidates = candidates;
  p.seed = seed;
  p.radius_km = radius;
  p.hub_capacity = hub_cap;
  std::tie(p.node_capacity_min, p.node_capacity_max) = parse_int_range(node_range, "--node-capacity");
  std::tie(p.link_capacity_min, p.link_capacity_max) = parse_int_range(link_range, "--link-capacity");
  vf::NetworkFile f;
  try {
    f = vf::gen_case(p);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  echo_hash(vf::config_hash(f, "gen-case"));
  write_text(out, vf::write_network_file(f));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vertiflow: risk-aware vertiport network design"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vertiflow 1.0");

  std::string network;
  auto add_network = [&](CLI::App* sub) { sub->add_option("-n,--network", network, "network file (JSON)")->required(); };

  CLI::App* validate = app.add_subcommand("validate", "check a network file, exit 0 iff clean");
  add_network(validate);

  std::string out;
  CLI::App* tp = app.add_subcommand("throughput", "per-scenario maximum throughput table (CSV)");
  add_network(tp);
  tp->add_option("-o,--out", out, "output CSV (default stdout)");

  SolveOptions solve;
  auto add_solve = [&](CLI::App* sub) {
    sub->add_option("--method", solve.method, "dual-milp | direct-milp | brute-force")
        ->check(CLI::IsMember({"dual-milp", "direct-milp", "brute-force"}));
    sub->add_option("--big-m", solve.big_m, "demand bound M (default: total node capacity)");
    sub->add_option("--big-m-lambda", solve.big_m_lambda, "dual product bound (default: (N_S+1) max level capacity)");
    sub->add_option("--node-limit", solve.node_limit, "branch-and-bound node limit");
  };

  double budget = 0.0, w = 0.0;
  std::string lp_dump;
  CLI::App* design = app.add_subcommand("design", "solve one backup selection");
  add_network(design);
  design->add_option("-b,--budget", budget, "budget")->required();
  design->add_option("-w,--w", w, "valuation of built cost")->required();
  add_solve(design);
  design->add_option("-o,--out", out, "design JSON (default stdout)");
  design->add_option("--lp-dump", lp_dump, "write the MILP in LP text format");

  std::string budgets, ws, out_dir;
  int jobs = 1;
  CLI::App* sweep = app.add_subcommand("sweep", "grid of solves writing metrics.csv, plot.csv, designs.json");
  add_network(sweep);
  sweep->add_option("--budgets", budgets, "start:stop:step or comma list")->required();
  sweep->add_option("--w", ws, "start:stop:step or comma list")->required();
  add_solve(sweep);
  sweep->add_option("--out-dir", out_dir, "output directory (default $VERTIFLOW_OUT_DIR or vertiflow-out)");
  sweep->add_option("-j,--jobs", jobs, "parallel solves");

  std::string design_file, plot;
  CLI::App* metrics = app.add_subcommand("metrics", "enhancement, diversity and coverage of a stored design");
  add_network(metrics);
  metrics->add_option("-d,--design", design_file, "design JSON written by 'design'")->required();
  metrics->add_option("-o,--out", out, "metrics CSV (default stdout)");
  metrics->add_option("--plot", plot, "long-format plot CSV");

  std::string topology = "star", node_range = "4:8", link_range = "4:8";
  int nodes = 0, od_pairs = 0, candidates = -1;
  std::uint64_t seed = 1;
  double radius = 20.0, hub_cap = 10.0;
  CLI::App* gen = app.add_subcommand("gen-case", "synthetic case network");
  gen->add_option("-t,--topology", topology, "star | mesh-star | multi-star")
      ->check(CLI::IsMember({"star", "mesh-star", "multi-star"}));
  gen->add_option("--nodes", nodes, "regular nodes (default per topology)");
  gen->add_option("--od-pairs", od_pairs, "O-D pairs = directed links (default per topology)");
  gen->add_option("--candidates", candidates, "backup candidates (default per topology)");
  gen->add_option("--seed", seed, "64-bit seed");
  gen->add_option("--radius-km", radius, "spatial radius");
  gen->add_option("--hub-capacity", hub_cap, "hub node capacity");
  gen->add_option("--node-capacity", node_range, "lo:hi integer range for other nodes");
  gen->add_option("--link-capacity", link_range, "lo:hi integer range per corridor");
  gen->add_option("-o,--out", out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitMalformed;
  }

  try {
    if (validate->parsed()) return cmd_validate(network);
    if (tp->parsed()) return cmd_throughput(network, out);
    if (design->parsed()) return cmd_design(network, budget, w, solve, out, lp_dump);
    if (sweep->parsed()) return cmd_sweep(network, budgets, ws, solve, out_dir, jobs);
    if (metrics->parsed()) return cmd_metrics(network, design_file, out, plot);
    if (gen->parsed()) {
      return cmd_gen_case(topology, nodes, od_pairs, candidates, seed, radius, hub_cap, node_range, link_range, out);
    }
  } catch (const vf::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const vf::ValidationError& e) {
    std::cerr << "error: " << e.what();
    return kExitInvalid;
  } catch (const vf::SolveFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMalformed;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitMalformed;
}
