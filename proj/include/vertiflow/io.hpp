#pragma once

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "vertiflow/design.hpp"
#include "vertiflow/extension.hpp"
#include "vertiflow/metrics.hpp"
#include "vertiflow/net_model.hpp"

namespace vertiflow {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFormatTag = "vertiflow/1";

// Malformed input: syntax errors carry line/column, schema errors a field path.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NetworkFile {
  RiskNetwork network;
  DemandSet demands;
  CandidateSet candidates;
  BackupPolicy policy;
  bool uniform_weights = true;  // write-side: emit "uniform" instead of explicit weights
};

// %.9g, the number format of every CSV and result file.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline double round9(double v) { return std::strtod(fmt(v).c_str(), nullptr); }

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

namespace detail {

class Reader {
 public:
  explicit Reader(const Json& j, std::string path = "") : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError((path_.empty() ? std::string("<root>") : path_) + ": " + msg);
  }

  const Json& json() const { return j_; }
  const std::string& path() const { return path_; }

  void expect_object(const std::set<std::string>& allowed) const {
    if (!j_.is_object()) fail("expected an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!allowed.count(it.key())) Reader(it.value(), sub(it.key())).fail("unknown key");
    }
  }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  Reader at(const std::string& key) const {
    if (!has(key)) Reader(j_, sub(key)).fail("missing field");
    return Reader(j_.at(key), sub(key));
  }

  std::vector<Reader> items() const {
    if (!j_.is_array()) fail("expected an array");
    std::vector<Reader> out;
    for (std::size_t i = 0; i < j_.size(); ++i) out.emplace_back(j_[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("number is not finite");
    return v;
  }

  int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    const auto v = j_.get<std::int64_t>();
    if (v < -2147483647 || v > 2147483647) fail("integer out of range");
    return static_cast<int>(v);
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

 private:
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json& j_;
  std::string path_;
};

inline Json parse_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    const std::size_t pos = what.find("syntax error");
    throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                     (pos == std::string::npos ? what : what.substr(pos)));
  }
}

inline std::vector<DisturbedLevel> read_levels(const Reader& r) {
  std::vector<DisturbedLevel> out;
  for (const Reader& item : r.items()) {
    item.expect_object({"capacity", "cond_prob"});
    out.push_back({item.at("capacity").number(), item.at("cond_prob").number()});
  }
  return out;
}

inline Json write_levels(const std::vector<DisturbedLevel>& levels) {
  Json a = Json::array();
  for (const DisturbedLevel& l : levels) a.push_back(Json{{"capacity", l.capacity}, {"cond_prob", l.cond_prob}});
  return a;
}

// Checks that ids are 0..n-1 in order, naming the offending id.
inline void check_ids(const std::vector<Reader>& items, int first, const std::string& what) {
  std::set<int> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int id = items[i].at("id").integer();
    if (!seen.insert(id).second) items[i].at("id").fail("duplicate " + what + " id " + std::to_string(id));
    if (id != first + static_cast<int>(i)) {
      items[i].at("id").fail(what + " id " + std::to_string(id) + " breaks the contiguous numbering (expected " +
                             std::to_string(first + static_cast<int>(i)) + ")");
    }
  }
}

inline Eigen::MatrixXd read_level_matrix(const Reader& r, int rows) {
  const std::vector<Reader> items = r.items();
  if (items.empty()) r.fail("at least one level is required");
  if (items[0].json().is_array()) {
    if (static_cast<int>(items.size()) != rows) r.fail("expected one row per candidate");
    Eigen::MatrixXd m;
    for (int c = 0; c < rows; ++c) {
      const std::vector<Reader> row = items[c].items();
      if (c == 0) m.resize(rows, static_cast<Eigen::Index>(row.size()));
      if (static_cast<Eigen::Index>(row.size()) != m.cols()) items[c].fail("rows differ in length");
      for (std::size_t k = 0; k < row.size(); ++k) m(c, static_cast<Eigen::Index>(k)) = row[k].number();
    }
    return m;
  }
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(items.size()));
  for (std::size_t k = 0; k < items.size(); ++k) {
    const double v = items[k].number();
    for (int c = 0; c < rows; ++c) m(c, static_cast<Eigen::Index>(k)) = v;
  }
  return m;
}

inline Json write_level_matrix(const Eigen::MatrixXd& m) {
  bool same = m.rows() > 0;
  for (Eigen::Index c = 1; c < m.rows() && same; ++c) same = m.row(c) == m.row(0);
  auto row = [&](Eigen::Index c) {
    Json a = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) a.push_back(m(c, k));
    return a;
  };
  if (same) return row(0);
  Json a = Json::array();
  for (Eigen::Index c = 0; c < m.rows(); ++c) a.push_back(row(c));
  return a;
}

inline bool weights_are_uniform(const DisruptionModel& dm) {
  DisruptionModel u = dm;
  u.set_uniform_weights();
  for (std::size_t i = 0; i < dm.nodes.size(); ++i) {
    if (dm.nodes[i].weight != u.nodes[i].weight) return false;
  }
  for (std::size_t j = 0; j < dm.links.size(); ++j) {
    if (dm.links[j].weight != u.links[j].weight) return false;
  }
  return true;
}

}  // namespace detail

inline NetworkFile network_from_json(const Json& j) {
  using detail::Reader;
  const Reader root(j);
  root.expect_object({"format", "nodes", "links", "demands", "disruption", "candidates", "levels", "policy"});
  if (root.at("format").string() != kFormatTag) root.at("format").fail("expected \"" + std::string(kFormatTag) + "\"");
  NetworkFile f;
  RiskNetwork& n = f.network;

  const std::vector<Reader> nodes = root.at("nodes").items();
  for (const Reader& r : nodes) r.expect_object({"id", "x_km", "y_km", "capacity", "disturbed"});
  detail::check_ids(nodes, 0, "node");
  for (const Reader& r : nodes) {
    n.nodes.push_back({r.at("id").integer(), {r.at("x_km").number(), r.at("y_km").number()}, r.at("capacity").number()});
    n.disruption.nodes.push_back({0.0, r.has("disturbed") ? detail::read_levels(r.at("disturbed")) : std::vector<DisturbedLevel>{}});
  }
  const std::vector<Reader> links = root.at("links").items();
  for (const Reader& r : links) r.expect_object({"id", "tail", "head", "capacity", "disturbed"});
  detail::check_ids(links, 0, "link");
  for (const Reader& r : links) {
    Link e{r.at("id").integer(), r.at("tail").integer(), r.at("head").integer(), r.at("capacity").number()};
    for (const char* end : {"tail", "head"}) {
      const int v = end[0] == 't' ? e.tail : e.head;
      if (v < 0 || v >= n.num_nodes()) r.at(end).fail("unknown node " + std::to_string(v));
    }
    n.links.push_back(e);
    n.disruption.links.push_back({0.0, r.has("disturbed") ? detail::read_levels(r.at("disturbed")) : std::vector<DisturbedLevel>{}});
  }
  for (const Reader& r : root.at("demands").items()) {
    const std::vector<Reader> pair = r.items();
    if (pair.size() != 2) r.fail("expected [origin, destination]");
    const int o = pair[0].integer();
    const int d = pair[1].integer();
    if (o < 0 || o >= n.num_nodes()) pair[0].fail("unknown node " + std::to_string(o));
    if (d < 0 || d >= n.num_nodes()) pair[1].fail("unknown node " + std::to_string(d));
    f.demands.pairs.push_back({o, d});
  }

  const Reader dis = root.at("disruption");
  dis.expect_object({"p_dis", "element_weights"});
  n.disruption.p_dis = dis.at("p_dis").number();
  const Reader w = dis.has("element_weights") ? dis.at("element_weights") : Reader(Json("uniform"), "disruption.element_weights");
  if (w.json().is_string()) {
    if (w.string() != "uniform") w.fail("expected \"uniform\" or {\"nodes\": [...], \"links\": [...]}");
    n.disruption.set_uniform_weights();
    f.uniform_weights = true;
  } else {
    w.expect_object({"nodes", "links"});
    const std::vector<Reader> wn = w.at("nodes").items();
    const std::vector<Reader> wl = w.at("links").items();
    if (static_cast<int>(wn.size()) != n.num_nodes()) w.at("nodes").fail("expected one weight per node");
    if (static_cast<int>(wl.size()) != n.num_links()) w.at("links").fail("expected one weight per link");
    for (std::size_t i = 0; i < wn.size(); ++i) n.disruption.nodes[i].weight = wn[i].number();
    for (std::size_t i = 0; i < wl.size(); ++i) n.disruption.links[i].weight = wl[i].number();
    f.uniform_weights = false;
  }

  std::vector<Candidate> cands;
  if (root.has("candidates")) {
    const std::vector<Reader> cs = root.at("candidates").items();
    for (const Reader& r : cs) r.expect_object({"id", "x_km", "y_km"});
    detail::check_ids(cs, n.num_nodes(), "candidate");
    for (const Reader& r : cs) cands.push_back({r.at("id").integer(), {r.at("x_km").number(), r.at("y_km").number()}});
  }
  f.candidates.candidates = cands;
  const int nc = static_cast<int>(cands.size());
  if (root.has("levels")) {
    const Reader lv = root.at("levels");
    lv.expect_object({"capacities", "costs"});
    f.candidates.capacity_levels = detail::read_level_matrix(lv.at("capacities"), nc);
    f.candidates.costs = detail::read_level_matrix(lv.at("costs"), nc);
    if (f.candidates.costs.cols() != f.candidates.capacity_levels.cols()) lv.at("costs").fail("length differs from capacities");
  } else {
    if (nc > 0) root.at("levels");  // reports the missing field
    f.candidates.capacity_levels = Eigen::MatrixXd::Zero(0, 1);
    f.candidates.costs = Eigen::MatrixXd::Zero(0, 1);
  }

  if (root.has("policy")) {
    const Reader p = root.at("policy");
    p.expect_object({"ratio_min", "ratio_max", "rho_adj_km"});
    if (p.has("ratio_min")) f.policy.ratio_min = p.at("ratio_min").number();
    if (p.has("ratio_max")) f.policy.ratio_max = p.at("ratio_max").number();
    if (p.has("rho_adj_km")) f.policy.adjacency_radius_km = p.at("rho_adj_km").number();
  }
  return f;
}

inline NetworkFile parse_network_file(const std::string& text) { return network_from_json(detail::parse_text(text)); }

inline NetworkFile read_network_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_network_file(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline Json network_to_json(const NetworkFile& f) {
  const RiskNetwork& n = f.network;
  Json j;
  j["format"] = kFormatTag;
  Json nodes = Json::array();
  for (int i = 0; i < n.num_nodes(); ++i) {
    const Node& v = n.nodes[i];
    Json o{{"id", v.id}, {"x_km", v.position.x_km}, {"y_km", v.position.y_km}, {"capacity", v.capacity}};
    o["disturbed"] = detail::write_levels(n.disruption.nodes.at(i).levels);
    nodes.push_back(std::move(o));
  }
  j["nodes"] = std::move(nodes);
  Json links = Json::array();
  for (int e = 0; e < n.num_links(); ++e) {
    const Link& l = n.links[e];
    Json o{{"id", l.id}, {"tail", l.tail}, {"head", l.head}, {"capacity", l.capacity}};
    o["disturbed"] = detail::write_levels(n.disruption.links.at(e).levels);
    links.push_back(std::move(o));
  }
  j["links"] = std::move(links);
  Json demands = Json::array();
  for (const DemandPair& s : f.demands.pairs) demands.push_back(Json::array({s.origin, s.destination}));
  j["demands"] = std::move(demands);
  Json dis{{"p_dis", n.disruption.p_dis}};
  if (f.uniform_weights && detail::weights_are_uniform(n.disruption)) {
    dis["element_weights"] = "uniform";
  } else {
    Json wn = Json::array(), wl = Json::array();
    for (const auto& el : n.disruption.nodes) wn.push_back(el.weight);
    for (const auto& el : n.disruption.links) wl.push_back(el.weight);
    dis["element_weights"] = Json{{"nodes", wn}, {"links", wl}};
  }
  j["disruption"] = std::move(dis);
  Json cands = Json::array();
  for (const Candidate& c : f.candidates.candidates) {
    cands.push_back(Json{{"id", c.id}, {"x_km", c.position.x_km}, {"y_km", c.position.y_km}});
  }
  j["candidates"] = std::move(cands);
  if (f.candidates.size() > 0) {
    j["levels"] = Json{{"capacities", detail::write_level_matrix(f.candidates.capacity_levels)},
                       {"costs", detail::write_level_matrix(f.candidates.costs)}};
  }
  Json pol{{"ratio_min", f.policy.ratio_min}, {"ratio_max", f.policy.ratio_max}};
  if (f.policy.adjacency_radius_km) pol["rho_adj_km"] = *f.policy.adjacency_radius_km;
  j["policy"] = std::move(pol);
  return j;
}

inline std::string write_network_file(const NetworkFile& f) { return network_to_json(f).dump(2) + "\n"; }

// Field-exact comparison used by the round-trip checks.
inline bool same_model(const NetworkFile& a, const NetworkFile& b) {
  const RiskNetwork& x = a.network;
  const RiskNetwork& y = b.network;
  auto same_levels = [](const ElementDisruption& p, const ElementDisruption& q) {
    if (p.weight != q.weight || p.levels.size() != q.levels.size()) return false;
    for (std::size_t k = 0; k < p.levels.size(); ++k) {
      if (p.levels[k].capacity != q.levels[k].capacity || p.levels[k].cond_prob != q.levels[k].cond_prob) return false;
    }
    return true;
  };
  if (x.num_nodes() != y.num_nodes() || x.num_links() != y.num_links() || x.disruption.p_dis != y.disruption.p_dis) return false;
  for (int i = 0; i < x.num_nodes(); ++i) {
    const Node &p = x.nodes[i], &q = y.nodes[i];
    if (p.id != q.id || p.position.x_km != q.position.x_km || p.position.y_km != q.position.y_km || p.capacity != q.capacity ||
        !same_levels(x.disruption.nodes[i], y.disruption.nodes[i])) {
      return false;
    }
  }
  for (int j = 0; j < x.num_links(); ++j) {
    const Link &p = x.links[j], &q = y.links[j];
    if (p.id != q.id || p.tail != q.tail || p.head != q.head || p.capacity != q.capacity ||
        !same_levels(x.disruption.links[j], y.disruption.links[j])) {
      return false;
    }
  }
  if (a.demands.pairs != b.demands.pairs) return false;
  const CandidateSet &c = a.candidates, &d = b.candidates;
  if (c.size() != d.size()) return false;
  for (int i = 0; i < c.size(); ++i) {
    if (c.candidates[i].id != d.candidates[i].id || c.candidates[i].position.x_km != d.candidates[i].position.x_km ||
        c.candidates[i].position.y_km != d.candidates[i].position.y_km) {
      return false;
    }
  }
  if (c.size() > 0 && (c.capacity_levels.cols() != d.capacity_levels.cols() || c.capacity_levels != d.capacity_levels ||
                       c.costs != d.costs)) {
    return false;
  }
  return a.policy.ratio_min == b.policy.ratio_min && a.policy.ratio_max == b.policy.ratio_max &&
         a.policy.adjacency_radius_km == b.policy.adjacency_radius_km;
}

// Full model check: network, demands, candidates, policy.
inline ValidationReport validate_file(const NetworkFile& f) {
  ValidationReport r = validate_network(f.network);
  for (auto& i : validate_demands(f.network, f.demands).issues) r.issues.push_back(i);
  if (f.candidates.size() > 0) {
    for (auto& i : f.candidates.validate(f.network.num_nodes()).issues) r.issues.push_back(i);
  }
  for (auto& i : f.policy.validate().issues) r.issues.push_back(i);
  for (int c = 0; c < f.candidates.size(); ++c) {
    for (const Node& v : f.network.nodes) {
      if (distance(v.position, f.candidates.candidates[c].position) == 0.0) {
        r.add("candidate " + std::to_string(c), "coincides with node " + std::to_string(v.id));
      }
    }
  }
  return r;
}

inline DesignSpec make_spec(const NetworkFile& f, double budget, double valuation) {
  const ValidationReport r = validate_file(f);
  if (!r.ok()) throw ValidationError(r.str());
  return make_design_spec(f.network, f.demands, f.candidates, f.policy, budget, valuation);
}

inline std::string config_hash(const NetworkFile& f, const std::string& extra) {
  return hex64(fnv1a64(network_to_json(f).dump() + "\n" + extra));
}

inline Json design_to_json(const DesignSpec& spec, const DesignResult& r, const std::string& hash) {
  Json j;
  j["format"] = kFormatTag;
  j["kind"] = "design";
  j["config_hash"] = hash;
  j["method"] = to_string(r.method);
  j["budget"] = round9(spec.budget);
  j["w"] = round9(spec.valuation);
  j["feasible"] = r.feasible;
  if (!r.feasible) return j;
  Json z = Json::array();
  for (Eigen::Index c = 0; c < r.z.z.rows(); ++c) {
    Json row = Json::array();
    for (Eigen::Index m = 0; m < r.z.z.cols(); ++m) row.push_back(r.z.z(c, m));
    z.push_back(std::move(row));
  }
  j["selection"] = std::move(z);
  Json caps = Json::array();
  for (Eigen::Index c = 0; c < r.capacities.size(); ++c) caps.push_back(round9(r.capacities[c]));
  j["capacities"] = std::move(caps);
  j["cost"] = round9(r.cost);
  j["objective"] = round9(r.objective);
  j["expected_throughput"] = round9(r.expected_throughput);
  j["proven_optimal"] = r.stats.proven_optimal;
  j["nodes_explored"] = r.stats.nodes;
  if (r.method == DesignMethod::dual_milp) {
    j["bigm"] = Json{{"status", to_string(r.bigm.status)}, {"retries", r.bigm.retries}, {"flags", r.bigm.flags.size()}};
  }
  Json sc = Json::array();
  for (const ScenarioThroughput& s : r.per_scenario) {
    sc.push_back(Json{{"element", to_string(s.element)},
                      {"level", s.level},
                      {"probability", round9(s.probability)},
                      {"original", round9(s.original)},
                      {"extended", round9(s.extended)}});
  }
  j["scenarios"] = std::move(sc);
  return j;
}

// Reads the selection of a stored design file.
inline SelectionMatrix selection_from_json(const Json& j, const CandidateSet& cs) {
  const detail::Reader root(j);
  if (!root.json().is_object()) root.fail("expected an object");
  if (!root.has("selection")) root.at("selection");
  SelectionMatrix s;
  const std::vector<detail::Reader> rows = root.at("selection").items();
  if (static_cast<int>(rows.size()) != cs.size()) root.at("selection").fail("expected one row per candidate");
  s.z = Eigen::MatrixXi::Zero(cs.size(), cs.levels());
  for (int c = 0; c < cs.size(); ++c) {
    const std::vector<detail::Reader> row = rows[c].items();
    if (static_cast<int>(row.size()) != cs.levels()) rows[c].fail("expected one entry per level");
    for (int m = 0; m < cs.levels(); ++m) {
      const int v = row[m].integer();
      if (v != 0 && v != 1) row[m].fail("expected 0 or 1");
      s.z(c, m) = v;
    }
    if (s.z.row(c).sum() != 1) rows[c].fail("row must contain exactly one 1");
  }
  return s;
}

// ---- sweep reports ----

struct SweepPoint {
  double budget = 0.0;
  double valuation = 0.0;
  DesignResult design;
  DesignMetrics metrics;
};

inline const char* metrics_csv_header() {
  return "budget,w,method,objective,expected_throughput,cost,built,delta,delta_bar,"
         "div_min,div_q25,div_median,div_q75,div_max,cov_min,cov_q25,cov_median,cov_q75,cov_max\n";
}

inline std::string metrics_csv_row(const SweepPoint& p) {
  std::ostringstream o;
  const DesignResult& d = p.design;
  o << fmt(p.budget) << ',' << fmt(p.valuation) << ',' << to_string(d.method);
  if (!d.feasible) {  // metric columns left empty
    o << std::string(16, ',') << '\n';
    return o.str();
  }
  int built = 0;
  for (Eigen::Index c = 0; c < d.capacities.size(); ++c) built += d.capacities[c] > 0.0;
  o << ',' << fmt(d.objective) << ',' << fmt(d.expected_throughput) << ',' << fmt(d.cost) << ',' << built << ','
    << fmt(p.metrics.enhancement.total) << ',' << fmt(p.metrics.enhancement.expected);
  std::vector<double> div(p.metrics.diversity.paths.begin(), p.metrics.diversity.paths.end());
  std::vector<double> land;
  for (const LandingDistance& l : p.metrics.coverage.pairs) land.push_back(l.distance);
  for (const std::vector<double>* v : {&div, &land}) {
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) o << ',' << (v->empty() ? std::string() : fmt(quantile(*v, q)));
  }
  o << '\n';
  return o.str();
}

// Long format: one row per (grid point, series, key).
inline const char* plot_csv_header() { return "budget,w,series,key,value\n"; }

inline std::string plot_csv_rows(const SweepPoint& p, const DemandSet& demands) {
  std::ostringstream o;
  const std::string prefix = fmt(p.budget) + "," + fmt(p.valuation) + ",";
  if (!p.design.feasible) return "";
  o << prefix << "delta_bar,all," << fmt(p.metrics.enhancement.expected) << '\n';
  o << prefix << "delta,all," << fmt(p.metrics.enhancement.total) << '\n';
  for (Eigen::Index c = 0; c < p.design.capacities.size(); ++c) {
    if (p.design.capacities[c] > 0.0) o << prefix << "built_capacity,c" << c << ',' << fmt(p.design.capacities[c]) << '\n';
  }
  for (std::size_t l = 0; l < demands.pairs.size(); ++l) {
    const std::string key = std::to_string(demands.pairs[l].origin) + "-" + std::to_string(demands.pairs[l].destination);
    if (l < p.metrics.diversity.paths.size()) o << prefix << "diversity," << key << ',' << p.metrics.diversity.paths[l] << '\n';
    if (l < p.metrics.coverage.pairs.size()) {
      o << prefix << "landing_distance," << key << ',' << fmt(p.metrics.coverage.pairs[l].distance) << '\n';
    }
  }
  return o.str();
}

class SolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepConfig {
  std::vector<double> budgets;  // ascending
  std::vector<double> valuations;  // w grid, ascending
  DesignMethod method = DesignMethod::direct_milp;
  double big_m = 0.0;
  double big_m_lambda = 0.0;
  long node_limit = 200000;
  int jobs = 1;

  std::string tag() const {
    std::string t = std::string("method=") + to_string(method) + ";big_m=" + fmt(big_m) + ";big_m_lambda=" +
                    fmt(big_m_lambda) + ";node_limit=" + std::to_string(node_limit) + ";budgets=";
    for (double b : budgets) t += fmt(b) + ",";
    t += ";w=";
    for (double w : valuations) t += fmt(w) + ",";
    return t;
  }
};

inline DesignSpec sweep_spec(const NetworkFile& f, double budget, double w, const SweepConfig& cfg) {
  DesignSpec spec = make_spec(f, budget, w);
  spec.big_m = cfg.big_m;
  spec.big_m_lambda = cfg.big_m_lambda;
  return spec;
}

// Throws SolveFailure when the solver stalls or returns no design.
inline DesignResult solve_point(const DesignSpec& spec, const SweepConfig& cfg) {
  DesignOptions opt;
  opt.mip.node_limit = cfg.node_limit;
  DesignResult r;
  try {
    r = solve_design(spec, cfg.method, opt);
  } catch (const SolverStalled& e) {
    throw SolveFailure(e.what());
  }
  if (!r.feasible) {
    throw SolveFailure("no feasible design (budget " + fmt(spec.budget) + ", w " + fmt(spec.valuation) + ")");
  }
  return r;
}

struct SweepOutput {
  std::vector<SweepPoint> points;  // ordered by (budget, w)
  std::string metrics_csv;
  std::string plot_csv;
  std::string designs_json;
};

// Grid points run on cfg.jobs threads; output order is fixed by (budget, w).
inline SweepOutput run_sweep(const NetworkFile& f, const SweepConfig& cfg, const std::string& hash) {
  if (cfg.budgets.empty() || cfg.valuations.empty()) throw std::invalid_argument("sweep grids must be nonempty");
  for (const std::vector<double>* g : {&cfg.budgets, &cfg.valuations}) {
    for (std::size_t i = 1; i < g->size(); ++i) {
      if (!((*g)[i] > (*g)[i - 1])) throw std::invalid_argument("sweep grids must be strictly ascending");
    }
  }
  std::vector<std::pair<double, double>> grid;
  for (double b : cfg.budgets) {
    for (double w : cfg.valuations) grid.emplace_back(b, w);
  }
  SweepOutput out;
  out.points.resize(grid.size());
  std::vector<DesignSpec> specs(grid.size());
  std::vector<std::string> errors(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        specs[i] = sweep_spec(f, grid[i].first, grid[i].second, cfg);
        SweepPoint& p = out.points[i];
        p.budget = grid[i].first;
        p.valuation = grid[i].second;
        p.design = solve_point(specs[i], cfg);
        p.metrics = compute_metrics(specs[i], p.design);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(grid.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!errors[i].empty()) {
      throw SolveFailure("budget " + fmt(grid[i].first) + ", w " + fmt(grid[i].second) + ": " + errors[i]);
    }
  }
  out.metrics_csv = metrics_csv_header();
  out.plot_csv = plot_csv_header();
  Json designs = Json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.metrics_csv += metrics_csv_row(out.points[i]);
    out.plot_csv += plot_csv_rows(out.points[i], f.demands);
    designs.push_back(design_to_json(specs[i], out.points[i].design, hash));
  }
  out.designs_json = designs.dump(2) + "\n";
  return out;
}

// ---- case generator ----

enum class CaseTopology { star, mesh_star, multi_star };

inline CaseTopology parse_topology(const std::string& s) {
  if (s == "star") return CaseTopology::star;
  if (s == "mesh-star") return CaseTopology::mesh_star;
  if (s == "multi-star") return CaseTopology::multi_star;
  throw std::invalid_argument("unknown topology '" + s + "' (star, mesh-star, multi-star)");
}

struct CaseParams {
  CaseTopology topology = CaseTopology::star;
  int nodes = 7;
  int od_pairs = 12;
  int candidates = 24;
  std::uint64_t seed = 1;
  double radius_km = 20.0;
  double hub_capacity = 10.0;
  int node_capacity_min = 4;  // non-hub nodes, integers
  int node_capacity_max = 8;
  int link_capacity_min = 4;  // per corridor, integers; both directions share the draw
  int link_capacity_max = 8;

  // Table sizes for each topology class.
  static CaseParams defaults(CaseTopology t) {
    CaseParams p;
    p.topology = t;
    if (t == CaseTopology::mesh_star) {
      p.nodes = 11;
      p.od_pairs = 58;
      p.candidates = 26;
    } else if (t == CaseTopology::multi_star) {
      p.nodes = 15;
      p.od_pairs = 64;
      p.candidates = 45;
    }
    return p;
  }
};

// mt19937_64 with doubles from the top 53 bits; identical on every platform.
class CaseRng {
 public:
  explicit CaseRng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  int integer(int lo, int hi) { return lo + static_cast<int>(std::floor(uniform() * (hi - lo + 1))); }

 private:
  std::mt19937_64 gen_;
};

inline NetworkFile gen_case(const CaseParams& p) {
  const int nv = p.nodes;
  const int hubs = p.topology == CaseTopology::multi_star ? std::max(2, (nv + 2) / 4) : 1;
  if (nv < 2 || hubs >= nv) throw std::invalid_argument("gen-case: too few nodes for the topology");
  if (p.candidates < 0) throw std::invalid_argument("gen-case: negative candidate count");
  if (!(p.radius_km > 0.0)) throw std::invalid_argument("gen-case: radius must be positive");
  if (!(p.hub_capacity > 0.0) || p.node_capacity_min < 1 || p.node_capacity_min > p.node_capacity_max ||
      p.link_capacity_min < 1 || p.link_capacity_min > p.link_capacity_max) {
    throw std::invalid_argument("gen-case: capacity ranges must be positive and ordered");
  }
  const double kPi = 3.14159265358979323846;
  CaseRng rng(p.seed);
  NetworkFile f;
  RiskNetwork& n = f.network;

  std::vector<Point> pos(nv);
  if (hubs == 1) {
    pos[0] = {0.0, 0.0};
    for (int i = 1; i < nv; ++i) {
      const double a = 2.0 * kPi * (i - 1 + 0.6 * (rng.uniform() - 0.5)) / (nv - 1);
      const double r = p.radius_km * (0.5 + 0.5 * rng.uniform());
      pos[i] = {r * std::cos(a), r * std::sin(a)};
    }
  } else {
    for (int h = 0; h < hubs; ++h) {
      const double a = 2.0 * kPi * (h + 0.3 * (rng.uniform() - 0.5)) / hubs;
      pos[h] = {0.5 * p.radius_km * std::cos(a), 0.5 * p.radius_km * std::sin(a)};
    }
    for (int i = hubs; i < nv; ++i) {
      const double a = 2.0 * kPi * rng.uniform();
      const double r = p.radius_km * std::sqrt(0.1 + 0.9 * rng.uniform());
      pos[i] = {r * std::cos(a), r * std::sin(a)};
    }
  }
  for (int i = 0; i < nv; ++i) {
    const double cap = i < hubs ? p.hub_capacity : static_cast<double>(rng.integer(p.node_capacity_min, p.node_capacity_max));
    n.nodes.push_back({i, pos[i], cap});
  }

  // Undirected corridors: the topology's backbone, then extra pairs by class and length.
  std::set<std::pair<int, int>> edges;
  auto add = [&](int a, int b) { edges.insert({std::min(a, b), std::max(a, b)}); };
  auto nearest_hubs = [&](int i) {
    std::vector<int> h(hubs);
    std::iota(h.begin(), h.end(), 0);
    std::stable_sort(h.begin(), h.end(), [&](int x, int y) { return distance(pos[i], pos[x]) < distance(pos[i], pos[y]); });
    return h;
  };
  if (hubs == 1) {
    for (int i = 1; i < nv; ++i) add(0, i);
  } else {
    for (int a = 0; a < hubs; ++a) {
      for (int b = a + 1; b < hubs; ++b) add(a, b);
    }
    for (int i = hubs; i < nv; ++i) add(i, nearest_hubs(i)[0]);
  }
  struct Extra {
    int cls;
    double len;
    int a, b;
  };
  std::vector<Extra> extra;
  for (int a = 0; a < nv; ++a) {
    for (int b = a + 1; b < nv; ++b) {
      if (edges.count({a, b})) continue;
      int cls = 1;
      if (hubs > 1 && a < hubs && b >= hubs && nearest_hubs(b)[1] == a) cls = 0;
      extra.push_back({cls, distance(pos[a], pos[b]), a, b});
    }
  }
  std::stable_sort(extra.begin(), extra.end(), [](const Extra& x, const Extra& y) {
    return x.cls != y.cls ? x.cls < y.cls : x.len < y.len;
  });
  if (p.od_pairs % 2 != 0) throw std::invalid_argument("gen-case: O-D pairs come in both directions, count must be even");
  const std::size_t want = static_cast<std::size_t>(p.od_pairs / 2);
  if (want < edges.size() || want > edges.size() + extra.size()) {
    throw std::invalid_argument("gen-case: O-D pair count must lie in [" + std::to_string(2 * edges.size()) + ", " +
                                std::to_string(2 * (edges.size() + extra.size())) + "] for this topology");
  }
  for (std::size_t k = 0; edges.size() < want; ++k) add(extra[k].a, extra[k].b);

  int id = 0;
  for (auto [a, b] : edges) {
    const double c = static_cast<double>(rng.integer(p.link_capacity_min, p.link_capacity_max));
    n.links.push_back({id++, a, b, c});
    n.links.push_back({id++, b, a, c});
  }
  for (const Link& e : n.links) f.demands.pairs.push_back({e.tail, e.head});

  auto levels = [](double c) {
    return ElementDisruption{0.0, {{0.75 * c, 0.7}, {0.5 * c, 0.15}, {0.25 * c, 0.1}, {0.0, 0.05}}};
  };
  n.disruption.p_dis = 1.0;
  for (const Node& v : n.nodes) n.disruption.nodes.push_back(levels(v.capacity));
  for (const Link& e : n.links) n.disruption.links.push_back(levels(e.capacity));
  n.disruption.set_uniform_weights();
  f.uniform_weights = true;

  Point centroid{0.0, 0.0};
  for (const Point& q : pos) {
    centroid.x_km += q.x_km / nv;
    centroid.y_km += q.y_km / nv;
  }
  std::vector<Candidate> cands;
  for (int c = 0; c < p.candidates; ++c) {
    const double a = 2.0 * kPi * rng.uniform();
    const double r = p.radius_km * std::sqrt(rng.uniform());
    cands.push_back({nv + c, {centroid.x_km + r * std::cos(a), centroid.y_km + r * std::sin(a)}});
  }
  f.candidates = CandidateSet::broadcast(cands, {0, 1, 2}, {0, 4, 6});
  f.policy = BackupPolicy{};
  return f;
}

}  // namespace vertiflow
