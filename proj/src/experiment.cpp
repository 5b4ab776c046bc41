#include "storm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "storm/error.hpp"
#include "storm/io.hpp"

namespace storm {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view to_string(TargetFrame frame) {
  return frame == TargetFrame::kImage ? "image" : "cell_center";
}

TargetFrame parse_target_frame(std::string_view text) {
  if (text == "image") return TargetFrame::kImage;
  if (text == "cell_center") return TargetFrame::kCellCenter;
  throw Error(ErrorCode::kParse, "unknown target frame '" + std::string(text) + "'");
}

std::string_view to_string(RefineRule rule) {
  return rule == RefineRule::kAboveOneMinusThreshold ? "above_one_minus_threshold"
                                                     : "above_threshold";
}

RefineRule parse_refine_rule(std::string_view text) {
  if (text == "above_one_minus_threshold") return RefineRule::kAboveOneMinusThreshold;
  if (text == "above_threshold") return RefineRule::kAboveThreshold;
  throw Error(ErrorCode::kParse, "unknown refine rule '" + std::string(text) + "'");
}

namespace {

// Reads the keys of one JSON object and complains about anything left over.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail("expected an object");
  }

  bool has(const char* key) const { return obj_.contains(key); }

  const json& child(const char* key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = child(key);
    if (!v.is_number()) fail_at(key, "expected a number");
    out = v.get<double>();
  }

  void integer(const char* key, int& out) {
    if (!has(key)) return;
    const json& v = child(key);
    if (!v.is_number_integer()) fail_at(key, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) fail_at(key, "integer out of range");
    out = static_cast<int>(x);
  }

  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = child(key);
    if (!v.is_boolean()) fail_at(key, "expected true or false");
    out = v.get<bool>();
  }

  void text(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = child(key);
    if (!v.is_string()) fail_at(key, "expected a string");
    out = v.get<std::string>();
  }

  template <class T, class Parse>
  void named(const char* key, T& out, Parse parse) {
    std::string s;
    if (!has(key)) return;
    text(key, s);
    try {
      out = parse(s);
    } catch (const Error& e) {
      fail_at(key, e.what());
    }
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw Error(ErrorCode::kParse, "unknown key '" + where(k.c_str()) + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::kParse, (path_.empty() ? std::string("config") : path_) + ": " + msg);
  }
  [[noreturn]] void fail_at(const char* key, const std::string& msg) const {
    throw Error(ErrorCode::kParse, where(key) + ": " + msg);
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<int> int_list(Reader& r, const char* key, std::vector<int> fallback) {
  if (!r.has(key)) return fallback;
  const json& v = r.child(key);
  if (!v.is_array()) r.fail_at(key, "expected an array");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) r.fail_at(key, "expected integers");
    out.push_back(x.get<int>());
  }
  return out;
}

std::vector<double> double_list(Reader& r, const char* key, std::vector<double> fallback) {
  if (!r.has(key)) return fallback;
  const json& v = r.child(key);
  if (!v.is_array()) r.fail_at(key, "expected an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) r.fail_at(key, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

void read_init(const json& j, InitConfig& c) {
  Reader r(j, "sim.init");
  r.number("bump_amplitude", c.bump_amplitude);
  r.number("bump_width", c.bump_width);
  r.number("noise", c.noise);
  r.finish();
}

void read_sim(const json& j, SimConfig& c) {
  Reader r(j, "sim");
  r.integer("side", c.side);
  r.integer("total_steps", c.total_steps);
  r.integer("opt_window_end", c.opt_window_end);
  c.refine_steps = int_list(r, "refine_steps", c.refine_steps);
  c.refine_thresholds = double_list(r, "refine_thresholds", c.refine_thresholds);
  r.integer("max_refine_iters", c.max_refine_iters);
  r.number("scale_factor", c.scale_factor);
  r.number("scale_start", c.scale_start);
  r.number("scale_end", c.scale_end);
  r.number("temperature_start", c.temperature_start);
  r.number("temperature_end", c.temperature_end);
  r.integer("tokens", c.tokens);
  r.boolean("sto_enabled", c.sto_enabled);
  r.integer("window_start", c.window_start);
  r.integer("window_end", c.window_end);
  r.named("refine_rule", c.refine_rule, parse_refine_rule);
  r.integer("line_search_halvings", c.line_search_halvings);
  r.number("logit_gain", c.logit_gain);
  if (r.has("init")) read_init(r.child("init"), c.init);
  r.finish();
}

void read_cost(const json& j, CostConfig& c) {
  Reader r(j, "cost");
  r.number("lambda_mix", c.lambda_mix);
  r.number("p_norm", c.p_norm);
  r.number("eps_stab", c.eps_stab);
  r.named("orientation", c.orientation, parse_orientation);
  r.named("variant", c.variant, parse_cost_variant);
  r.finish();
}

OmegaSchedule::Mode parse_omega_mode(std::string_view s) {
  if (s == "dynamic") return OmegaSchedule::Mode::kDynamic;
  if (s == "fixed") return OmegaSchedule::Mode::kFixed;
  throw Error(ErrorCode::kParse, "unknown omega mode '" + std::string(s) + "'");
}

void read_omega(const json& j, OmegaSchedule& c) {
  Reader r(j, "omega");
  r.number("omega_max", c.omega_max);
  r.number("k", c.k);
  r.named("mode", c.mode, parse_omega_mode);
  r.number("value", c.fixed_value);
  r.finish();
}

void read_solver(const json& j, SolverConfig& c) {
  Reader r(j, "solver");
  r.number("eps_reg", c.eps_reg);
  r.number("tol", c.tol);
  r.integer("max_iter", c.max_iter);
  r.finish();
}

void read_smoothing(const json& j, SmoothingConfig& c) {
  Reader r(j, "smoothing");
  r.integer("kernel", c.kernel);
  r.number("sigma", c.sigma);
  r.finish();
}

void read_target(const json& j, StoConfig& c) {
  Reader r(j, "target");
  r.number("sigma", c.target_sigma);
  r.named("frame", c.frame, parse_target_frame);
  r.finish();
}

SpatialSpec read_spec(const json& j, std::size_t index) {
  Reader r(j, "specs[" + std::to_string(index) + "]");
  SpatialSpec s;
  if (!r.has("source") || !r.has("reference") || !r.has("relation")) {
    r.fail("needs source, reference and relation");
  }
  r.integer("source", s.source);
  r.integer("reference", s.reference);
  r.named("relation", s.relation, parse_relation);
  r.finish();
  return s;
}

}  // namespace

ExperimentConfig parse_experiment(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  Reader r(root, "");
  if (!r.has("schema_version")) r.fail("missing schema_version");
  int version = 0;
  r.integer("schema_version", version);
  if (version != kSchemaVersion) {
    r.fail("unsupported schema_version " + std::to_string(version) + " (expected " +
           std::to_string(kSchemaVersion) + ")");
  }

  ExperimentConfig cfg;
  if (r.has("seeds")) {
    const json& v = r.child("seeds");
    if (!v.is_array() || v.empty()) r.fail_at("seeds", "expected a non-empty array");
    cfg.seeds.clear();
    for (const auto& x : v) {
      if (!x.is_number_unsigned()) r.fail_at("seeds", "expected non-negative integers");
      cfg.seeds.push_back(x.get<std::uint64_t>());
    }
  }
  r.text("output_dir", cfg.output_dir);
  if (r.has("export")) {
    Reader e(r.child("export"), "export");
    e.boolean("dump_pgm", cfg.exports.dump_pgm);
    e.finish();
  }
  if (r.has("specs")) {
    const json& v = r.child("specs");
    if (!v.is_array()) r.fail_at("specs", "expected an array");
    for (std::size_t k = 0; k < v.size(); ++k) cfg.specs.push_back(read_spec(v[k], k));
  }
  if (r.has("sim")) read_sim(r.child("sim"), cfg.sim);
  if (r.has("cost")) read_cost(r.child("cost"), cfg.sim.sto.cost);
  if (r.has("omega")) read_omega(r.child("omega"), cfg.sim.omega);
  if (r.has("solver")) read_solver(r.child("solver"), cfg.sim.sto.solver);
  if (r.has("smoothing")) read_smoothing(r.child("smoothing"), cfg.sim.sto.smoothing);
  if (r.has("target")) read_target(r.child("target"), cfg.sim.sto);
  r.finish();

  validate(cfg.sim);
  if (cfg.specs.empty()) throw Error(ErrorCode::kBadConfig, "specs must not be empty");
  const int tokens = token_count(cfg.specs, cfg.sim);
  for (const auto& s : cfg.specs) validate(s, tokens);
  if (!(cfg.sim.sto.solver.eps_reg > 0.0) || !(cfg.sim.sto.solver.tol > 0.0) ||
      cfg.sim.sto.solver.max_iter < 1) {
    throw Error(ErrorCode::kBadConfig, "solver needs eps_reg > 0, tol > 0, max_iter >= 1");
  }
  if (cfg.sim.sto.smoothing.kernel < 1 || cfg.sim.sto.smoothing.kernel % 2 == 0 ||
      !(cfg.sim.sto.smoothing.sigma > 0.0)) {
    throw Error(ErrorCode::kBadKernel, "smoothing kernel must be odd and sigma positive");
  }
  if (cfg.output_dir.empty()) throw Error(ErrorCode::kBadConfig, "output_dir must not be empty");
  return cfg;
}

std::string dump_experiment(const ExperimentConfig& cfg) {
  const SimConfig& s = cfg.sim;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["export"] = {{"dump_pgm", cfg.exports.dump_pgm}};
  json specs = json::array();
  for (const auto& sp : cfg.specs) {
    specs.push_back({{"source", sp.source},
                     {"reference", sp.reference},
                     {"relation", std::string(to_string(sp.relation))}});
  }
  j["specs"] = specs;
  j["sim"] = {{"side", s.side},
              {"total_steps", s.total_steps},
              {"opt_window_end", s.opt_window_end},
              {"refine_steps", s.refine_steps},
              {"refine_thresholds", s.refine_thresholds},
              {"max_refine_iters", s.max_refine_iters},
              {"scale_factor", s.scale_factor},
              {"scale_start", s.scale_start},
              {"scale_end", s.scale_end},
              {"temperature_start", s.temperature_start},
              {"temperature_end", s.temperature_end},
              {"tokens", s.tokens},
              {"sto_enabled", s.sto_enabled},
              {"window_start", s.window_start},
              {"window_end", s.window_end},
              {"refine_rule", std::string(to_string(s.refine_rule))},
              {"line_search_halvings", s.line_search_halvings},
              {"logit_gain", s.logit_gain},
              {"init",
               {{"bump_amplitude", s.init.bump_amplitude},
                {"bump_width", s.init.bump_width},
                {"noise", s.init.noise}}}};
  const CostConfig& c = s.sto.cost;
  j["cost"] = {{"lambda_mix", c.lambda_mix},
               {"p_norm", c.p_norm},
               {"eps_stab", c.eps_stab},
               {"orientation", std::string(to_string(c.orientation))},
               {"variant", std::string(to_string(c.variant))}};
  j["omega"] = {{"omega_max", s.omega.omega_max},
                {"k", s.omega.k},
                {"mode", s.omega.mode == OmegaSchedule::Mode::kDynamic ? "dynamic" : "fixed"},
                {"value", s.omega.fixed_value}};
  j["solver"] = {{"eps_reg", s.sto.solver.eps_reg},
                 {"tol", s.sto.solver.tol},
                 {"max_iter", s.sto.solver.max_iter}};
  j["smoothing"] = {{"kernel", s.sto.smoothing.kernel}, {"sigma", s.sto.smoothing.sigma}};
  j["target"] = {{"sigma", s.sto.target_sigma}, {"frame", std::string(to_string(s.sto.frame))}};
  return j.dump(2) + "\n";
}

// ---- run outputs ----

namespace {

std::string opt_field(const std::optional<double>& v) {
  return v ? io::format_double(*v) : std::string();
}

json metrics_json(const RunMetrics& m) {
  json j;
  j["relation"] = std::string(to_string(m.relation));
  j["centroid_ok"] = m.centroid_ok;
  j["compbench_ok"] = m.compbench_ok;
  j["oa_a"] = m.oa_a;
  j["oa_b"] = m.oa_b;
  j["visor_uncond"] = m.visor_uncond;
  j["visor_cond"] = m.visor_cond ? json(*m.visor_cond) : json(nullptr);
  j["miou"] = m.miou;
  j["support_iou"] = m.support_iou;
  return j;
}

json specs_json(const std::vector<SpatialSpec>& specs) {
  json out = json::array();
  for (const auto& sp : specs) {
    out.push_back({{"source", sp.source},
                   {"reference", sp.reference},
                   {"relation", std::string(to_string(sp.relation))}});
  }
  return out;
}

}  // namespace

std::string trace_csv(const SimState& state) {
  std::ostringstream out;
  const std::size_t tokens = state.latents.size();
  out << "step,iter,temperature,omega,step_size,alpha,threshold,loss,loss_after,normalized,converged,"
         "centroid_ok,miou";
  for (std::size_t k = 0; k < tokens; ++k) out << ",token" << k << "_j,token" << k << "_i";
  out << '\n';
  for (const auto& r : state.trace) {
    out << r.step << ',' << r.iter << ',' << io::format_double(r.temperature) << ','
        << opt_field(r.omega) << ',' << opt_field(r.step_size) << ',' << opt_field(r.alpha) << ','
        << opt_field(r.threshold) << ',' << opt_field(r.loss_before) << ','
        << opt_field(r.loss_after) << ',' << opt_field(r.normalized) << ',' << (r.converged ? 1 : 0) << ','
        << (r.centroid_ok ? 1 : 0) << ',' << io::format_double(r.miou);
    for (std::size_t k = 0; k < tokens; ++k) {
      if (k < r.centroids.size()) {
        out << ',' << io::format_double(r.centroids[k].j) << ','
            << io::format_double(r.centroids[k].i);
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string summary_json(const SimState& state, const std::vector<SpatialSpec>& specs,
                         std::uint64_t seed) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = seed;
  j["tokens"] = state.latents.size();
  j["specs"] = specs_json(specs);
  j["aborted"] = state.aborted;
  j["abort_reason"] = state.abort_reason;
  j["last_step"] = state.step;
  j["updates_per_step"] = state.updates_per_step;
  if (!state.aborted) {
    j["metrics"] = metrics_json(state.metrics);
    json cents = json::array();
    for (const auto& m : state.maps) {
      const Centroid c = compute_centroid(m);
      cents.push_back({{"j", c.j}, {"i", c.i}});
    }
    j["final_centroids"] = cents;
  }
  return j.dump(2) + "\n";
}

void write_run(const fs::path& dir, const SimState& state, const std::vector<SpatialSpec>& specs,
               std::uint64_t seed, bool dump_pgm, const SimConfig& cfg) {
  fs::create_directories(dir);
  io::write_file(dir / "trace.csv", trace_csv(state));
  if (state.aborted) {
    // Snapshot of the latents at the failing step.
    for (std::size_t k = 0; k < state.latents.size(); ++k) {
      std::ostringstream ss;
      io::write_matrix_csv(ss, state.latents[k]);
      io::write_file(dir / ("latent_" + std::to_string(k) + ".csv"), ss.str());
    }
  }
  for (std::size_t k = 0; k < state.maps.size(); ++k) {
    std::ostringstream ss;
    io::write_grid_csv(ss, state.maps[k]);
    io::write_file(dir / ("map_" + std::to_string(k) + ".csv"), ss.str());
  }
  if (dump_pgm && !state.aborted) {
    // Guidance changed the latents along the way, so these show the final
    // latents read at each step's temperature.
    SmoothingConfig sm = cfg.sto.smoothing;
    sm.logit_gain = cfg.logit_gain;
    for (int t = 0; t <= cfg.total_steps; ++t) {
      const double tau = temperature_at(t, cfg);
      for (std::size_t k = 0; k < state.latents.size(); ++k) {
        const std::string name = "step_" + std::to_string(t) + "_token_" + std::to_string(k) + ".pgm";
        io::write_file(dir / "pgm" / name, io::encode_pgm(attention_map(state.latents[k], tau, sm)));
      }
    }
  }
  // Written last: its presence marks a complete run directory.
  io::write_file(dir / "summary.json", summary_json(state, specs, seed));
}

// ---- metrics tables ----

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "config,seed,relation,centroid_ok,compbench_ok,oa_a,oa_b,visor_uncond,visor_cond,miou,"
         "support_iou,aborted\n";
  for (const auto& r : rows) {
    const RunMetrics& m = r.metrics;
    out << r.config << ',' << r.seed << ',' << to_string(m.relation) << ',' << m.centroid_ok << ','
        << m.compbench_ok << ',' << m.oa_a << ',' << m.oa_b << ',' << m.visor_uncond << ','
        << (m.visor_cond ? std::to_string(int(*m.visor_cond)) : std::string()) << ','
        << io::format_double(m.miou) << ',' << io::format_double(m.support_iou) << ','
        << r.aborted << '\n';
  }
  return out.str();
}

std::vector<std::pair<std::string, AggregateMetrics>> aggregate_by_config(
    const std::vector<MetricsRow>& rows, int group_size) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<RunMetrics>> by;
  for (const auto& r : rows) {
    if (!by.count(r.config)) order.push_back(r.config);
    auto& v = by[r.config];
    if (!r.aborted) v.push_back(r.metrics);
  }
  std::vector<std::pair<std::string, AggregateMetrics>> out;
  for (const auto& name : order) {
    const auto& v = by[name];
    out.emplace_back(name, v.empty() ? AggregateMetrics{} : aggregate_metrics(v, group_size));
  }
  return out;
}

std::string aggregate_csv(const std::vector<std::pair<std::string, AggregateMetrics>>& aggs) {
  std::ostringstream out;
  out << "config,runs,oa_rate,centroid_rate,compbench_rate,visor_uncond,visor_cond,visor_1,"
         "visor_2,visor_3,visor_4,mean_miou,mean_support_iou\n";
  for (const auto& [name, a] : aggs) {
    out << name << ',' << a.runs << ',' << io::format_double(a.oa_rate) << ','
        << io::format_double(a.centroid_rate) << ',' << io::format_double(a.compbench_rate) << ','
        << io::format_double(a.visor_uncond) << ',' << opt_field(a.visor_cond);
    for (const auto& v : a.visor_n) out << ',' << opt_field(v);
    out << ',' << io::format_double(a.mean_miou) << ',' << io::format_double(a.mean_support_iou)
        << '\n';
  }
  return out.str();
}

std::string aggregate_json(const std::vector<std::pair<std::string, AggregateMetrics>>& aggs) {
  json out = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& [name, a] : aggs) {
    json j;
    j["config"] = name;
    j["runs"] = a.runs;
    j["oa_rate"] = a.oa_rate;
    j["centroid_rate"] = a.centroid_rate;
    j["compbench_rate"] = a.compbench_rate;
    j["visor_uncond"] = a.visor_uncond;
    j["visor_cond"] = opt(a.visor_cond);
    for (int n = 0; n < 4; ++n) j["visor_" + std::to_string(n + 1)] = opt(a.visor_n[n]);
    j["mean_miou"] = a.mean_miou;
    j["mean_support_iou"] = a.mean_support_iou;
    out.push_back(j);
  }
  return out.dump(2) + "\n";
}

namespace {

MetricsRow evaluate_run_dir(const fs::path& dir, const std::string& label) {
  json summary;
  try {
    summary = json::parse(io::read_file(dir / "summary.json"));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, (dir / "summary.json").string() + ": " + e.what());
  }
  Reader r(summary, (dir / "summary.json").string());
  if (!r.has("specs") || !summary["specs"].is_array()) r.fail("missing specs");
  std::vector<SpatialSpec> specs;
  const json& js = r.child("specs");
  for (std::size_t k = 0; k < js.size(); ++k) specs.push_back(read_spec(js[k], k));

  MetricsRow row;
  row.config = label;
  if (summary.contains("seed") && summary["seed"].is_number_unsigned()) {
    row.seed = summary["seed"].get<std::uint64_t>();
  }
  if (summary.contains("aborted") && summary["aborted"].is_boolean()) {
    row.aborted = summary["aborted"].get<bool>();
  }
  if (row.aborted) return row;

  std::vector<GridMap> maps;
  for (int k = 0;; ++k) {
    const fs::path p = dir / ("map_" + std::to_string(k) + ".csv");
    if (!fs::exists(p)) break;
    maps.push_back(io::read_grid_csv(p));
  }
  int needed = 0;
  for (const auto& s : specs) needed = std::max({needed, s.source + 1, s.reference + 1});
  if (static_cast<int>(maps.size()) < needed) {
    throw Error(ErrorCode::kParse, dir.string() + ": specs refer to " + std::to_string(needed) +
                                       " maps, found " + std::to_string(maps.size()));
  }
  for (std::size_t k = 1; k < maps.size(); ++k) {
    if (maps[k].side() != maps[0].side()) {
      throw Error(ErrorCode::kShapeMismatch, dir.string() + ": maps differ in size");
    }
  }
  row.metrics = evaluate_run(maps, specs);
  return row;
}

}  // namespace

std::vector<MetricsRow> evaluate_trace_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kParse, dir.string() + " is not a directory");
  std::vector<fs::path> runs;
  if (fs::exists(dir / "summary.json")) {
    runs.push_back(dir);
  } else {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().filename() == "summary.json") {
        runs.push_back(e.path().parent_path());
      }
    }
  }
  if (runs.empty()) throw Error(ErrorCode::kParse, dir.string() + " holds no run summaries");
  std::sort(runs.begin(), runs.end());
  std::vector<MetricsRow> rows;
  for (const auto& run : runs) {
    // Label a run by its parent directory relative to the root: for sweep
    // output that is the variant name.
    std::string label = ".";
    if (run != dir) {
      const fs::path rel = fs::relative(run, dir);
      label = rel.has_parent_path() ? rel.parent_path().generic_string() : rel.generic_string();
    }
    rows.push_back(evaluate_run_dir(run, label));
  }
  return rows;
}

// ---- sweeps ----

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kWindow: return "window";
    case SweepAxis::kOmega: return "omega";
    case SweepAxis::kCost: return "cost";
  }
  return "?";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  for (auto a : {SweepAxis::kWindow, SweepAxis::kOmega, SweepAxis::kCost}) {
    if (to_string(a) == text) return a;
  }
  throw Error(ErrorCode::kParse, "unknown sweep axis '" + std::string(text) +
                                     "' (expected window, omega or cost)");
}

std::vector<SweepVariant> sweep_variants(SweepAxis axis, const SimConfig& base) {
  std::vector<SweepVariant> out;
  switch (axis) {
    case SweepAxis::kWindow: {
      // Quarter-steps of the optimization window, each running to its end.
      const int end = base.opt_window_end;
      for (int q = 3; q >= 0; --q) {
        SimConfig c = base;
        c.window_start = end * q / 4;
        c.window_end = end;
        out.push_back({"window_" + std::to_string(c.window_start) + "_" + std::to_string(end), c});
      }
      break;
    }
    case SweepAxis::kOmega:
      for (double w : {1.0, 50.0, 100.0}) {
        SimConfig c = base;
        c.omega.mode = OmegaSchedule::Mode::kFixed;
        c.omega.fixed_value = w;
        out.push_back({"omega_" + std::to_string(static_cast<int>(w)), c});
      }
      out.push_back({"omega_dynamic", base});
      out.back().sim.omega.mode = OmegaSchedule::Mode::kDynamic;
      break;
    case SweepAxis::kCost:
      for (auto v : {CostVariant::kManhattan, CostVariant::kEuclidean, CostVariant::kMixedDistance,
                     CostVariant::kPositionalOnly, CostVariant::kSpatialTransport}) {
        SimConfig c = base;
        c.sto.cost.variant = v;
        out.push_back({std::string(to_string(v)), c});
      }
      break;
  }
  return out;
}

std::vector<MetricsRow> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, int jobs,
                                  const fs::path& out_dir) {
  const auto variants = sweep_variants(axis, cfg.sim);
  for (const auto& v : variants) validate(v.sim);
  const std::size_t cells = variants.size() * cfg.seeds.size();
  std::vector<MetricsRow> rows(cells);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells) return;
      const auto& variant = variants[idx / cfg.seeds.size()];
      const std::uint64_t seed = cfg.seeds[idx % cfg.seeds.size()];
      try {
        SimConfig c = variant.sim;
        c.seed = seed;
        const SimState state = run_denoise_loop(cfg.specs, c);
        if (!out_dir.empty()) {
          write_run(out_dir / variant.label / ("seed_" + std::to_string(seed)), state, cfg.specs,
                    seed, cfg.exports.dump_pgm, c);
        }
        rows[idx] = MetricsRow{variant.label, seed, state.aborted, state.metrics};
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(cells);
        return;
      }
    }
  };

  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells)));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace storm
