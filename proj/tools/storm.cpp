// storm: command-line front end for the transport solver, the denoising
// simulator, parameter sweeps and trace evaluation.
//
// Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 internal error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "storm/error.hpp"
#include "storm/experiment.hpp"
#include "storm/io.hpp"
#include "storm/ot.hpp"

namespace fs = std::filesystem;
using namespace storm;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInternal = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotConverged:
    case ErrorCode::kNonFinite:
      return kExitNumeric;
    default:
      return kExitInput;
  }
}

struct SinkhornArgs {
  std::string cost, mu, nu, plan_out;
  double eps = 0.05;
  double tol = 1e-6;
  int max_iter = 10000;
  bool eps_scaling = false;
};

int cmd_sinkhorn(const SinkhornArgs& a) {
  TransportProblem prob;
  prob.cost = io::read_matrix_csv(a.cost);
  prob.mu = io::read_vector_csv(a.mu);
  prob.nu = io::read_vector_csv(a.nu);
  prob.eps_reg = a.eps;
  SinkhornOptions opts;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  opts.eps_scaling = a.eps_scaling;
  const SinkhornResult r = sinkhorn(prob, opts);

  std::cout << "loss " << io::format_double(transport_loss(r.plan, prob.cost)) << '\n'
            << "entropic_loss " << io::format_double(entropic_loss(r, prob)) << '\n'
            << "marginal_err " << io::format_double(r.marginal_err) << '\n'
            << "iterations " << r.iterations << '\n'
            << "converged " << (r.converged ? "true" : "false") << '\n';
  if (!a.plan_out.empty()) {
    std::ostringstream ss;
    if (!r.converged) ss << "# not converged: marginal_err " << io::format_double(r.marginal_err) << '\n';
    io::write_matrix_csv(ss, r.plan);
    io::write_file(a.plan_out, ss.str());
  }
  if (!r.converged) {
    std::cerr << "storm: Sinkhorn did not converge within " << a.max_iter << " iterations\n";
    return kExitNumeric;
  }
  return 0;
}

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool dump_pgm = false;
  std::string axis;
  int jobs = 1;
};

ExperimentConfig load_config(const RunArgs& a) {
  ExperimentConfig cfg = parse_experiment(io::read_file(a.config));
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.seed) cfg.seeds = {*a.seed};
  if (a.dump_pgm) cfg.exports.dump_pgm = true;
  return cfg;
}

int cmd_simulate(const RunArgs& a) {
  // Everything is parsed and validated before the first file is written.
  const ExperimentConfig cfg = load_config(a);
  const fs::path out = cfg.output_dir;
  io::write_file(out / "config.json", dump_experiment(cfg));
  int code = 0;
  for (const auto seed : cfg.seeds) {
    SimConfig sim = cfg.sim;
    sim.seed = seed;
    const SimState state = run_denoise_loop(cfg.specs, sim);
    write_run(out / ("seed_" + std::to_string(seed)), state, cfg.specs, seed, cfg.exports.dump_pgm,
              sim);
    if (state.aborted) {
      std::cerr << "storm: seed " << seed << " aborted: " << state.abort_reason << '\n';
      code = kExitNumeric;
      continue;
    }
    std::cout << "seed " << seed << ": centroid_ok " << (state.metrics.centroid_ok ? "true" : "false")
              << ", miou " << io::format_double(state.metrics.miou) << '\n';
  }
  return code;
}

int cmd_sweep(const RunArgs& a) {
  const SweepAxis axis = parse_sweep_axis(a.axis);
  const ExperimentConfig cfg = load_config(a);
  if (a.jobs < 1) throw Error(ErrorCode::kBadConfig, "--jobs must be at least 1");
  const fs::path out = cfg.output_dir;
  io::write_file(out / "config.json", dump_experiment(cfg));
  const auto rows = run_sweep(cfg, axis, a.jobs, out);
  const auto aggs = aggregate_by_config(rows);
  io::write_file(out / "sweep.csv", metrics_csv(rows));
  io::write_file(out / "aggregate.csv", aggregate_csv(aggs));
  io::write_file(out / "aggregate.json", aggregate_json(aggs));
  std::cout << aggregate_csv(aggs);
  for (const auto& r : rows) {
    if (r.aborted) return kExitNumeric;
  }
  return 0;
}

int cmd_eval(const std::string& trace_dir, const std::string& out_arg) {
  const auto rows = evaluate_trace_dir(trace_dir);
  const fs::path out = out_arg.empty() ? fs::path(trace_dir) : fs::path(out_arg);
  const auto aggs = aggregate_by_config(rows);
  io::write_file(out / "metrics.csv", metrics_csv(rows));
  io::write_file(out / "metrics.json", aggregate_json(aggs));
  std::cout << aggregate_csv(aggs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial transport optimization toolkit"};
  app.require_subcommand(1);

  SinkhornArgs sk;
  auto* sinkhorn_cmd = app.add_subcommand("sinkhorn", "Solve one entropic transport problem");
  sinkhorn_cmd->add_option("--cost", sk.cost, "cost matrix CSV")->required();
  sinkhorn_cmd->add_option("--mu", sk.mu, "source marginal CSV")->required();
  sinkhorn_cmd->add_option("--nu", sk.nu, "target marginal CSV")->required();
  sinkhorn_cmd->add_option("--eps", sk.eps, "entropic regularization")->capture_default_str();
  sinkhorn_cmd->add_option("--tol", sk.tol, "marginal L1 tolerance")->capture_default_str();
  sinkhorn_cmd->add_option("--max-iter", sk.max_iter, "iteration cap")->capture_default_str();
  sinkhorn_cmd->add_option("--plan-out", sk.plan_out, "write the plan as CSV");
  sinkhorn_cmd->add_flag("--eps-scaling", sk.eps_scaling, "anneal eps down from the cost spread");

  RunArgs run;
  std::uint64_t seed_value = 0;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", run.config, "experiment JSON")->required()->envname("STORM_CONFIG");
    cmd->add_option("--out", run.out, "output directory (overrides the config)")
        ->envname("STORM_OUT");
    cmd->add_option("--seed", seed_value, "run this seed only")->envname("STORM_SEED");
    cmd->add_flag("--dump-pgm", run.dump_pgm, "write per-step PGM maps")->envname("STORM_DUMP_PGM");
  };
  auto* simulate_cmd = app.add_subcommand("simulate", "Run the denoising simulator");
  add_run_flags(simulate_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an ablation sweep");
  add_run_flags(sweep_cmd);
  sweep_cmd->add_option("--axis", run.axis, "window, omega or cost")->required();
  sweep_cmd->add_option("--jobs", run.jobs, "worker threads")
      ->envname("STORM_JOBS")
      ->capture_default_str();

  std::string trace_dir, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics over a trace directory");
  eval_cmd->add_option("trace_dir", trace_dir, "directory holding run outputs")->required();
  eval_cmd->add_option("--out", eval_out, "where to write metrics (default: trace_dir)")
      ->envname("STORM_OUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  for (auto* cmd : {simulate_cmd, sweep_cmd}) {
    if (cmd->parsed() && cmd->count("--seed") > 0) run.seed = seed_value;
  }

  try {
    if (sinkhorn_cmd->parsed()) return cmd_sinkhorn(sk);
    if (simulate_cmd->parsed()) return cmd_simulate(run);
    if (sweep_cmd->parsed()) return cmd_sweep(run);
    if (eval_cmd->parsed()) return cmd_eval(trace_dir, eval_out);
  } catch (const Error& e) {
    std::cerr << "storm: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "storm: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "storm: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
