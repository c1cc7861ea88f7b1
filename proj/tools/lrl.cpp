// lrl: command-line harness around the lrl library.
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "lrl/experiment.hpp"
#include "lrl/problem_io.hpp"

namespace {

using nlohmann::json;
namespace ex = lrl::experiment;

enum class Kind { Int, Double, String, Bool, IntList, DoubleList };

// A command-line flag that lands in the same JSON document as the config file,
// so flags and --config share one validation path. Flags win over the file.
struct Flag {
  std::string key;
  Kind kind;
  std::vector<std::string> raw;
  std::string single;
  bool on = false;
  CLI::Option* opt = nullptr;
};

class FlagSet {
 public:
  void add(CLI::App* app, const std::string& name, const std::string& key, Kind kind,
           const std::string& help) {
    auto f = std::make_unique<Flag>(Flag{key, kind, {}, {}, false, nullptr});
    if (kind == Kind::Bool) {
      f->opt = app->add_flag(name, f->on, help);
    } else if (kind == Kind::IntList || kind == Kind::DoubleList) {
      f->opt = app->add_option(name, f->raw, help)->delimiter(',');
    } else {
      f->opt = app->add_option(name, f->single, help);
    }
    flags_.push_back(std::move(f));
  }

  void overlay(json& doc) const {
    for (const auto& f : flags_) {
      if (f->opt->count() == 0) continue;
      switch (f->kind) {
        case Kind::Bool: doc[f->key] = f->on; break;
        case Kind::String: doc[f->key] = f->single; break;
        case Kind::Int: doc[f->key] = to_int(f->single, f->key); break;
        case Kind::Double: doc[f->key] = to_double(f->single, f->key); break;
        case Kind::IntList: {
          json arr = json::array();
          for (const auto& s : f->raw) arr.push_back(to_int(s, f->key));
          doc[f->key] = arr;
          break;
        }
        case Kind::DoubleList: {
          json arr = json::array();
          for (const auto& s : f->raw) arr.push_back(to_double(s, f->key));
          doc[f->key] = arr;
          break;
        }
      }
    }
  }

 private:
  static long long to_int(const std::string& s, const std::string& key) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size())
      throw lrl::ValidationError("--" + key + ": expected an integer, got '" + s + "'");
    return v;
  }
  static double to_double(const std::string& s, const std::string& key) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size())
      throw lrl::ValidationError("--" + key + ": expected a number, got '" + s + "'");
    return v;
  }

  std::vector<std::unique_ptr<Flag>> flags_;
};

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("lrl");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("LRL_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept it when asked for
    if (level != spdlog::level::off || std::string(env) == "off")
      spdlog::set_level(level);
    else
      spdlog::warn("LRL_LOG: unknown level '{}', keeping warn", env);
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json doc = lrl::read_json_file(path);
  if (!doc.is_object()) throw lrl::ValidationError("config " + path + ": expected a JSON object");
  return doc;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Nuclear-norm regularized matrix sensing: instances, solvers, certificates"};
  app.require_subcommand(1);
  app.fallthrough();

  FlagSet globals;
  globals.add(&app, "--seed", "seed", Kind::Int, "Base random seed");
  globals.add(&app, "--jobs", "jobs", Kind::Int, "Parallel cells");
  globals.add(&app, "--out", "out", Kind::String, "Output path (prefix for solve)");
  globals.add(&app, "--format", "format", Kind::String, "Table format: csv or json");
  globals.add(&app, "--tol-fixpoint", "tol_fixpoint", Kind::Double, "Fixpoint tolerance");
  globals.add(&app, "--tol-grad", "tol_grad", Kind::Double, "Gradient tolerance");
  globals.add(&app, "--tol-cert", "tol_cert", Kind::Double, "Certificate tolerance");
  globals.add(&app, "--rank-tol", "rank_tol", Kind::Double, "Relative numerical-rank tolerance");
  globals.add(&app, "--with-walltime", "with_walltime", Kind::Bool, "Add wall_time column to tables");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its keys");
  };

  FlagSet gen_flags, solve_flags, verify_flags, land_flags, sweep_flags;

  auto* gen = app.add_subcommand("generate", "Generate a problem instance file");
  add_config(gen);
  gen_flags.add(gen, "--d1", "d1", Kind::Int, "Rows");
  gen_flags.add(gen, "--d2", "d2", Kind::Int, "Columns");
  gen_flags.add(gen, "--r-star", "r_star", Kind::Int, "Ground-truth rank");
  gen_flags.add(gen, "--spectrum", "spectrum", Kind::DoubleList, "Ground-truth singular values");
  gen_flags.add(gen, "--n", "n", Kind::Int, "Number of measurements");
  gen_flags.add(gen, "--n-factor", "n_factor", Kind::Double, "n = round(f r* (d1 + d2))");
  gen_flags.add(gen, "--lambda", "lambda", Kind::Double, "Penalty");
  gen_flags.add(gen, "--lambda-factor", "lambda_factor", Kind::Double, "lambda = f max(spectrum)");
  gen_flags.add(gen, "--rho", "rho", Kind::Double, "Noise ratio ||A^* xi||_op / lambda");
  gen_flags.add(gen, "--operator", "operator", Kind::String, "gaussian, identity or explicit");
  gen_flags.add(gen, "--instance-seed", "seed", Kind::Int, "Instance seed (defaults to --seed)");

  auto* solve = app.add_subcommand("solve", "Run ista, ppgd or bm on a problem file");
  add_config(solve);
  solve_flags.add(solve, "problem", "problem", Kind::String, "Problem file");
  solve_flags.add(solve, "--solver", "solver", Kind::String, "ista, ppgd or bm");
  solve_flags.add(solve, "--rank", "rank", Kind::Int, "Rank bound for ppgd and bm");
  solve_flags.add(solve, "--seeds", "seeds", Kind::Int, "Number of runs, seeds seed..seed+k-1");
  solve_flags.add(solve, "--max-iters", "max_iters", Kind::Int, "Iteration cap");
  solve_flags.add(solve, "--stepsize", "stepsize", Kind::Double, "Fixed stepsize");
  solve_flags.add(solve, "--init", "init", Kind::String, "zero or random");
  solve_flags.add(solve, "--rip-samples", "rip_samples", Kind::Int, "Samples for the ppgd stepsize");
  solve_flags.add(solve, "--no-reference", "no_reference", Kind::Bool, "Skip the reference solution");
  solve_flags.add(solve, "--plot", "plot", Kind::Bool, "Also write <out>.trace.svg");

  auto* verify = app.add_subcommand("verify", "Check optimality and the rank bound of a solution");
  add_config(verify);
  verify_flags.add(verify, "problem", "problem", Kind::String, "Problem file");
  verify_flags.add(verify, "solution", "solution", Kind::String, "Solution (a solve report)");
  verify_flags.add(verify, "--include-matrices", "include_matrices", Kind::Bool, "Embed E-hat");
  verify_flags.add(verify, "--rip-samples", "rip_samples", Kind::Int, "Samples for delta_lower");

  auto* land = app.add_subcommand("landscape", "Factored runs across ranks and seeds");
  add_config(land);
  land_flags.add(land, "problem", "problem", Kind::String, "Problem file");
  land_flags.add(land, "--ranks", "ranks", Kind::IntList, "Comma-separated factor ranks");
  land_flags.add(land, "--seeds", "seeds", Kind::Int, "Seeds per rank");
  land_flags.add(land, "--max-iters", "max_iters", Kind::Int, "Iteration cap");
  land_flags.add(land, "--hess-tol", "hess_tol", Kind::Double, "Hessian eigenvalue tolerance");
  land_flags.add(land, "--rip-samples", "rip_samples", Kind::Int, "Samples for delta_lower");

  auto* sweep = app.add_subcommand("sweep", "Grid over noise ratio, n and lambda with ISTA");
  add_config(sweep);
  sweep_flags.add(sweep, "--d1", "d1", Kind::Int, "Rows");
  sweep_flags.add(sweep, "--d2", "d2", Kind::Int, "Columns");
  sweep_flags.add(sweep, "--r-star", "r_star", Kind::Int, "Ground-truth rank");
  sweep_flags.add(sweep, "--spectrum", "spectrum", Kind::DoubleList, "Ground-truth singular values");
  sweep_flags.add(sweep, "--rho", "rho", Kind::DoubleList, "Noise ratios");
  sweep_flags.add(sweep, "--n-factor", "n_factor", Kind::DoubleList, "Measurement factors");
  sweep_flags.add(sweep, "--lambda-factor", "lambda_factor", Kind::DoubleList, "Penalty factors");
  sweep_flags.add(sweep, "--instance-seeds", "seeds", Kind::IntList, "Instance seeds");
  sweep_flags.add(sweep, "--rip-samples", "rip_samples", Kind::Int, "Samples for delta_lower");
  sweep_flags.add(sweep, "--max-iters", "max_iters", Kind::Int, "ISTA iteration cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    json doc = load_config(config_path);
    globals.overlay(doc);
    ex::GlobalOptions opts = ex::take_global_options(doc);

    if (gen->parsed()) {
      gen_flags.overlay(doc);
      if (!doc.contains("seed")) doc["seed"] = opts.seed;
      spdlog::info("generate -> {}", opts.out);
      return ex::cmd_generate(ex::instance_spec_from_json(doc), opts.out);
    }
    if (solve->parsed()) {
      solve_flags.overlay(doc);
      if (doc.contains("no_reference")) {
        doc["use_reference"] = !doc["no_reference"].get<bool>();
        doc.erase("no_reference");
      }
      const auto cmd = ex::solve_command_from_json(doc);
      auto with_prefix = cmd;
      with_prefix.out_prefix = opts.out;
      spdlog::info("solve {} on {}", cmd.solver, cmd.problem.string());
      const int code = ex::cmd_solve(with_prefix, opts);
      if (code == 2) spdlog::error("numerical failure; partial trace written");
      return code;
    }
    if (verify->parsed()) {
      verify_flags.overlay(doc);
      return ex::cmd_verify(ex::verify_command_from_json(doc), opts);
    }
    if (land->parsed()) {
      land_flags.overlay(doc);
      return ex::cmd_landscape(ex::landscape_command_from_json(doc), opts);
    }
    if (sweep->parsed()) {
      sweep_flags.overlay(doc);
      return ex::cmd_sweep(ex::sweep_config_from_json(doc), opts);
    }
  } catch (const lrl::NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
