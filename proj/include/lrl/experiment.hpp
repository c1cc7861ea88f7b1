#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lrl/solvers.hpp"

namespace lrl::experiment {

inline constexpr int kCsvSchema = 1;

/// Flags shared by every subcommand.
struct GlobalOptions {
  std::uint64_t seed = 0;
  int jobs = 1;
  /// Output path; tables go to stdout when empty.
  std::string out;
  std::string format = "csv";
  double tol_fixpoint = 1e-10;
  double tol_grad = 1e-8;
  double tol_cert = 1e-6;
  double rank_tol = kDefaultRankTol;
  bool with_walltime = false;
};

/// One (instance, solver, seed) cell of an experiment table.
struct ResultRow {
  std::string cell;
  std::string solver;
  Index d1 = 0;
  Index d2 = 0;
  std::optional<Index> r_star;
  Index n = 0;
  double lambda = 0.0;
  std::optional<double> rho;
  std::optional<double> delta_lower;
  std::optional<Index> rank;
  std::optional<std::uint64_t> instance_seed;
  std::uint64_t solver_seed = 0;
  int iters = 0;
  double final_objective = 0.0;
  Index rank_mhat = 0;
  std::optional<Index> theorem_rank_cap;
  std::optional<double> dist_to_reference;
  std::optional<double> dist_to_truth;
  std::optional<bool> is_member;
  std::optional<bool> is_second_order;
  std::optional<double> min_hess_eig;
  std::string status;
  double fixpoint_tol = 0.0;
  double grad_tol = 0.0;
  double cert_tol = 0.0;
  double rank_tol = 0.0;
  double wall_time = 0.0;
};

std::vector<std::string> result_columns(bool with_walltime);

/// `# schema=1` comment line, header, then rows sorted by cell key.
void write_rows_csv(std::ostream& out, std::vector<ResultRow> rows, bool with_walltime);
nlohmann::json rows_to_json(std::vector<ResultRow> rows, bool with_walltime);
/// Writes to opts.out (stdout when empty) in opts.format.
void emit_rows(const std::vector<ResultRow>& rows, const GlobalOptions& opts);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);
/// Convergence plot (log10 fixpoint residual and distance to reference).
void write_trace_svg(std::ostream& out, const std::vector<TraceRow>& trace);

/// Instance description accepted by `generate`. Keys: d1, d2, r_star,
/// spectrum, n | n_factor, lambda | lambda_factor, rho, seed, operator.
/// n = round(n_factor * r_star * (d1 + d2)); lambda = lambda_factor * max(spectrum).
/// Unknown keys are rejected.
InstanceSpec instance_spec_from_json(const nlohmann::json& doc);

/// ISTA solution at fixpoint tolerance 1e-12, cached next to the problem
/// file as `<problem>.reference.json` and keyed by a hash of the file bytes.
Matrix reference_solution(const std::filesystem::path& problem_path, const ProblemInstance& inst,
                          int max_iters = 100000);

/// Removes the global keys (seed, jobs, out, format, tol_fixpoint, tol_grad,
/// tol_cert, rank_tol, with_walltime) from doc and returns them parsed.
GlobalOptions take_global_options(nlohmann::json& doc);

int cmd_generate(const InstanceSpec& spec, const std::filesystem::path& out);

struct SolveCommand {
  std::filesystem::path problem;
  std::string solver = "ista";
  std::optional<Index> rank;
  int seeds = 1;
  int max_iters = 5000;
  std::optional<double> stepsize;
  /// Start for ista/ppgd: "zero" or "random" (seeded per run).
  std::string init = "zero";
  int rip_samples = 200;
  bool use_reference = true;
  bool plot = false;
  /// Output prefix for <prefix>.report.json and <prefix>.trace.csv.
  std::string out_prefix;
};

/// Keys: problem, solver, rank, seeds, max_iters, stepsize, init,
/// rip_samples, use_reference, plot. The output prefix comes from GlobalOptions::out.
SolveCommand solve_command_from_json(const nlohmann::json& doc);
/// Returns 2 when any run ends in numerical failure (outputs still written).
int cmd_solve(const SolveCommand& cmd, const GlobalOptions& opts);

struct VerifyCommand {
  std::filesystem::path problem;
  std::filesystem::path solution;
  bool include_matrices = false;
  int rip_samples = 200;
};

/// Keys: problem, solution, include_matrices, rip_samples.
VerifyCommand verify_command_from_json(const nlohmann::json& doc);
nlohmann::json run_verify(const VerifyCommand& cmd, const GlobalOptions& opts);
int cmd_verify(const VerifyCommand& cmd, const GlobalOptions& opts);

struct LandscapeCommand {
  std::filesystem::path problem;
  std::vector<Index> ranks;
  int seeds = 20;
  int max_iters = 20000;
  double hess_tol = 1e-6;
  int rip_samples = 200;
};

/// Keys: problem, ranks, seeds, max_iters, hess_tol, rip_samples.
LandscapeCommand landscape_command_from_json(const nlohmann::json& doc);
std::vector<ResultRow> run_landscape(const LandscapeCommand& cmd, const GlobalOptions& opts);
int cmd_landscape(const LandscapeCommand& cmd, const GlobalOptions& opts);

/// Grid over noise ratio, measurement factor and penalty factor for a fixed
/// ground-truth shape; each cell generates an instance, solves it with ISTA
/// and checks the rank bound.
struct SweepConfig {
  Index d1 = 0;
  Index d2 = 0;
  Index r_star = 0;
  std::vector<double> spectrum;
  std::vector<double> rho;
  std::vector<double> n_factor;
  std::vector<double> lambda_factor;
  std::vector<std::uint64_t> seeds;
  int rip_samples = 200;
  int max_iters = 20000;
};

SweepConfig sweep_config_from_json(const nlohmann::json& doc);
std::vector<ResultRow> run_sweep(const SweepConfig& cfg, const GlobalOptions& opts);
int cmd_sweep(const SweepConfig& cfg, const GlobalOptions& opts);

}  // namespace lrl::experiment
