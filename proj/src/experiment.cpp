#include "lrl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <iterator>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "lrl/linalg.hpp"
#include "lrl/problem_io.hpp"
#include "lrl/rng.hpp"

namespace lrl::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string padded(std::size_t value, int width = 4) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::vector<std::pair<std::string, json>> row_fields(const ResultRow& r, bool with_walltime) {
  std::vector<std::pair<std::string, json>> f = {
      {"cell", r.cell},
      {"solver", r.solver},
      {"d1", r.d1},
      {"d2", r.d2},
      {"r_star", opt(r.r_star)},
      {"n", r.n},
      {"lambda", r.lambda},
      {"rho", opt(r.rho)},
      {"delta_lower", opt(r.delta_lower)},
      {"rank", opt(r.rank)},
      {"instance_seed", opt(r.instance_seed)},
      {"solver_seed", r.solver_seed},
      {"iters", r.iters},
      {"final_objective", r.final_objective},
      {"rank_mhat", r.rank_mhat},
      {"theorem_rank_cap", opt(r.theorem_rank_cap)},
      {"dist_to_reference", opt(r.dist_to_reference)},
      {"dist_to_truth", opt(r.dist_to_truth)},
      {"is_member", opt(r.is_member)},
      {"is_second_order", opt(r.is_second_order)},
      {"min_hess_eig", opt(r.min_hess_eig)},
      {"status", r.status},
      {"fixpoint_tol", r.fixpoint_tol},
      {"grad_tol", r.grad_tol},
      {"cert_tol", r.cert_tol},
      {"rank_tol", r.rank_tol}};
  if (with_walltime) f.emplace_back("wall_time", r.wall_time);
  return f;
}

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.get<std::string>();
}

void sort_rows(std::vector<ResultRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ResultRow& a, const ResultRow& b) { return a.cell < b.cell; });
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double relative_distance(const Matrix& a, const Matrix& ref) {
  const double scale = ref.norm();
  const double d = (a - ref).norm();
  return scale > 0.0 ? d / scale : d;
}

void reject_unknown_keys(const json& doc, const std::set<std::string>& allowed, const char* what) {
  if (!doc.is_object()) throw ValidationError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!allowed.count(key))
      throw ValidationError(std::string(what) + ": unknown key '" + key + "'");
}

template <class T>
T get_as(const json& doc, const char* key, const char* what) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(what) + ": missing or mistyped key '" + key + "'");
  }
}

double max_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

Index measurement_count(double factor, Index r_star, Index d1, Index d2) {
  return static_cast<Index>(std::llround(factor * static_cast<double>(r_star * (d1 + d2))));
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<std::string> result_columns(bool with_walltime) {
  std::vector<std::string> cols;
  for (auto& [k, _] : row_fields(ResultRow{}, with_walltime)) cols.push_back(k);
  return cols;
}

void write_rows_csv(std::ostream& out, std::vector<ResultRow> rows, bool with_walltime) {
  sort_rows(rows);
  out << "# schema=" << kCsvSchema << '\n';
  const auto cols = result_columns(with_walltime);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const ResultRow& r : rows) {
    const auto fields = row_fields(r, with_walltime);
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_cell(fields[i].second);
    out << '\n';
  }
}

json rows_to_json(std::vector<ResultRow> rows, bool with_walltime) {
  sort_rows(rows);
  json arr = json::array();
  for (const ResultRow& r : rows) {
    json obj = json::object();
    for (auto& [k, v] : row_fields(r, with_walltime)) obj[k] = v;
    arr.push_back(std::move(obj));
  }
  return {{"schema", kCsvSchema}, {"rows", std::move(arr)}};
}

void emit_rows(const std::vector<ResultRow>& rows, const GlobalOptions& opts) {
  if (opts.format != "csv" && opts.format != "json")
    throw ValidationError("--format must be csv or json");
  std::ostringstream buf;
  if (opts.format == "csv")
    write_rows_csv(buf, rows, opts.with_walltime);
  else
    buf << rows_to_json(rows, opts.with_walltime).dump(1) << '\n';
  if (opts.out.empty()) {
    std::cout << buf.str();
  } else {
    auto out = open_out(opts.out);
    out << buf.str();
  }
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "# schema=" << kCsvSchema << '\n';
  out << "iter,objective,fixpoint_residual,grad_norm,rank_estimate,dist_to_ref\n";
  for (const TraceRow& t : trace) {
    out << t.iter << ',' << format_double(t.objective) << ',' << format_double(t.fixpoint_residual)
        << ',' << (t.grad_norm ? format_double(*t.grad_norm) : "") << ',' << t.rank_estimate << ','
        << (t.dist_to_ref ? format_double(*t.dist_to_ref) : "") << '\n';
  }
}

void write_trace_svg(std::ostream& out, const std::vector<TraceRow>& trace) {
  constexpr double kW = 640, kH = 400, kPad = 50;
  auto log_or_nan = [](double v) { return v > 0.0 ? std::log10(v) : std::nan(""); };
  std::vector<double> resid, dist;
  for (const TraceRow& t : trace) {
    resid.push_back(log_or_nan(t.fixpoint_residual));
    dist.push_back(t.dist_to_ref ? log_or_nan(*t.dist_to_ref) : std::nan(""));
  }
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto* series : {&resid, &dist})
    for (double v : *series)
      if (std::isfinite(v)) {
        lo = any ? std::min(lo, v) : v;
        hi = any ? std::max(hi, v) : v;
        any = true;
      }
  if (!any || hi == lo) hi = lo + 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(trace.size()));
  auto polyline = [&](const std::vector<double>& s, const char* color) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s[i])) continue;
      const double px = kPad + (kW - 2 * kPad) * static_cast<double>(i) / n;
      const double py = kH - kPad - (kH - 2 * kPad) * (s[i] - lo) / (hi - lo);
      out << px << ',' << py << ' ';
    }
    out << "\"/>\n";
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad
      << "\" height=\"" << kH - 2 * kPad << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kPad << "\" y=\"" << kPad - 10 << "\">log10 fixpoint residual (blue), "
      << "log10 distance to reference (red); range [" << lo << ", " << hi << "]</text>\n";
  polyline(resid, "blue");
  polyline(dist, "red");
  out << "</svg>\n";
}

InstanceSpec instance_spec_from_json(const json& doc) {
  reject_unknown_keys(doc,
                      {"d1", "d2", "r_star", "spectrum", "n", "n_factor", "lambda",
                       "lambda_factor", "rho", "seed", "operator"},
                      "instance spec");
  InstanceSpec spec;
  spec.d1 = get_as<Index>(doc, "d1", "instance spec");
  spec.d2 = get_as<Index>(doc, "d2", "instance spec");
  spec.r_star = get_as<Index>(doc, "r_star", "instance spec");
  spec.spectrum = doc.contains("spectrum")
                      ? get_as<std::vector<double>>(doc, "spectrum", "instance spec")
                      : std::vector<double>(static_cast<std::size_t>(std::max<Index>(spec.r_star, 0)), 1.0);
  spec.operator_kind = operator_kind_from_string(
      doc.contains("operator") ? get_as<std::string>(doc, "operator", "instance spec") : "gaussian");
  if (doc.contains("n") && doc.contains("n_factor"))
    throw ValidationError("instance spec: give either n or n_factor, not both");
  if (doc.contains("n"))
    spec.n = get_as<Index>(doc, "n", "instance spec");
  else if (doc.contains("n_factor"))
    spec.n = measurement_count(get_as<double>(doc, "n_factor", "instance spec"), spec.r_star,
                               spec.d1, spec.d2);
  else if (spec.operator_kind == OperatorKind::Identity)
    spec.n = spec.d1 * spec.d2;
  else
    throw ValidationError("instance spec: n or n_factor is required");
  if (doc.contains("lambda") && doc.contains("lambda_factor"))
    throw ValidationError("instance spec: give either lambda or lambda_factor, not both");
  if (doc.contains("lambda"))
    spec.lambda = get_as<double>(doc, "lambda", "instance spec");
  else if (doc.contains("lambda_factor"))
    spec.lambda = get_as<double>(doc, "lambda_factor", "instance spec") * max_of(spec.spectrum);
  else
    throw ValidationError("instance spec: lambda or lambda_factor is required");
  spec.noise_ratio = doc.contains("rho") ? get_as<double>(doc, "rho", "instance spec") : 0.0;
  spec.seed = doc.contains("seed") ? get_as<std::uint64_t>(doc, "seed", "instance spec") : 0;
  return spec;
}

Matrix reference_solution(const fs::path& problem_path, const ProblemInstance& inst, int max_iters) {
  constexpr double kReferenceTol = 1e-12;
  const std::uint64_t hash = fnv1a(read_file(problem_path));
  fs::path cache = problem_path;
  cache += ".reference.json";
  if (fs::exists(cache)) {
    try {
      const json doc = read_json_file(cache);
      if (doc.at("problem_fnv1a").get<std::uint64_t>() == hash &&
          doc.at("fixpoint_tol").get<double>() == kReferenceTol)
        return matrix_from_json(doc.at("matrix"), inst.op.rows(), inst.op.cols(), "reference");
    } catch (const std::exception&) {
      // stale or unreadable cache: recompute below
    }
  }
  SolverConfig cfg;
  cfg.fixpoint_tol = kReferenceTol;
  cfg.max_iters = max_iters;
  const SolveReport rep = solve_ista(inst, cfg);
  if (rep.status == SolveStatus::NumericalFailure)
    throw NumericalError("reference: ISTA failed on " + problem_path.string());
  write_json_file(cache, {{"problem_fnv1a", hash},
                          {"fixpoint_tol", kReferenceTol},
                          {"status", std::string(to_string(rep.status))},
                          {"iterations", rep.iterations},
                          {"d1", inst.op.rows()},
                          {"d2", inst.op.cols()},
                          {"matrix", matrix_to_json(rep.final_matrix)}});
  return rep.final_matrix;
}

GlobalOptions take_global_options(json& doc) {
  if (!doc.is_object()) throw ValidationError("config: expected a JSON object");
  GlobalOptions g;
  const char* what = "global options";
  if (doc.contains("seed")) g.seed = get_as<std::uint64_t>(doc, "seed", what);
  if (doc.contains("jobs")) g.jobs = get_as<int>(doc, "jobs", what);
  if (doc.contains("out")) g.out = get_as<std::string>(doc, "out", what);
  if (doc.contains("format")) g.format = get_as<std::string>(doc, "format", what);
  if (doc.contains("tol_fixpoint")) g.tol_fixpoint = get_as<double>(doc, "tol_fixpoint", what);
  if (doc.contains("tol_grad")) g.tol_grad = get_as<double>(doc, "tol_grad", what);
  if (doc.contains("tol_cert")) g.tol_cert = get_as<double>(doc, "tol_cert", what);
  if (doc.contains("rank_tol")) g.rank_tol = get_as<double>(doc, "rank_tol", what);
  if (doc.contains("with_walltime")) g.with_walltime = get_as<bool>(doc, "with_walltime", what);
  for (const char* key : {"seed", "jobs", "out", "format", "tol_fixpoint", "tol_grad", "tol_cert",
                          "rank_tol", "with_walltime"})
    doc.erase(key);
  if (g.jobs < 1) throw ValidationError("--jobs must be >= 1");
  if (g.format != "csv" && g.format != "json") throw ValidationError("--format must be csv or json");
  if (!(g.tol_fixpoint > 0.0 && g.tol_grad > 0.0 && g.tol_cert > 0.0 && g.rank_tol > 0.0))
    throw ValidationError("tolerances must be positive");
  return g;
}

int cmd_generate(const InstanceSpec& spec, const fs::path& out) {
  if (out.empty()) throw ValidationError("generate: --out is required");
  save_instance(out, generate_instance(spec));
  return 0;
}

SolveCommand solve_command_from_json(const json& doc) {
  const char* what = "solve config";
  reject_unknown_keys(doc,
                      {"problem", "solver", "rank", "seeds", "max_iters", "stepsize", "init",
                       "rip_samples", "use_reference", "plot"},
                      what);
  SolveCommand c;
  c.problem = get_as<std::string>(doc, "problem", what);
  if (doc.contains("solver")) c.solver = get_as<std::string>(doc, "solver", what);
  if (doc.contains("rank")) c.rank = get_as<Index>(doc, "rank", what);
  if (doc.contains("seeds")) c.seeds = get_as<int>(doc, "seeds", what);
  if (doc.contains("max_iters")) c.max_iters = get_as<int>(doc, "max_iters", what);
  if (doc.contains("stepsize")) c.stepsize = get_as<double>(doc, "stepsize", what);
  if (doc.contains("init")) c.init = get_as<std::string>(doc, "init", what);
  if (doc.contains("rip_samples")) c.rip_samples = get_as<int>(doc, "rip_samples", what);
  if (doc.contains("use_reference")) c.use_reference = get_as<bool>(doc, "use_reference", what);
  if (doc.contains("plot")) c.plot = get_as<bool>(doc, "plot", what);
  return c;
}

int cmd_solve(const SolveCommand& cmd, const GlobalOptions& opts) {
  if (cmd.solver != "ista" && cmd.solver != "ppgd" && cmd.solver != "bm")
    throw ValidationError("solve: --solver must be ista, ppgd or bm");
  if (cmd.init != "zero" && cmd.init != "random")
    throw ValidationError("solve: --init must be zero or random");
  if (cmd.seeds < 1) throw ValidationError("solve: --seeds must be >= 1");
  if (cmd.out_prefix.empty()) throw ValidationError("solve: --out prefix is required");
  const ProblemInstance inst = load_instance(cmd.problem);
  std::optional<Matrix> reference;
  if (cmd.use_reference) reference = reference_solution(cmd.problem, inst);
  const Index d1 = inst.op.rows(), d2 = inst.op.cols();

  std::vector<SolveReport> reports(static_cast<std::size_t>(cmd.seeds));
  std::vector<ResultRow> rows(reports.size());
  parallel_for(reports.size(), opts.jobs, [&](std::size_t k) {
    const std::uint64_t seed = opts.seed + k;
    SolverConfig cfg;
    cfg.max_iters = cmd.max_iters;
    cfg.stepsize = cmd.stepsize;
    cfg.fixpoint_tol = opts.tol_fixpoint;
    cfg.grad_tol = opts.tol_grad;
    cfg.rank_tol = opts.rank_tol;
    cfg.seed = seed;
    cfg.rip_samples = cmd.rip_samples;
    SolveReport rep;
    if (cmd.solver == "ista") {
      std::optional<Matrix> m0;
      if (cmd.init == "random") {
        Rng rng(seed);
        m0 = rng.normal_matrix(d1, d2, 1.0 / std::sqrt(static_cast<double>(d1 * d2)));
      }
      rep = solve_ista(inst, cfg, m0, reference);
    } else {
      if (!cmd.rank) throw ValidationError("solve: --rank is required for " + cmd.solver);
      cfg.rank = cmd.rank;
      if (cmd.solver == "ppgd") {
        const Matrix m0 = cmd.init == "random" ? random_low_rank(d1, d2, *cmd.rank, seed)
                                               : Matrix::Zero(d1, d2);
        rep = solve_ppgd(inst, cfg, m0, reference);
      } else {
        rep = solve_burer_monteiro(inst, cfg, reference);
      }
    }
    ResultRow& row = rows[k];
    row.cell = "seed=" + padded(k);
    row.solver = cmd.solver;
    row.d1 = d1;
    row.d2 = d2;
    row.n = inst.op.measurement_count();
    row.lambda = inst.lambda;
    if (inst.ground_truth) {
      row.r_star = inst.ground_truth->r_star;
      row.dist_to_truth = relative_distance(rep.final_matrix, inst.ground_truth->m_star);
    }
    row.rank = cmd.rank;
    row.solver_seed = seed;
    row.iters = rep.iterations;
    row.final_objective = objective(inst, rep.final_matrix);
    row.rank_mhat = numerical_rank(rep.final_matrix, opts.rank_tol);
    if (reference) row.dist_to_reference = relative_distance(rep.final_matrix, *reference);
    if (rep.optimality) row.is_member = rep.optimality->is_member;
    row.status = std::string(to_string(rep.status));
    row.fixpoint_tol = opts.tol_fixpoint;
    row.grad_tol = opts.tol_grad;
    row.cert_tol = opts.tol_cert;
    row.rank_tol = opts.rank_tol;
    row.wall_time = rep.wall_time;
    reports[k] = std::move(rep);
  });

  bool failed = false;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    const std::string prefix =
        cmd.seeds > 1 ? cmd.out_prefix + ".seed" + padded(k) : cmd.out_prefix;
    json doc = to_json(reports[k]);
    doc["problem"] = cmd.problem.string();
    doc["solver"] = cmd.solver;
    doc["seed"] = opts.seed + k;
    doc["fixpoint_tol"] = opts.tol_fixpoint;
    doc["grad_tol"] = opts.tol_grad;
    doc["rank_tol"] = opts.rank_tol;
    if (cmd.rank) doc["rank"] = *cmd.rank;
    write_json_file(prefix + ".report.json", doc);
    auto trace = open_out(prefix + ".trace.csv");
    write_trace_csv(trace, reports[k].trace);
    if (cmd.plot) {
      auto svg = open_out(prefix + ".trace.svg");
      write_trace_svg(svg, reports[k].trace);
    }
    failed = failed || reports[k].status == SolveStatus::NumericalFailure;
  }
  if (cmd.seeds > 1) {
    auto table = open_out(cmd.out_prefix + ".rows.csv");
    write_rows_csv(table, rows, opts.with_walltime);
  }
  return failed ? 2 : 0;
}

VerifyCommand verify_command_from_json(const json& doc) {
  const char* what = "verify config";
  reject_unknown_keys(doc, {"problem", "solution", "include_matrices", "rip_samples"}, what);
  VerifyCommand c;
  c.problem = get_as<std::string>(doc, "problem", what);
  c.solution = get_as<std::string>(doc, "solution", what);
  if (doc.contains("include_matrices"))
    c.include_matrices = get_as<bool>(doc, "include_matrices", what);
  if (doc.contains("rip_samples")) c.rip_samples = get_as<int>(doc, "rip_samples", what);
  return c;
}

json run_verify(const VerifyCommand& cmd, const GlobalOptions& opts) {
  const ProblemInstance inst = load_instance(cmd.problem);
  const json sol = read_json_file(cmd.solution);
  const Index d1 = get_as<Index>(sol, "d1", "solution");
  const Index d2 = get_as<Index>(sol, "d2", "solution");
  if (d1 != inst.op.rows() || d2 != inst.op.cols())
    throw ValidationError("verify: solution shape does not match the problem");
  if (!sol.contains("matrix")) throw FormatError("solution: missing required key 'matrix'");
  const Matrix mhat = matrix_from_json(sol.at("matrix"), d1, d2, "solution/matrix");

  json doc;
  doc["problem"] = cmd.problem.string();
  doc["solution"] = cmd.solution.string();
  doc["cert_tol"] = opts.tol_cert;
  doc["rank_tol"] = opts.rank_tol;
  doc["objective"] = objective(inst, mhat);
  if (inst.ground_truth) {
    CertificateOptions co;
    co.rip_samples = cmd.rip_samples;
    co.rip_seed = opts.seed;
    co.cert_tol = opts.tol_cert;
    co.rank_tol = opts.rank_tol;
    doc["rip_samples"] = cmd.rip_samples;
    doc["certificate"] = to_json(verify_theorem1(inst, mhat, co), cmd.include_matrices);
  } else {
    const Matrix ehat = compute_ehat(inst, mhat);
    const Vector sv = svd(ehat).singvals;
    const double top = sv.size() ? sv(0) : 0.0;
    json cert;
    cert["singvals_ehat"] = vector_to_json(sv);
    cert["count_ge1"] = (sv.array() >= 1.0 - opts.tol_cert).count();
    cert["membership"] =
        to_json(subgradient_membership(mhat, ehat, opts.tol_cert * (1.0 + top), opts.rank_tol));
    cert["rank_mhat"] = numerical_rank(mhat, opts.rank_tol);
    if (cmd.include_matrices) cert["ehat"] = matrix_to_json(ehat);
    doc["certificate"] = std::move(cert);
  }
  return doc;
}

int cmd_verify(const VerifyCommand& cmd, const GlobalOptions& opts) {
  const json doc = run_verify(cmd, opts);
  if (opts.out.empty())
    std::cout << doc.dump(1) << '\n';
  else
    write_json_file(opts.out, doc);
  return 0;
}

LandscapeCommand landscape_command_from_json(const json& doc) {
  const char* what = "landscape config";
  reject_unknown_keys(doc, {"problem", "ranks", "seeds", "max_iters", "hess_tol", "rip_samples"},
                      what);
  LandscapeCommand c;
  c.problem = get_as<std::string>(doc, "problem", what);
  c.ranks = get_as<std::vector<Index>>(doc, "ranks", what);
  if (doc.contains("seeds")) c.seeds = get_as<int>(doc, "seeds", what);
  if (doc.contains("max_iters")) c.max_iters = get_as<int>(doc, "max_iters", what);
  if (doc.contains("hess_tol")) c.hess_tol = get_as<double>(doc, "hess_tol", what);
  if (doc.contains("rip_samples")) c.rip_samples = get_as<int>(doc, "rip_samples", what);
  return c;
}

std::vector<ResultRow> run_landscape(const LandscapeCommand& cmd, const GlobalOptions& opts) {
  if (cmd.seeds < 0) throw ValidationError("landscape: --seeds must be >= 0");
  const ProblemInstance inst = load_instance(cmd.problem);
  const Matrix reference = reference_solution(cmd.problem, inst);
  const Index max_rank = std::min(inst.op.rows(), inst.op.cols());
  for (Index r : cmd.ranks)
    if (r < 1 || r > max_rank) throw ValidationError("landscape: rank out of range");

  std::optional<double> rho;
  if (inst.ground_truth) rho = operator_norm(inst.op.adjoint(inst.ground_truth->xi)) / inst.lambda;
  std::vector<double> delta(cmd.ranks.size());
  for (std::size_t i = 0; i < cmd.ranks.size(); ++i)
    delta[i] = estimate_rip(inst.op, std::min(2 * cmd.ranks[i], max_rank), cmd.rip_samples,
                            opts.seed)
                   .delta_lower;

  const std::size_t per_rank = static_cast<std::size_t>(cmd.seeds);
  std::vector<ResultRow> rows(cmd.ranks.size() * per_rank);
  parallel_for(rows.size(), opts.jobs, [&](std::size_t idx) {
    const std::size_t ri = idx / per_rank, k = idx % per_rank;
    const Index r = cmd.ranks[ri];
    const std::uint64_t seed = opts.seed + k;
    SolverConfig cfg;
    cfg.rank = r;
    cfg.seed = seed;
    cfg.max_iters = cmd.max_iters;
    cfg.grad_tol = opts.tol_grad;
    cfg.rank_tol = opts.rank_tol;
    const SolveReport rep = solve_burer_monteiro(inst, cfg);
    CriticalityOptions co;
    co.grad_tol = opts.tol_grad;
    co.hess_tol = cmd.hess_tol;
    co.seed = seed;
    const CriticalityReport crit =
        certify_criticality(inst, rep.factored->x, rep.factored->y, co);

    ResultRow& row = rows[idx];
    row.cell = "rank=" + padded(static_cast<std::size_t>(r)) + "/seed=" + padded(k);
    row.solver = "bm";
    row.d1 = inst.op.rows();
    row.d2 = inst.op.cols();
    row.n = inst.op.measurement_count();
    row.lambda = inst.lambda;
    row.rho = rho;
    row.delta_lower = delta[ri];
    row.rank = r;
    row.solver_seed = seed;
    row.iters = rep.iterations;
    row.final_objective = objective(inst, rep.final_matrix);
    row.rank_mhat = numerical_rank(rep.final_matrix, opts.rank_tol);
    row.dist_to_reference = relative_distance(rep.final_matrix, reference);
    if (inst.ground_truth) {
      row.r_star = inst.ground_truth->r_star;
      row.dist_to_truth = relative_distance(rep.final_matrix, inst.ground_truth->m_star);
    }
    row.is_second_order = crit.is_second_order;
    row.min_hess_eig = crit.min_hess_eig;
    row.status = std::string(to_string(rep.status));
    row.fixpoint_tol = opts.tol_fixpoint;
    row.grad_tol = opts.tol_grad;
    row.cert_tol = opts.tol_cert;
    row.rank_tol = opts.rank_tol;
    row.wall_time = rep.wall_time;
  });
  return rows;
}

int cmd_landscape(const LandscapeCommand& cmd, const GlobalOptions& opts) {
  const auto rows = run_landscape(cmd, opts);
  emit_rows(rows, opts);
  const bool failed = std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) {
    return r.status == to_string(SolveStatus::NumericalFailure);
  });
  return failed ? 2 : 0;
}

SweepConfig sweep_config_from_json(const json& doc) {
  reject_unknown_keys(doc,
                      {"d1", "d2", "r_star", "spectrum", "rho", "n_factor", "lambda_factor",
                       "seeds", "rip_samples", "max_iters"},
                      "sweep config");
  SweepConfig cfg;
  cfg.d1 = get_as<Index>(doc, "d1", "sweep config");
  cfg.d2 = get_as<Index>(doc, "d2", "sweep config");
  cfg.r_star = get_as<Index>(doc, "r_star", "sweep config");
  cfg.spectrum = doc.contains("spectrum")
                     ? get_as<std::vector<double>>(doc, "spectrum", "sweep config")
                     : std::vector<double>(static_cast<std::size_t>(std::max<Index>(cfg.r_star, 0)), 1.0);
  cfg.rho = get_as<std::vector<double>>(doc, "rho", "sweep config");
  cfg.n_factor = get_as<std::vector<double>>(doc, "n_factor", "sweep config");
  cfg.lambda_factor = doc.contains("lambda_factor")
                          ? get_as<std::vector<double>>(doc, "lambda_factor", "sweep config")
                          : std::vector<double>{0.1};
  cfg.seeds = get_as<std::vector<std::uint64_t>>(doc, "seeds", "sweep config");
  if (doc.contains("rip_samples")) cfg.rip_samples = get_as<int>(doc, "rip_samples", "sweep config");
  if (doc.contains("max_iters")) cfg.max_iters = get_as<int>(doc, "max_iters", "sweep config");
  return cfg;
}

std::vector<ResultRow> run_sweep(const SweepConfig& cfg, const GlobalOptions& opts) {
  const std::size_t nr = cfg.rho.size(), nn = cfg.n_factor.size(), nl = cfg.lambda_factor.size(),
                    ns = cfg.seeds.size();
  std::vector<ResultRow> rows(nr * nn * nl * ns);
  parallel_for(rows.size(), opts.jobs, [&](std::size_t idx) {
    const std::size_t si = idx % ns, li = (idx / ns) % nl, ni = (idx / (ns * nl)) % nn,
                      ri = idx / (ns * nl * nn);
    InstanceSpec spec;
    spec.d1 = cfg.d1;
    spec.d2 = cfg.d2;
    spec.r_star = cfg.r_star;
    spec.spectrum = cfg.spectrum;
    spec.n = measurement_count(cfg.n_factor[ni], cfg.r_star, cfg.d1, cfg.d2);
    spec.lambda = cfg.lambda_factor[li] * max_of(cfg.spectrum);
    spec.noise_ratio = cfg.rho[ri];
    spec.seed = cfg.seeds[si];
    const ProblemInstance inst = generate_instance(spec);

    SolverConfig sc;
    sc.fixpoint_tol = opts.tol_fixpoint;
    sc.max_iters = cfg.max_iters;
    sc.rank_tol = opts.rank_tol;
    const SolveReport rep = solve_ista(inst, sc);
    CertificateOptions co;
    co.rip_samples = cfg.rip_samples;
    co.rip_seed = opts.seed;
    co.cert_tol = opts.tol_cert;
    co.rank_tol = opts.rank_tol;
    const CertificateReport cert = verify_theorem1(inst, rep.final_matrix, co);

    ResultRow& row = rows[idx];
    row.cell = "rho=" + padded(ri) + "/n=" + padded(ni) + "/lambda=" + padded(li) + "/seed=" + padded(si);
    row.solver = "ista";
    row.d1 = cfg.d1;
    row.d2 = cfg.d2;
    row.r_star = inst.ground_truth->r_star;
    row.n = spec.n;
    row.lambda = spec.lambda;
    row.rho = spec.noise_ratio;
    row.delta_lower = cert.delta_lower;
    row.instance_seed = spec.seed;
    row.iters = rep.iterations;
    row.final_objective = objective(inst, rep.final_matrix);
    row.rank_mhat = cert.rank_mhat;
    row.theorem_rank_cap = cert.theorem_rank_cap;
    row.dist_to_truth = relative_distance(rep.final_matrix, inst.ground_truth->m_star);
    row.is_member = cert.membership.is_member;
    row.status = std::string(to_string(rep.status));
    row.fixpoint_tol = opts.tol_fixpoint;
    row.grad_tol = opts.tol_grad;
    row.cert_tol = opts.tol_cert;
    row.rank_tol = opts.rank_tol;
    row.wall_time = rep.wall_time;
  });
  return rows;
}

int cmd_sweep(const SweepConfig& cfg, const GlobalOptions& opts) {
  const auto rows = run_sweep(cfg, opts);
  emit_rows(rows, opts);
  const bool failed = std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) {
    return r.status == to_string(SolveStatus::NumericalFailure);
  });
  return failed ? 2 : 0;
}

}  // namespace lrl::experiment
