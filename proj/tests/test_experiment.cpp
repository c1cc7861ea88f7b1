#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "lrl/experiment.hpp"
#include "lrl/linalg.hpp"
#include "lrl/problem_io.hpp"
#include "test_support.hpp"

using namespace lrl;
using namespace lrl::experiment;
using nlohmann::json;
namespace lt = lrl::testing;
namespace fs = std::filesystem;

namespace {

class Workdir : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() /
                 ("lrl_exp_" + std::to_string(::getpid()) + "_" +
                  ::testing::UnitTest::GetInstance()->current_test_info()->name());
  void SetUp() override { fs::create_directories(dir); }
  void TearDown() override { fs::remove_all(dir); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SweepConfig small_sweep() {
  return sweep_config_from_json(json::parse(R"({
    "d1": 10, "d2": 10, "r_star": 1, "spectrum": [1.0],
    "rho": [0.0, 0.03125], "n_factor": [6, 8], "lambda_factor": [0.1],
    "seeds": [1, 2], "rip_samples": 20})"));
}

}  // namespace

TEST(InstanceSpecJson, FactorsAndDefaults) {
  const InstanceSpec s = instance_spec_from_json(json::parse(
      R"({"d1": 40, "d2": 40, "r_star": 2, "n_factor": 8, "lambda_factor": 0.1, "rho": 0.03125, "seed": 3})"));
  EXPECT_EQ(s.n, 1280);
  EXPECT_DOUBLE_EQ(s.lambda, 0.1);
  EXPECT_EQ(s.spectrum, std::vector<double>({1.0, 1.0}));
  EXPECT_EQ(s.operator_kind, OperatorKind::Gaussian);
  EXPECT_EQ(s.seed, 3u);
}

TEST(InstanceSpecJson, Rejections) {
  EXPECT_THROW(instance_spec_from_json(json::parse(R"({"d1":2,"d2":2,"r_star":1,"n":4,"lambda":1,"colour":1})")),
               ValidationError);
  EXPECT_THROW(instance_spec_from_json(json::parse(R"({"d1":2,"d2":2,"r_star":1,"lambda":1})")),
               ValidationError);
  EXPECT_THROW(instance_spec_from_json(json::parse(R"({"d1":"two","d2":2,"r_star":1,"n":4,"lambda":1})")),
               ValidationError);
  const InstanceSpec id = instance_spec_from_json(
      json::parse(R"({"d1":2,"d2":3,"r_star":1,"lambda":1,"operator":"identity"})"));
  EXPECT_EQ(id.n, 6);
}

TEST(GlobalOptionsJson, TakesOnlyGlobalKeys) {
  json doc = json::parse(R"({"seed": 5, "jobs": 2, "format": "json", "tol_cert": 1e-7, "problem": "p.json"})");
  const GlobalOptions g = take_global_options(doc);
  EXPECT_EQ(g.seed, 5u);
  EXPECT_EQ(g.jobs, 2);
  EXPECT_EQ(g.format, "json");
  EXPECT_DOUBLE_EQ(g.tol_cert, 1e-7);
  EXPECT_EQ(doc.size(), 1u);
  json bad = json::parse(R"({"format": "xml"})");
  EXPECT_THROW(take_global_options(bad), ValidationError);
  json bad_jobs = json::parse(R"({"jobs": 0})");
  EXPECT_THROW(take_global_options(bad_jobs), ValidationError);
}

TEST(CommandJson, UnknownKeysRejected) {
  EXPECT_THROW(solve_command_from_json(json::parse(R"({"problem":"p","iters":3})")), ValidationError);
  EXPECT_THROW(verify_command_from_json(json::parse(R"({"problem":"p"})")), ValidationError);
  EXPECT_THROW(landscape_command_from_json(json::parse(R"({"problem":"p","ranks":[2],"x":1})")),
               ValidationError);
  EXPECT_THROW(sweep_config_from_json(json::parse(R"({"d1":2})")), ValidationError);
  const SolveCommand c =
      solve_command_from_json(json::parse(R"({"problem":"p","solver":"bm","rank":3,"seeds":4})"));
  EXPECT_EQ(c.rank.value(), 3);
  EXPECT_EQ(c.seeds, 4);
}

TEST(RowsCsv, SchemaLineAndOrdering) {
  ResultRow a, b;
  a.cell = "seed=0002";
  b.cell = "seed=0001";
  a.solver = b.solver = "ista";
  a.is_member = true;
  a.wall_time = b.wall_time = 1.25;
  std::ostringstream out;
  write_rows_csv(out, {a, b}, false);
  std::istringstream in(out.str());
  std::string l0, l1, l2, l3;
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_EQ(l0, "# schema=1");
  EXPECT_EQ(l1.rfind("cell,solver,", 0), 0u);
  EXPECT_EQ(l1.find("wall_time"), std::string::npos);
  EXPECT_EQ(l2.rfind("seed=0001,", 0), 0u);
  EXPECT_EQ(l3.rfind("seed=0002,", 0), 0u);
  EXPECT_NE(l3.find(",true,"), std::string::npos);
  std::ostringstream timed;
  write_rows_csv(timed, {a}, true);
  EXPECT_NE(timed.str().find("wall_time"), std::string::npos);
  const json j = rows_to_json({a, b}, false);
  EXPECT_EQ(j["rows"][0]["cell"], "seed=0001");
  EXPECT_TRUE(j["rows"][0]["is_member"].is_null());
}

TEST(TraceCsv, Columns) {
  std::vector<TraceRow> trace(2);
  trace[0].iter = 1;
  trace[0].objective = 0.5;
  trace[1].iter = 2;
  trace[1].grad_norm = 1e-3;
  trace[1].dist_to_ref = 0.25;
  std::ostringstream out;
  write_trace_csv(out, trace);
  EXPECT_EQ(out.str(),
            "# schema=1\niter,objective,fixpoint_residual,grad_norm,rank_estimate,dist_to_ref\n"
            "1,0.5,0,,0,\n2,0,0,0.001,0,0.25\n");
  std::ostringstream svg;
  write_trace_svg(svg, trace);
  EXPECT_EQ(svg.str().rfind("<svg", 0), 0u);
}

TEST_F(Workdir, GenerateIsReproducible) {
  const InstanceSpec spec = lt::a4_spec(3);
  ASSERT_EQ(cmd_generate(spec, dir / "a.json"), 0);
  ASSERT_EQ(cmd_generate(spec, dir / "b.json"), 0);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  const ProblemInstance inst = load_instance(dir / "a.json");
  const double rho = operator_norm(inst.op.adjoint(inst.ground_truth->xi)) / inst.lambda;
  EXPECT_NEAR(rho, 1.0 / 32.0, 1e-6);
}

TEST_F(Workdir, GenerateMinimalIdentity) {
  const InstanceSpec spec = instance_spec_from_json(
      json::parse(R"({"d1":3,"d2":3,"r_star":1,"lambda":0.2,"operator":"identity"})"));
  cmd_generate(spec, dir / "id.json");
  EXPECT_EQ(load_instance(dir / "id.json").op.kind(), OperatorKind::Identity);
}

TEST_F(Workdir, ReferenceIsCached) {
  InstanceSpec spec = lt::a4_spec(4);
  spec.d1 = spec.d2 = 10;
  spec.n = 320;
  save_instance(dir / "p.json", generate_instance(spec));
  const ProblemInstance inst = load_instance(dir / "p.json");
  const Matrix a = reference_solution(dir / "p.json", inst);
  ASSERT_TRUE(fs::exists(dir / "p.json.reference.json"));
  const auto stamp = fs::last_write_time(dir / "p.json.reference.json");
  const Matrix b = reference_solution(dir / "p.json", inst);
  EXPECT_EQ(a, b);
  EXPECT_EQ(fs::last_write_time(dir / "p.json.reference.json"), stamp);
  // a changed problem file invalidates the cache
  ProblemInstance changed = inst;
  changed.lambda = 0.2;
  save_instance(dir / "p.json", changed);
  const Matrix c = reference_solution(dir / "p.json", load_instance(dir / "p.json"));
  EXPECT_GT((c - a).norm(), 1e-6);
}

TEST_F(Workdir, SolveWritesOutputs) {
  const Matrix y = lt::gaussian(6, 5, 1);
  save_instance(dir / "d.json", lt::denoising(y, 0.8));
  SolveCommand cmd;
  cmd.problem = dir / "d.json";
  cmd.out_prefix = (dir / "run").string();
  cmd.plot = true;
  GlobalOptions opts;
  opts.tol_fixpoint = 1e-12;
  ASSERT_EQ(cmd_solve(cmd, opts), 0);
  const json rep = read_json_file(dir / "run.report.json");
  const Matrix got = matrix_from_json(rep["matrix"], 6, 5, "test");
  EXPECT_LE(lt::rel_diff(got, lt::oracle_soft_threshold(y, 0.8)), 1e-8);
  EXPECT_TRUE(fs::exists(dir / "run.trace.csv"));
  EXPECT_TRUE(fs::exists(dir / "run.trace.svg"));

  // then ppgd on the same file agrees
  cmd.solver = "ppgd";
  cmd.rank = 5;
  cmd.out_prefix = (dir / "pp").string();
  ASSERT_EQ(cmd_solve(cmd, opts), 0);
  const Matrix pp = matrix_from_json(read_json_file(dir / "pp.report.json")["matrix"], 6, 5, "test");
  EXPECT_LE((pp - got).norm(), 1e-6);

  cmd.solver = "bm";
  cmd.rank = 3;
  cmd.seeds = 3;
  cmd.out_prefix = (dir / "bm").string();
  ASSERT_EQ(cmd_solve(cmd, opts), 0);
  EXPECT_TRUE(fs::exists(dir / "bm.seed0002.report.json"));
  EXPECT_TRUE(fs::exists(dir / "bm.rows.csv"));

  cmd.solver = "nope";
  EXPECT_THROW(cmd_solve(cmd, opts), ValidationError);
}

TEST_F(Workdir, VerifyReportsWithoutFailing) {
  const ProblemInstance inst = generate_instance(lt::a4_spec(5));
  save_instance(dir / "p.json", inst);
  SolveCommand sc;
  sc.problem = dir / "p.json";
  sc.out_prefix = (dir / "s").string();
  GlobalOptions opts;
  ASSERT_EQ(cmd_solve(sc, opts), 0);

  VerifyCommand vc;
  vc.problem = dir / "p.json";
  vc.solution = dir / "s.report.json";
  vc.rip_samples = 20;
  const json good = run_verify(vc, opts);
  EXPECT_TRUE(good["certificate"]["membership"]["is_member"].get<bool>());
  EXPECT_TRUE(good["certificate"].contains("theorem_rank_cap"));
  EXPECT_EQ(good["certificate"]["rank_mhat"], 2);

  json rand_sol;
  rand_sol["d1"] = 40;
  rand_sol["d2"] = 40;
  rand_sol["matrix"] = matrix_to_json(lt::gaussian(40, 40, 1));
  write_json_file(dir / "rand.json", rand_sol);
  vc.solution = dir / "rand.json";
  opts.out = (dir / "v.json").string();
  EXPECT_EQ(cmd_verify(vc, opts), 0);
  EXPECT_FALSE(read_json_file(dir / "v.json")["certificate"]["membership"]["is_member"].get<bool>());
}

TEST_F(Workdir, LandscapeRows) {
  InstanceSpec spec = lt::a4_spec(6);
  spec.d1 = spec.d2 = 12;
  spec.n = 8 * 2 * 24;
  save_instance(dir / "p.json", generate_instance(spec));
  LandscapeCommand lc;
  lc.problem = dir / "p.json";
  lc.ranks = {1, 3};
  lc.seeds = 2;
  lc.rip_samples = 20;
  GlobalOptions opts;
  const auto rows = run_landscape(lc, opts);
  ASSERT_EQ(rows.size(), 4u);
  for (const ResultRow& r : rows) {
    if (r.rank.value() == 3) {
      EXPECT_TRUE(r.is_second_order.value());
      EXPECT_LE(r.dist_to_reference.value(), 1e-4);
    } else {
      EXPECT_GT(r.dist_to_reference.value(), 1e-3);  // under-parametrized
    }
  }
  lc.ranks = {13};
  EXPECT_THROW(run_landscape(lc, opts), ValidationError);
}

TEST_F(Workdir, LandscapeZeroOptimum) {
  InstanceSpec spec = lt::a4_spec(7);
  spec.d1 = spec.d2 = 8;
  spec.n = 256;
  spec.lambda = 5.0;
  save_instance(dir / "p.json", generate_instance(spec));
  LandscapeCommand lc;
  lc.problem = dir / "p.json";
  lc.ranks = {2};
  lc.seeds = 3;
  lc.rip_samples = 10;
  // reference is exactly zero, so the distance is the absolute size of X Y^T
  for (const ResultRow& r : run_landscape(lc, GlobalOptions{}))
    EXPECT_LE(r.dist_to_reference.value(), 1e-6);
}

TEST_F(Workdir, SweepGridAndDeterminism) {
  GlobalOptions opts;
  const auto rows = run_sweep(small_sweep(), opts);
  EXPECT_EQ(rows.size(), 2u * 2u * 2u);
  for (const ResultRow& r : rows) {
    EXPECT_TRUE(r.theorem_rank_cap.has_value());
    EXPECT_LE(r.rank_mhat, r.theorem_rank_cap.value());
  }
  opts.out = (dir / "a.csv").string();
  ASSERT_EQ(cmd_sweep(small_sweep(), opts), 0);
  opts.out = (dir / "b.csv").string();
  opts.jobs = 3;
  ASSERT_EQ(cmd_sweep(small_sweep(), opts), 0);
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST_F(Workdir, EmptySweepIsHeaderOnly) {
  SweepConfig cfg = small_sweep();
  cfg.rho.clear();
  GlobalOptions opts;
  opts.out = (dir / "e.csv").string();
  ASSERT_EQ(cmd_sweep(cfg, opts), 0);
  const std::string text = slurp(dir / "e.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}
