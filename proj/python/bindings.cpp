#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lrl/certificate.hpp"
#include "lrl/linalg.hpp"
#include "lrl/problem_io.hpp"
#include "lrl/solvers.hpp"

namespace py = pybind11;
using namespace lrl;

namespace {

py::object to_python(const nlohmann::json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

py::dict report_to_dict(const SolveReport& rep) {
  py::dict d;
  d["matrix"] = rep.final_matrix;
  d["status"] = std::string(to_string(rep.status));
  d["iterations"] = rep.iterations;
  d["stepsize"] = rep.stepsize;
  d["wall_time"] = rep.wall_time;
  py::list trace;
  for (const TraceRow& t : rep.trace) {
    py::dict row;
    row["iter"] = t.iter;
    row["objective"] = t.objective;
    row["fixpoint_residual"] = t.fixpoint_residual;
    row["grad_norm"] = t.grad_norm ? py::cast(*t.grad_norm) : py::none();
    row["rank_estimate"] = t.rank_estimate;
    row["dist_to_ref"] = t.dist_to_ref ? py::cast(*t.dist_to_ref) : py::none();
    trace.append(row);
  }
  d["trace"] = trace;
  if (rep.factored) {
    d["x"] = rep.factored->x;
    d["y"] = rep.factored->y;
  }
  if (rep.optimality) d["optimality"] = to_python(to_json(*rep.optimality));
  return d;
}

SolverConfig make_config(int max_iters, double fixpoint_tol, double grad_tol,
                         std::optional<double> stepsize, std::optional<Index> rank,
                         std::uint64_t seed, int rip_samples) {
  SolverConfig cfg;
  cfg.max_iters = max_iters;
  cfg.fixpoint_tol = fixpoint_tol;
  cfg.grad_tol = grad_tol;
  cfg.stepsize = stepsize;
  cfg.rank = rank;
  cfg.seed = seed;
  cfg.rip_samples = rip_samples;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nuclear-norm regularized matrix sensing: operators, solvers, certificates";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::class_<SensingOperator>(m, "SensingOperator")
      .def_static("gaussian", &SensingOperator::gaussian, py::arg("d1"), py::arg("d2"),
                  py::arg("n"), py::arg("seed"))
      .def_static("identity", &SensingOperator::identity, py::arg("d1"), py::arg("d2"))
      .def_static(
          "from_matrices",
          [](const std::vector<Matrix>& mats) { return SensingOperator::from_matrices(mats); },
          py::arg("matrices"))
      .def_property_readonly("kind", [](const SensingOperator& op) { return std::string(to_string(op.kind())); })
      .def_property_readonly("shape", [](const SensingOperator& op) { return py::make_tuple(op.rows(), op.cols()); })
      .def_property_readonly("n", &SensingOperator::measurement_count)
      .def("apply", &SensingOperator::apply, py::arg("m"))
      .def("adjoint", &SensingOperator::adjoint, py::arg("v"))
      .def("sensing_matrix", &SensingOperator::sensing_matrix, py::arg("i"))
      .def("scaled", &SensingOperator::scaled, py::arg("c"));

  py::class_<ProblemInstance>(m, "Problem")
      .def(py::init([](SensingOperator op, Vector y, double lam) {
             ProblemInstance inst{std::move(op), std::move(y), lam, std::nullopt};
             validate(inst);
             return inst;
           }),
           py::arg("op"), py::arg("y"), py::arg("lam"))
      .def_readonly("op", &ProblemInstance::op)
      .def_readonly("y", &ProblemInstance::y)
      .def_readonly("lam", &ProblemInstance::lambda)
      .def_property_readonly("m_star", [](const ProblemInstance& p) -> py::object {
        return p.ground_truth ? py::cast(p.ground_truth->m_star) : py::none();
      })
      .def_property_readonly("xi", [](const ProblemInstance& p) -> py::object {
        return p.ground_truth ? py::cast(p.ground_truth->xi) : py::none();
      })
      .def_property_readonly("r_star", [](const ProblemInstance& p) -> py::object {
        return p.ground_truth ? py::cast(p.ground_truth->r_star) : py::none();
      });

  m.def(
      "generate_instance",
      [](Index d1, Index d2, Index r_star, std::vector<double> spectrum, Index n, double lam,
         double noise_ratio, std::uint64_t seed, const std::string& op) {
        InstanceSpec s;
        s.d1 = d1;
        s.d2 = d2;
        s.r_star = r_star;
        s.spectrum = std::move(spectrum);
        s.n = n;
        s.lambda = lam;
        s.noise_ratio = noise_ratio;
        s.seed = seed;
        s.operator_kind = operator_kind_from_string(op);
        return generate_instance(s);
      },
      py::arg("d1"), py::arg("d2"), py::arg("r_star"), py::arg("spectrum"), py::arg("n"),
      py::arg("lam"), py::arg("noise_ratio") = 0.0, py::arg("seed") = 0,
      py::arg("operator") = "gaussian");
  m.def("load_problem", [](const std::string& path) { return load_instance(path); }, py::arg("path"));
  m.def("save_problem", [](const ProblemInstance& p, const std::string& path) { save_instance(path, p); },
        py::arg("problem"), py::arg("path"));

  m.def("objective", &objective, py::arg("problem"), py::arg("m"));
  m.def("svd", [](const Matrix& a) {
    const Svd s = svd(a);
    return py::make_tuple(s.left, s.singvals, s.right);
  });
  m.def("soft_threshold", &soft_threshold, py::arg("m"), py::arg("alpha"));
  m.def("soft_hard_threshold", &soft_hard_threshold, py::arg("m"), py::arg("r"), py::arg("alpha"));
  m.def("numerical_rank", &numerical_rank, py::arg("m"), py::arg("rel_tol") = kDefaultRankTol);
  m.def("block_decompose", [](const Matrix& a, Index r) { return block_decompose(a, r).blocks; },
        py::arg("m"), py::arg("r"));
  m.def("ideal_solution", [](const Matrix& a, double lam) {
    const IdealSolution s = ideal_solution(a, lam);
    return py::make_tuple(s.m_lambda, s.e_lambda);
  }, py::arg("m_star"), py::arg("lam"));

  m.def("estimate_rip", [](const SensingOperator& op, Index r, int samples, std::uint64_t seed) {
    return estimate_rip(op, r, samples, seed).delta_lower;
  }, py::arg("op"), py::arg("r"), py::arg("samples") = 200, py::arg("seed") = 0);
  m.def("polarization_check", [](const SensingOperator& op, Index r, int trials, std::uint64_t seed) {
    const PolarizationResult p = polarization_check(op, r, trials, seed);
    return py::make_tuple(p.max_deviation, p.shared_delta_lower);
  }, py::arg("op"), py::arg("r"), py::arg("trials") = 20, py::arg("seed") = 0);

  m.def(
      "solve_ista",
      [](const ProblemInstance& p, int max_iters, double fixpoint_tol,
         std::optional<double> stepsize, std::optional<Matrix> m0, std::optional<Matrix> reference) {
        const SolverConfig cfg = make_config(max_iters, fixpoint_tol, 1e-8, stepsize, std::nullopt, 0, 200);
        SolveReport rep;
        {
          py::gil_scoped_release release;
          rep = solve_ista(p, cfg, m0, reference);
        }
        return report_to_dict(rep);
      },
      py::arg("problem"), py::arg("max_iters") = 5000, py::arg("fixpoint_tol") = 1e-10,
      py::arg("stepsize") = py::none(), py::arg("m0") = py::none(), py::arg("reference") = py::none());
  m.def(
      "solve_ppgd",
      [](const ProblemInstance& p, Index rank, std::optional<Matrix> m0, int max_iters,
         double fixpoint_tol, std::optional<double> stepsize, std::uint64_t seed,
         std::optional<Matrix> reference) {
        const SolverConfig cfg = make_config(max_iters, fixpoint_tol, 1e-8, stepsize, rank, seed, 200);
        const Matrix start = m0 ? *m0 : Matrix::Zero(p.op.rows(), p.op.cols());
        SolveReport rep;
        {
          py::gil_scoped_release release;
          rep = solve_ppgd(p, cfg, start, reference);
        }
        return report_to_dict(rep);
      },
      py::arg("problem"), py::arg("rank"), py::arg("m0") = py::none(), py::arg("max_iters") = 5000,
      py::arg("fixpoint_tol") = 1e-10, py::arg("stepsize") = py::none(), py::arg("seed") = 0,
      py::arg("reference") = py::none());
  m.def(
      "solve_burer_monteiro",
      [](const ProblemInstance& p, Index rank, std::uint64_t seed, int max_iters, double grad_tol,
         std::optional<Matrix> reference) {
        const SolverConfig cfg = make_config(max_iters, 1e-10, grad_tol, std::nullopt, rank, seed, 200);
        SolveReport rep;
        {
          py::gil_scoped_release release;
          rep = solve_burer_monteiro(p, cfg, reference);
        }
        return report_to_dict(rep);
      },
      py::arg("problem"), py::arg("rank"), py::arg("seed") = 0, py::arg("max_iters") = 20000,
      py::arg("grad_tol") = 1e-8, py::arg("reference") = py::none());

  m.def("bm_objective", &bm_objective, py::arg("problem"), py::arg("x"), py::arg("y"));
  m.def("bm_gradient", [](const ProblemInstance& p, const Matrix& x, const Matrix& y) {
    const Factors g = bm_gradient(p, x, y);
    return py::make_tuple(g.x, g.y);
  }, py::arg("problem"), py::arg("x"), py::arg("y"));
  m.def("bm_hessian_vector", [](const ProblemInstance& p, const Matrix& x, const Matrix& y,
                                const Matrix& dx, const Matrix& dy) {
    const Factors h = bm_hessian_vector(p, x, y, dx, dy);
    return py::make_tuple(h.x, h.y);
  }, py::arg("problem"), py::arg("x"), py::arg("y"), py::arg("dx"), py::arg("dy"));
  m.def("certify_criticality", [](const ProblemInstance& p, const Matrix& x, const Matrix& y,
                                  double grad_tol, double hess_tol) {
    CriticalityOptions o;
    o.grad_tol = grad_tol;
    o.hess_tol = hess_tol;
    return to_python(to_json(certify_criticality(p, x, y, o)));
  }, py::arg("problem"), py::arg("x"), py::arg("y"), py::arg("grad_tol") = 1e-8,
     py::arg("hess_tol") = 1e-6);

  m.def("compute_ehat", &compute_ehat, py::arg("problem"), py::arg("mhat"));
  m.def("subgradient_membership", [](const Matrix& mhat, const Matrix& e, double cert_tol) {
    return to_python(to_json(subgradient_membership(mhat, e, cert_tol)));
  }, py::arg("mhat"), py::arg("e"), py::arg("cert_tol") = 1e-6);
  m.def("verify_theorem1", [](const ProblemInstance& p, const Matrix& mhat, int rip_samples,
                              std::uint64_t rip_seed, double cert_tol) {
    CertificateOptions o;
    o.rip_samples = rip_samples;
    o.rip_seed = rip_seed;
    o.cert_tol = cert_tol;
    return to_python(to_json(verify_theorem1(p, mhat, o)));
  }, py::arg("problem"), py::arg("mhat"), py::arg("rip_samples") = 200, py::arg("rip_seed") = 0,
     py::arg("cert_tol") = 1e-6);
  m.def("theorem_rank_cap", &theorem_rank_cap, py::arg("condition_value"), py::arg("r_star"));
}
