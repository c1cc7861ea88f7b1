#include "lrl/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "lrl/generic_prox.hpp"
#include "lrl/linalg.hpp"
#include "lrl/problem_io.hpp"
#include "lrl/rng.hpp"

namespace lrl {

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

std::string_view to_string(HessianMethod method) {
  return method == HessianMethod::Lanczos ? "lanczos" : "power";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_shape(const ProblemInstance& inst, const Matrix& m, const char* what) {
  if (m.rows() != inst.op.rows() || m.cols() != inst.op.cols())
    throw ValidationError(std::string(what) + ": matrix is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", problem is " +
                          std::to_string(inst.op.rows()) + "x" + std::to_string(inst.op.cols()));
}

void check_config(const SolverConfig& cfg) {
  if (cfg.max_iters < 0) throw ValidationError("solver: max_iters must be >= 0");
  if (!(cfg.fixpoint_tol > 0.0) || !(cfg.grad_tol > 0.0) || !(cfg.rank_tol > 0.0))
    throw ValidationError("solver: tolerances must be positive");
  if (cfg.stepsize && !(*cfg.stepsize > 0.0))
    throw ValidationError("solver: stepsize must be positive");
}

SolveStatus from_prox(ProxStatus s) {
  switch (s) {
    case ProxStatus::Converged: return SolveStatus::Converged;
    case ProxStatus::MaxIters: return SolveStatus::MaxIters;
    case ProxStatus::ObjectiveIncrease: return SolveStatus::NumericalFailure;
  }
  return SolveStatus::NumericalFailure;
}

// Shared driver for ISTA (rank = min(d1, d2)) and PPGD.
SolveReport run_thresholded_descent(const ProblemInstance& inst, const SolverConfig& cfg,
                                    Index rank, double eta, Matrix m0,
                                    const std::optional<Matrix>& reference) {
  const auto start = Clock::now();
  const SensingOperator& op = inst.op;
  const double lambda = inst.lambda;

  // The last prox output and its singular values; reused by the nonsmooth
  // term and the trace when the same matrix comes back.
  Matrix last_out;
  Vector last_spectrum;

  CompositeProblem<Matrix> problem;
  problem.smooth = [&](const Matrix& m) { return 0.5 * (inst.y - op.apply(m)).squaredNorm(); };
  problem.gradient = [&](const Matrix& m) -> Matrix { return -op.adjoint(inst.y - op.apply(m)); };
  problem.nonsmooth = [&](const Matrix& m) {
    if (last_out.size() == m.size() && last_out.rows() == m.rows() &&
        (last_out.array() == m.array()).all())
      return lambda * last_spectrum.sum();
    return lambda * nuclear_norm(m);
  };
  problem.prox = [&](const Matrix& z, double step) -> Matrix {
    Thresholded th = soft_hard_threshold_with_spectrum(z, rank, step * lambda);
    last_out = th.matrix;
    last_spectrum = std::move(th.kept_singvals);
    return std::move(th.matrix);
  };

  SolveReport rep;
  rep.stepsize = eta;
  ProxConfig pc;
  pc.stepsize = eta;
  pc.max_iters = cfg.max_iters;
  pc.fixpoint_tol = cfg.fixpoint_tol;

  auto result = constrained_prox_descent(
      problem, std::move(m0), pc, [&](int iter, const Matrix& m, double obj, double resid) {
        TraceRow row;
        row.iter = iter;
        row.objective = obj;
        row.fixpoint_residual = resid;
        row.rank_estimate = numerical_rank_of_spectrum(last_spectrum, cfg.rank_tol);
        if (reference) row.dist_to_ref = (m - *reference).norm();
        rep.trace.push_back(row);
      });

  rep.final_matrix = std::move(result.x);
  rep.iterations = result.iterations;
  rep.status = from_prox(result.status);
  rep.wall_time = seconds_since(start);
  return rep;
}

}  // namespace

double objective(const ProblemInstance& inst, const Matrix& m) {
  validate(inst);
  require_shape(inst, m, "objective");
  return 0.5 * (inst.y - inst.op.apply(m)).squaredNorm() + inst.lambda * nuclear_norm(m);
}

double ista_auto_stepsize(const ProblemInstance& inst) {
  const double norm = inst.op.norm_estimate(50, 0x5eedULL);
  if (!(norm > 0.0)) throw NumericalError("ista: operator norm estimate vanished");
  return 1.0 / (norm * norm);
}

double ppgd_auto_stepsize(const ProblemInstance& inst, Index r, int rip_samples,
                          std::uint64_t seed) {
  const Index rip_rank = std::min<Index>(2 * r, std::min(inst.op.rows(), inst.op.cols()));
  const double delta = estimate_rip(inst.op, rip_rank, rip_samples, seed).delta_lower;
  const double eta = 1.0 / (1.0 + delta);
  return std::clamp(eta, std::nextafter(0.75, 1.0), 1.0);
}

SolveReport solve_ista(const ProblemInstance& inst, const SolverConfig& cfg,
                       const std::optional<Matrix>& m0, const std::optional<Matrix>& reference) {
  validate(inst);
  check_config(cfg);
  if (cfg.rank) throw ValidationError("ista: the unconstrained solver takes no rank bound");
  Matrix start = m0 ? *m0 : Matrix::Zero(inst.op.rows(), inst.op.cols());
  require_shape(inst, start, "ista start");
  if (reference) require_shape(inst, *reference, "ista reference");
  const double eta = cfg.stepsize ? *cfg.stepsize : ista_auto_stepsize(inst);
  SolveReport rep = run_thresholded_descent(inst, cfg, std::min(inst.op.rows(), inst.op.cols()),
                                            eta, std::move(start), reference);
  if (rep.status == SolveStatus::Converged) {
    const Matrix ehat = compute_ehat(inst, rep.final_matrix);
    rep.optimality =
        subgradient_membership(rep.final_matrix, ehat, 1e-6 * (1.0 + operator_norm(ehat)),
                               cfg.rank_tol);
  }
  return rep;
}

SolveReport solve_ppgd(const ProblemInstance& inst, const SolverConfig& cfg, const Matrix& m0,
                       const std::optional<Matrix>& reference) {
  validate(inst);
  check_config(cfg);
  if (!cfg.rank || *cfg.rank < 1) throw ValidationError("ppgd: a rank bound r >= 1 is required");
  const Index r = *cfg.rank;
  if (r > std::min(inst.op.rows(), inst.op.cols()))
    throw ValidationError("ppgd: rank exceeds min(d1, d2)");
  require_shape(inst, m0, "ppgd start");
  if (reference) require_shape(inst, *reference, "ppgd reference");
  if (numerical_rank(m0, cfg.rank_tol) > r)
    throw ValidationError("ppgd: the starting point has rank above r");
  const double eta =
      cfg.stepsize ? *cfg.stepsize : ppgd_auto_stepsize(inst, r, cfg.rip_samples, cfg.seed);
  return run_thresholded_descent(inst, cfg, r, eta, m0, reference);
}

double bm_objective(const ProblemInstance& inst, const Matrix& x, const Matrix& y) {
  const Vector res = inst.op.apply(x * y.transpose()) - inst.y;
  return 0.5 * res.squaredNorm() + 0.5 * inst.lambda * (x.squaredNorm() + y.squaredNorm());
}

Factors bm_gradient(const ProblemInstance& inst, const Matrix& x, const Matrix& y) {
  const Matrix r = inst.op.adjoint(inst.op.apply(x * y.transpose()) - inst.y);
  return {r * y + inst.lambda * x, r.transpose() * x + inst.lambda * y};
}

Factors bm_hessian_vector(const ProblemInstance& inst, const Matrix& x, const Matrix& y,
                          const Matrix& dx, const Matrix& dy) {
  const Matrix r = inst.op.adjoint(inst.op.apply(x * y.transpose()) - inst.y);
  const Matrix s = inst.op.adjoint(inst.op.apply(dx * y.transpose() + x * dy.transpose()));
  return {s * y + r * dy + inst.lambda * dx, s.transpose() * x + r.transpose() * dx + inst.lambda * dy};
}

SolveReport solve_burer_monteiro(const ProblemInstance& inst, const SolverConfig& cfg,
                                 const std::optional<Matrix>& reference) {
  validate(inst);
  check_config(cfg);
  if (!cfg.rank || *cfg.rank < 1)
    throw ValidationError("burer_monteiro: a factor width r >= 1 is required");
  if (reference) require_shape(inst, *reference, "burer_monteiro reference");
  const auto start = Clock::now();
  const SensingOperator& op = inst.op;
  const double lambda = inst.lambda;
  const Index r = *cfg.rank;
  const Index d = std::max(op.rows(), op.cols());
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 60;
  constexpr int kRefreshEvery = 25;

  Rng rng(cfg.seed);
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(d * r));
  Matrix x = rng.normal_matrix(op.rows(), r, init_scale);
  Matrix y = rng.normal_matrix(op.cols(), r, init_scale);

  Vector res;  // A(X Y^T) - y
  double g = 0.0;
  auto refresh = [&] {
    res = op.apply(x * y.transpose()) - inst.y;
    g = 0.5 * res.squaredNorm() + 0.5 * lambda * (x.squaredNorm() + y.squaredNorm());
  };
  refresh();

  SolveReport rep;
  rep.status = SolveStatus::MaxIters;
  Matrix prev_x, prev_y, prev_gx, prev_gy;
  double step = 1.0;
  Matrix product = x * y.transpose();
  int since_refresh = 0;

  for (int it = 0;; ++it) {
    Matrix rmat = op.adjoint(res);
    Matrix gx = rmat * y + lambda * x;
    Matrix gy = rmat.transpose() * x + lambda * y;
    double gnorm = std::max(gx.norm(), gy.norm());
    if (gnorm <= cfg.grad_tol * (1.0 + g) && since_refresh > 0) {
      // Confirm on exactly recomputed quantities before stopping.
      refresh();
      since_refresh = 0;
      rmat = op.adjoint(res);
      gx = rmat * y + lambda * x;
      gy = rmat.transpose() * x + lambda * y;
      gnorm = std::max(gx.norm(), gy.norm());
    }
    if (gnorm <= cfg.grad_tol * (1.0 + g)) {
      rep.status = SolveStatus::Converged;
      break;
    }
    if (it >= cfg.max_iters) break;

    // Initial trial step: Barzilai-Borwein from the last move, else double the last step.
    double trial = std::min(2.0 * step, 1e8);
    if (it > 0) {
      const double ss = (x - prev_x).squaredNorm() + (y - prev_y).squaredNorm();
      const double sy = inner(x - prev_x, gx - prev_gx) + inner(y - prev_y, gy - prev_gy);
      if (sy > 0.0 && std::isfinite(ss / sy)) trial = std::min(ss / sy, 1e8);
    }
    if (cfg.stepsize) trial = *cfg.stepsize;

    // Along (X - t GX, Y - t GY) the residual is res - t a1 + t^2 a2 and the
    // change in g is a quartic in t, evaluated without cancellation against g.
    const Vector a1 = op.apply(gx * y.transpose() + x * gy.transpose());
    const Vector a2 = op.apply(gx * gy.transpose());
    const double gsq = gx.squaredNorm() + gy.squaredNorm();
    const double c1 = res.dot(a1) + lambda * (inner(x, gx) + inner(y, gy));
    const double c2 = res.dot(a2) + 0.5 * a1.squaredNorm() + 0.5 * lambda * gsq;
    const double c3 = a1.dot(a2);
    const double c4 = 0.5 * a2.squaredNorm();
    auto change = [&](double t) { return t * (-c1 + t * (c2 + t * (-c3 + t * c4))); };

    double t = trial;
    double delta = change(t);
    int halvings = 0;
    while (!(delta <= -kArmijo * t * gsq) && halvings < kMaxHalvings) {
      t *= 0.5;
      delta = change(t);
      ++halvings;
    }
    if (!(delta <= -kArmijo * t * gsq)) {
      rep.status = SolveStatus::NumericalFailure;
      break;
    }

    prev_x = x;
    prev_y = y;
    prev_gx = gx;
    prev_gy = gy;
    x -= t * gx;
    y -= t * gy;
    res += t * (t * a2 - a1);
    g += delta;
    step = t;
    if (++since_refresh >= kRefreshEvery) {
      refresh();
      since_refresh = 0;
    }

    Matrix next_product = x * y.transpose();
    TraceRow row;
    row.iter = it + 1;
    row.objective = g;
    row.fixpoint_residual = (next_product - product).norm() / std::max(1.0, product.norm());
    row.grad_norm = gnorm;
    row.rank_estimate = numerical_rank_of_spectrum(factored_singular_values(x, y), cfg.rank_tol);
    if (reference) row.dist_to_ref = (next_product - *reference).norm();
    rep.trace.push_back(row);
    product = std::move(next_product);
    rep.iterations = it + 1;
  }

  rep.stepsize = step;
  rep.final_matrix = x * y.transpose();
  rep.factored = Factors{std::move(x), std::move(y)};
  rep.wall_time = seconds_since(start);
  return rep;
}

namespace {

Vector pack(const Matrix& a, const Matrix& b) {
  Vector v(a.size() + b.size());
  v.head(a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
  v.tail(b.size()) = Eigen::Map<const Vector>(b.data(), b.size());
  return v;
}

}  // namespace

CriticalityReport certify_criticality(const ProblemInstance& inst, const Matrix& x,
                                      const Matrix& y, const CriticalityOptions& opts) {
  validate(inst);
  if (x.rows() != inst.op.rows() || y.rows() != inst.op.cols() || x.cols() != y.cols())
    throw ValidationError("certify_criticality: factor shapes do not match the problem");
  const double lambda = inst.lambda;
  const Index d1 = x.rows(), d2 = y.rows(), r = x.cols();
  const Index dim = (d1 + d2) * r;

  CriticalityReport rep;
  const Matrix rmat = inst.op.adjoint(inst.op.apply(x * y.transpose()) - inst.y);
  rep.grad_norm_x = (rmat * y + lambda * x).norm();
  rep.grad_norm_y = (rmat.transpose() * x + lambda * y).norm();
  rep.objective = bm_objective(inst, x, y);
  const double scale = 1.0 + rep.objective;

  auto hvp = [&](const Vector& v) -> Vector {
    const Eigen::Map<const Matrix> dx(v.data(), d1, r);
    const Eigen::Map<const Matrix> dy(v.data() + d1 * r, d2, r);
    const Matrix s = inst.op.adjoint(inst.op.apply(dx * y.transpose() + x * dy.transpose()));
    return pack(s * y + rmat * dy + lambda * dx, s.transpose() * x + rmat.transpose() * dx + lambda * dy);
  };

  Rng rng(opts.seed);
  Vector start = rng.normal_vector(dim);
  start.normalize();

  double hnorm = 0.0;
  bool have_min = false;
  if (!opts.force_power && dim > 0) {
    const int kmax = static_cast<int>(std::min<Index>(opts.max_lanczos.value_or(dim), dim));
    Matrix basis(dim, kmax);
    Vector alpha(kmax), beta(kmax);
    basis.col(0) = start;
    for (int j = 0; j < kmax; ++j) {
      Vector w = hvp(basis.col(j));
      alpha(j) = basis.col(j).dot(w);
      w -= alpha(j) * basis.col(j);
      if (j > 0) w -= beta(j - 1) * basis.col(j - 1);
      for (int pass = 0; pass < 2; ++pass)
        w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
      beta(j) = w.norm();
      hnorm = std::max(hnorm, std::abs(alpha(j)) + beta(j) + (j > 0 ? beta(j - 1) : 0.0));
      rep.lanczos_iters = j + 1;

      const bool exhausted = j + 1 == kmax;
      const bool breakdown = beta(j) <= 1e-12 * std::max(1.0, hnorm);
      if (!(exhausted || breakdown || (j + 1) % 10 == 0)) {
        basis.col(j + 1) = w / beta(j);
        continue;
      }
      Eigen::SelfAdjointEigenSolver<Matrix> tri;
      tri.computeFromTridiagonal(alpha.head(j + 1), beta.head(j), Eigen::ComputeEigenvectors);
      const double theta = tri.eigenvalues()(0);
      const double ritz_resid = beta(j) * std::abs(tri.eigenvectors()(j, 0));
      hnorm = std::max(hnorm, tri.eigenvalues().cwiseAbs().maxCoeff());
      const double tol = 1e-10 * std::max(1.0, hnorm);
      if (ritz_resid <= tol || (exhausted && kmax == dim)) {
        rep.min_hess_eig = theta;
        have_min = true;
        break;
      }
      if (breakdown || exhausted) {
        const Vector v = basis.leftCols(j + 1) * tri.eigenvectors().col(0);
        if ((hvp(v) - theta * v).norm() <= 1e-8 * std::max(1.0, hnorm)) {
          rep.min_hess_eig = theta;
          have_min = true;
        }
        break;
      }
      basis.col(j + 1) = w / beta(j);
    }
  }

  if (!have_min && dim > 0) {
    rep.method = HessianMethod::Power;
    if (hnorm == 0.0) {
      Vector v = start;
      for (int it = 0; it < 200; ++it) {
        const Vector hv = hvp(v);
        const double nv = hv.norm();
        if (nv == 0.0) break;
        hnorm = nv;
        v = hv / nv;
      }
    }
    const double shift = 1.1 * hnorm + 1e-12;
    Vector v = start;
    double mu = 0.0;
    for (int it = 0; it < opts.max_power_iters; ++it) {
      Vector bv = shift * v - hvp(v);
      const double next = v.dot(bv);
      const double nb = bv.norm();
      if (nb == 0.0) break;
      v = bv / nb;
      const bool done = it > 0 && std::abs(next - mu) <= 1e-13 * shift;
      mu = next;
      if (done) break;
    }
    rep.min_hess_eig = shift - mu;
  }

  rep.is_second_order = std::max(rep.grad_norm_x, rep.grad_norm_y) <= opts.grad_tol * scale &&
                        rep.min_hess_eig >= -opts.hess_tol * scale;
  return rep;
}

nlohmann::json to_json(const SolveReport& rep) {
  nlohmann::json doc;
  doc["d1"] = rep.final_matrix.rows();
  doc["d2"] = rep.final_matrix.cols();
  doc["matrix"] = matrix_to_json(rep.final_matrix);
  doc["status"] = std::string(to_string(rep.status));
  doc["iterations"] = rep.iterations;
  doc["stepsize"] = rep.stepsize;
  doc["wall_time"] = rep.wall_time;
  if (!rep.trace.empty()) {
    doc["final_objective"] = rep.trace.back().objective;
    doc["final_fixpoint_residual"] = rep.trace.back().fixpoint_residual;
    doc["final_rank_estimate"] = rep.trace.back().rank_estimate;
  }
  if (rep.factored) {
    doc["factored"] = {{"rank", rep.factored->x.cols()},
                       {"x", matrix_to_json(rep.factored->x)},
                       {"y", matrix_to_json(rep.factored->y)}};
  }
  if (rep.optimality) doc["optimality"] = to_json(*rep.optimality);
  return doc;
}

nlohmann::json to_json(const CriticalityReport& c) {
  return {{"grad_norm_x", c.grad_norm_x},   {"grad_norm_y", c.grad_norm_y},
          {"min_hess_eig", c.min_hess_eig}, {"lanczos_iters", c.lanczos_iters},
          {"method", std::string(to_string(c.method))},
          {"objective", c.objective},       {"is_second_order", c.is_second_order}};
}

}  // namespace lrl
