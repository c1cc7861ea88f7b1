#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <bitset>

#include "lrl/generic_prox.hpp"
#include "lrl/linalg.hpp"
#include "lrl/solvers.hpp"
#include "test_support.hpp"

using namespace lrl;
using namespace lrl::testing;

namespace {

ProblemInstance small_gaussian(std::uint64_t seed, double noise = 1.0 / 32.0) {
  InstanceSpec spec = a4_spec(seed);
  spec.d1 = 12;
  spec.d2 = 10;
  spec.n = 8 * 2 * 22;
  spec.noise_ratio = noise;
  return generate_instance(spec);
}

// Central differences of g along a unit direction.
double fd_directional(const ProblemInstance& inst, const Matrix& x, const Matrix& y,
                      const Matrix& dx, const Matrix& dy, double h) {
  return (bm_objective(inst, x + h * dx, y + h * dy) - bm_objective(inst, x - h * dx, y - h * dy)) /
         (2 * h);
}

Matrix dense_hessian(const ProblemInstance& inst, const Matrix& x, const Matrix& y) {
  const Index d1 = x.rows(), d2 = y.rows(), r = x.cols(), dim = (d1 + d2) * r;
  Matrix h(dim, dim);
  for (Index k = 0; k < dim; ++k) {
    Vector e = Vector::Unit(dim, k);
    const Matrix dx = Eigen::Map<const Matrix>(e.data(), d1, r);
    const Matrix dy = Eigen::Map<const Matrix>(e.data() + d1 * r, d2, r);
    const Factors hv = bm_hessian_vector(inst, x, y, dx, dy);
    h.col(k).head(d1 * r) = Eigen::Map<const Vector>(hv.x.data(), d1 * r);
    h.col(k).tail(d2 * r) = Eigen::Map<const Vector>(hv.y.data(), d2 * r);
  }
  return h;
}

}  // namespace

TEST(Objective, ZeroMatrix) {
  const ProblemInstance inst = small_gaussian(1);
  EXPECT_DOUBLE_EQ(objective(inst, Matrix::Zero(12, 10)), 0.5 * inst.y.squaredNorm());
}

TEST(Objective, ZeroResidual) {
  const Matrix m = gaussian(5, 4, 2);
  EXPECT_NEAR(objective(denoising(m, 0.7), m), 0.7 * nuclear_norm(m), 1e-12);
}

TEST(Objective, NaiveRecomputation) {
  const ProblemInstance inst = small_gaussian(2);
  const Matrix m = gaussian(12, 10, 3);
  double fit = 0.0;
  for (Index i = 0; i < inst.op.measurement_count(); ++i) {
    const double r = inst.y(i) - inst.op.sensing_matrix(i).cwiseProduct(m).sum();
    fit += r * r;
  }
  Eigen::BDCSVD<Matrix> dec(m);
  const double naive = 0.5 * fit + inst.lambda * dec.singularValues().sum();
  EXPECT_NEAR(objective(inst, m), naive, 1e-10 * naive);
}

TEST(Ista, DenoisingClosedForm) {
  const Matrix y = gaussian(15, 12, 4);
  const double lambda = 1.3;
  SolverConfig cfg;
  cfg.fixpoint_tol = 1e-12;
  const SolveReport rep = solve_ista(denoising(y, lambda), cfg);
  EXPECT_EQ(rep.status, SolveStatus::Converged);
  EXPECT_LE(rel_diff(rep.final_matrix, oracle_soft_threshold(y, lambda)), 1e-8);
  ASSERT_TRUE(rep.optimality.has_value());
  EXPECT_TRUE(rep.optimality->is_member);
}

TEST(Ista, FullShrinkageGivesZero) {
  ProblemInstance inst = small_gaussian(5);
  inst.lambda = 1.01 * operator_norm(inst.op.adjoint(inst.y));
  const SolveReport rep = solve_ista(inst, SolverConfig{});
  EXPECT_EQ(rep.final_matrix.norm(), 0.0);
  EXPECT_EQ(rep.status, SolveStatus::Converged);
}

TEST(Ista, AgreesWithFullRankPpgd) {
  const ProblemInstance inst = small_gaussian(6);
  SolverConfig cfg;
  cfg.fixpoint_tol = 1e-12;
  cfg.max_iters = 20000;
  const SolveReport ista = solve_ista(inst, cfg);
  cfg.rank = 10;
  cfg.stepsize = ista.stepsize;
  const SolveReport ppgd = solve_ppgd(inst, cfg, Matrix::Zero(12, 10));
  EXPECT_LE((ista.final_matrix - ppgd.final_matrix).norm(), 1e-6);
}

TEST(Ista, FixedPointProperty) {
  const ProblemInstance inst = small_gaussian(8);
  SolverConfig cfg;
  cfg.fixpoint_tol = 1e-11;
  cfg.max_iters = 20000;
  const SolveReport rep = solve_ista(inst, cfg);
  ASSERT_EQ(rep.status, SolveStatus::Converged);
  const Matrix& m = rep.final_matrix;
  const double eta = rep.stepsize;
  const Matrix step =
      soft_threshold(m + eta * inst.op.adjoint(inst.y - inst.op.apply(m)), eta * inst.lambda);
  EXPECT_LE((m - step).norm(), 10 * cfg.fixpoint_tol * std::max(1.0, m.norm()));
}

TEST(Ista, RejectsRankBound) {
  SolverConfig cfg;
  cfg.rank = 2;
  EXPECT_THROW(solve_ista(small_gaussian(1), cfg), ValidationError);
}

TEST(Ista, TraceAndReference) {
  const ProblemInstance inst = small_gaussian(7);
  const Matrix ref = solve_ista(inst, SolverConfig{}).final_matrix;
  const SolveReport rep = solve_ista(inst, SolverConfig{}, std::nullopt, ref);
  ASSERT_EQ(static_cast<int>(rep.trace.size()), rep.iterations);
  EXPECT_EQ(rep.trace.back().dist_to_ref.value(), 0.0);
  for (std::size_t i = 1; i < rep.trace.size(); ++i)
    EXPECT_LE(rep.trace[i].objective, rep.trace[i - 1].objective + 1e-12);
}

TEST(Ppgd, DenoisingConvergesInTwoSteps) {
  Vector sv(3);
  sv << 3.0, 2.0, 1.5;
  const Matrix y = with_spectrum(10, 9, sv, 8) + 0.01 * gaussian(10, 9, 9);
  const double lambda = 0.5;
  const Matrix closed = oracle_soft_threshold(y, lambda);
  ASSERT_EQ(numerical_rank(closed), 3);
  SolverConfig cfg;
  cfg.rank = 4;
  cfg.stepsize = 1.0;
  cfg.fixpoint_tol = 1e-12;
  const SolveReport rep = solve_ppgd(denoising(y, lambda), cfg, Matrix::Zero(10, 9));
  EXPECT_LE(rep.iterations, 2);
  EXPECT_LE(rel_diff(rep.final_matrix, closed), 1e-12);
}

TEST(Ppgd, IteratesRespectRank) {
  const ProblemInstance inst = small_gaussian(9);
  SolverConfig cfg;
  cfg.rank = 2;
  cfg.rip_samples = 30;
  const SolveReport rep = solve_ppgd(inst, cfg, random_low_rank(12, 10, 2, 1));
  ASSERT_FALSE(rep.trace.empty());
  for (const TraceRow& t : rep.trace) EXPECT_LE(t.rank_estimate, 2);
  EXPECT_LE(numerical_rank(rep.final_matrix, 1e-15), 2);
}

TEST(Ppgd, FixedPointStaysPut) {
  const ProblemInstance inst = small_gaussian(10);
  SolverConfig cfg;
  cfg.fixpoint_tol = 1e-13;
  cfg.max_iters = 20000;
  const Matrix mhat = solve_ista(inst, cfg).final_matrix;
  cfg.rank = 2;
  cfg.max_iters = 1;
  const SolveReport rep = solve_ppgd(inst, cfg, mhat);
  EXPECT_LE((rep.final_matrix - mhat).norm(), 1e-12);
}

TEST(Ppgd, RejectsHighRankStart) {
  SolverConfig cfg;
  cfg.rank = 1;
  EXPECT_THROW(solve_ppgd(small_gaussian(1), cfg, gaussian(12, 10, 1)), ValidationError);
  cfg.rank.reset();
  EXPECT_THROW(solve_ppgd(small_gaussian(1), cfg, Matrix::Zero(12, 10)), ValidationError);
}

TEST(Ppgd, AutoStepsizeRange) {
  const double eta = ppgd_auto_stepsize(small_gaussian(3), 2, 50, 0);
  EXPECT_GT(eta, 0.75);
  EXPECT_LE(eta, 1.0);
  EXPECT_EQ(ppgd_auto_stepsize(denoising(gaussian(4, 4, 1), 1.0), 2, 10, 0), 1.0);
}

TEST(Ppgd, MatchesHandRolledIteration) {
  const ProblemInstance inst = small_gaussian(11);
  const double eta = 0.85;
  const int steps = 25;
  Matrix m = random_low_rank(12, 10, 2, 5);
  const Matrix m0 = m;
  for (int t = 0; t < steps; ++t)
    m = soft_hard_threshold(m + eta * inst.op.adjoint(inst.y - inst.op.apply(m)), 2,
                            eta * inst.lambda);
  SolverConfig cfg;
  cfg.rank = 2;
  cfg.stepsize = eta;
  cfg.max_iters = steps;
  cfg.fixpoint_tol = 1e-300;
  const SolveReport rep = solve_ppgd(inst, cfg, m0);
  ASSERT_EQ(rep.iterations, steps);
  EXPECT_LE((rep.final_matrix - m).norm(), 1e-14 * std::max(1.0, m.norm()));
}

TEST(GenericProx, QuadraticGradientDescent) {
  // f = 0.5 x^T D x with diagonal D, h = 0: x_t = (1 - eta D)^t x0
  Vector dvec(3);
  dvec << 1.0, 0.5, 0.2;
  CompositeProblem<Vector> p;
  p.smooth = [&](const Vector& x) { return 0.5 * x.dot(dvec.asDiagonal() * x); };
  p.gradient = [&](const Vector& x) -> Vector { return dvec.asDiagonal() * x; };
  p.nonsmooth = [](const Vector&) { return 0.0; };
  p.prox = [](const Vector& z, double) { return z; };
  ProxConfig cfg;
  cfg.stepsize = 0.5;
  cfg.max_iters = 30;
  cfg.fixpoint_tol = 1e-300;
  const Vector x0 = Vector::Ones(3);
  int seen = 0;
  const auto res = constrained_prox_descent(p, x0, cfg, [&](int t, const Vector& x, double, double) {
    ++seen;
    for (Index i = 0; i < 3; ++i)
      EXPECT_NEAR(x(i), std::pow(1.0 - 0.5 * dvec(i), t), 1e-15);
  });
  EXPECT_EQ(seen, 30);
  EXPECT_EQ(res.status, ProxStatus::MaxIters);
}

TEST(GenericProx, SparseL1MatchesBruteForce) {
  // min 0.5 ||x - a||^2 + lam ||x||_1 over x with at most k nonzeros
  const int dim = 6, k = 2;
  const double lam = 0.3;
  Vector a(dim);
  a << 1.2, -0.1, 0.8, -2.0, 0.25, 0.5;
  auto soft = [&](double v, double t) { return std::copysign(std::max(std::abs(v) - t, 0.0), v); };
  CompositeProblem<Vector> p;
  p.smooth = [&](const Vector& x) { return 0.5 * (x - a).squaredNorm(); };
  p.gradient = [&](const Vector& x) -> Vector { return x - a; };
  p.nonsmooth = [&](const Vector& x) { return lam * x.lpNorm<1>(); };
  p.prox = [&](const Vector& z, double eta) -> Vector {
    Vector s(dim);
    for (int i = 0; i < dim; ++i) s(i) = soft(z(i), eta * lam);
    std::vector<int> idx(dim);
    for (int i = 0; i < dim; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int x, int y) { return std::abs(s(x)) > std::abs(s(y)); });
    Vector out = Vector::Zero(dim);
    for (int j = 0; j < k; ++j) out(idx[j]) = s(idx[j]);
    return out;
  };
  ProxConfig cfg;
  cfg.stepsize = 0.7;
  cfg.max_iters = 500;
  cfg.fixpoint_tol = 1e-14;
  const auto res = constrained_prox_descent(p, Vector(Vector::Zero(dim)), cfg);
  EXPECT_EQ(res.status, ProxStatus::Converged);

  double best = 1e300;
  Vector best_x;
  for (unsigned mask = 0; mask < (1u << dim); ++mask) {
    if (std::bitset<8>(mask).count() > static_cast<std::size_t>(k)) continue;
    Vector x = Vector::Zero(dim);
    for (int i = 0; i < dim; ++i)
      if (mask & (1u << i)) x(i) = soft(a(i), lam);
    const double val = p.smooth(x) + p.nonsmooth(x);
    if (val < best) {
      best = val;
      best_x = x;
    }
  }
  EXPECT_NEAR(res.objective, best, 1e-12);
  EXPECT_LE((res.x - best_x).norm(), 1e-10);
}

TEST(GenericProx, ReportsObjectiveIncrease) {
  CompositeProblem<Vector> p;
  p.smooth = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  p.gradient = [](const Vector& x) -> Vector { return x; };
  p.nonsmooth = [](const Vector&) { return 0.0; };
  p.prox = [](const Vector& z, double) { return z; };
  ProxConfig cfg;
  cfg.stepsize = 3.0;  // beyond 2/L, iterates blow up
  const auto res = constrained_prox_descent(p, Vector(Vector::Ones(2)), cfg);
  EXPECT_EQ(res.status, ProxStatus::ObjectiveIncrease);
}

TEST(BurerMonteiro, GradientMatchesFiniteDifferences) {
  const ProblemInstance inst = small_gaussian(12);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix x = gaussian(12, 3, 10 + s), y = gaussian(10, 3, 20 + s);
    const Factors g = bm_gradient(inst, x, y);
    Matrix dx = gaussian(12, 3, 30 + s), dy = gaussian(10, 3, 40 + s);
    const double nd = std::sqrt(dx.squaredNorm() + dy.squaredNorm());
    dx /= nd;
    dy /= nd;
    const double analytic = inner(g.x, dx) + inner(g.y, dy);
    const double fd = fd_directional(inst, x, y, dx, dy, 1e-5);
    EXPECT_LE(std::abs(analytic - fd), 1e-6 * std::max(1.0, std::abs(analytic)));
  }
}

TEST(BurerMonteiro, HessianVectorMatchesFiniteDifferences) {
  const ProblemInstance inst = small_gaussian(13);
  const Matrix x = gaussian(12, 2, 1), y = gaussian(10, 2, 2);
  const Matrix dx = gaussian(12, 2, 3), dy = gaussian(10, 2, 4);
  const double h = 1e-5;
  const Factors gp = bm_gradient(inst, x + h * dx, y + h * dy);
  const Factors gm = bm_gradient(inst, x - h * dx, y - h * dy);
  const Factors hv = bm_hessian_vector(inst, x, y, dx, dy);
  const Matrix fx = (gp.x - gm.x) / (2 * h), fy = (gp.y - gm.y) / (2 * h);
  const double err = std::sqrt((hv.x - fx).squaredNorm() + (hv.y - fy).squaredNorm());
  const double scale = std::sqrt(hv.x.squaredNorm() + hv.y.squaredNorm());
  EXPECT_LE(err, 1e-5 * scale);
}

TEST(BurerMonteiro, ZeroOptimumCollapses) {
  ProblemInstance inst = small_gaussian(14);
  inst.lambda = 1.5 * operator_norm(inst.op.adjoint(inst.y));
  SolverConfig cfg;
  cfg.rank = 3;
  cfg.max_iters = 20000;
  const SolveReport rep = solve_burer_monteiro(inst, cfg);
  EXPECT_EQ(rep.status, SolveStatus::Converged);
  EXPECT_LE(rep.final_matrix.norm(), 1e-6);
}

TEST(BurerMonteiro, MatchesIstaSolution) {
  const ProblemInstance inst = small_gaussian(15);
  SolverConfig cfg;
  cfg.fixpoint_tol = 1e-12;
  cfg.max_iters = 20000;
  const Matrix mhat = solve_ista(inst, cfg).final_matrix;
  for (std::uint64_t s = 0; s < 3; ++s) {
    SolverConfig bc;
    bc.rank = 3;
    bc.seed = s;
    bc.max_iters = 20000;
    const SolveReport rep = solve_burer_monteiro(inst, bc, mhat);
    EXPECT_EQ(rep.status, SolveStatus::Converged);
    EXPECT_LE(rel_diff(rep.final_matrix, mhat), 1e-4);
    ASSERT_TRUE(rep.factored.has_value());
    EXPECT_EQ(rep.factored->x.cols(), 3);
  }
}

TEST(BurerMonteiro, SeedDeterminism) {
  const ProblemInstance inst = small_gaussian(16);
  SolverConfig cfg;
  cfg.rank = 2;
  cfg.seed = 9;
  const SolveReport a = solve_burer_monteiro(inst, cfg), b = solve_burer_monteiro(inst, cfg);
  EXPECT_EQ(a.final_matrix, b.final_matrix);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Criticality, ZeroOptimum) {
  ProblemInstance inst = small_gaussian(17);
  inst.lambda = 1.5 * operator_norm(inst.op.adjoint(inst.y));
  const CriticalityReport c = certify_criticality(inst, Matrix::Zero(12, 2), Matrix::Zero(10, 2));
  EXPECT_EQ(c.grad_norm_x, 0.0);
  EXPECT_EQ(c.grad_norm_y, 0.0);
  // At the origin the Hessian is [[lam, -R], [-R^T, lam]] with R = A^*(y),
  // so its smallest eigenvalue is lam - ||A^*(y)||_op > 0.
  const double expect = inst.lambda - operator_norm(inst.op.adjoint(inst.y));
  EXPECT_NEAR(c.min_hess_eig, expect, 1e-8);
  EXPECT_TRUE(c.is_second_order);
}

TEST(Criticality, RandomPointIsNotCritical) {
  const ProblemInstance inst = small_gaussian(18);
  const CriticalityReport c = certify_criticality(inst, gaussian(12, 2, 1), gaussian(10, 2, 2));
  EXPECT_GT(std::max(c.grad_norm_x, c.grad_norm_y), 1e-2);
  EXPECT_FALSE(c.is_second_order);
}

TEST(Criticality, LanczosMatchesDenseHessian) {
  const ProblemInstance inst = small_gaussian(19);
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Matrix x = 0.3 * gaussian(12, 2, 50 + s), y = 0.3 * gaussian(10, 2, 60 + s);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dense_hessian(inst, x, y));
    const double oracle = eig.eigenvalues()(0);
    const CriticalityReport lz = certify_criticality(inst, x, y);
    EXPECT_EQ(lz.method, HessianMethod::Lanczos);
    EXPECT_NEAR(lz.min_hess_eig, oracle, 1e-8 * std::max(1.0, std::abs(oracle)));
    CriticalityOptions po;
    po.force_power = true;
    po.max_power_iters = 200000;
    const CriticalityReport pw = certify_criticality(inst, x, y, po);
    EXPECT_EQ(pw.method, HessianMethod::Power);
    EXPECT_NEAR(pw.min_hess_eig, oracle, 1e-4 * std::max(1.0, std::abs(oracle)));
  }
}

TEST(Criticality, CertifiesBurerMonteiroSolution) {
  const ProblemInstance inst = small_gaussian(20);
  SolverConfig cfg;
  cfg.rank = 3;
  cfg.max_iters = 20000;
  const SolveReport rep = solve_burer_monteiro(inst, cfg);
  const CriticalityReport c = certify_criticality(inst, rep.factored->x, rep.factored->y);
  EXPECT_TRUE(c.is_second_order);
  EXPECT_GE(c.min_hess_eig, -1e-6);
}

TEST(Reports, JsonKeys) {
  const ProblemInstance inst = small_gaussian(21);
  SolverConfig cfg;
  cfg.rank = 2;
  const auto j = to_json(solve_burer_monteiro(inst, cfg));
  for (const char* key : {"d1", "d2", "matrix", "status", "iterations", "stepsize", "factored"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["matrix"].size(), 120u);
  EXPECT_EQ(to_string(SolveStatus::NumericalFailure), "numerical_failure");
}
