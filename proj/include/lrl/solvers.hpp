#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lrl/certificate.hpp"
#include "lrl/sensing.hpp"

namespace lrl {

struct SolverConfig {
  int max_iters = 5000;
  /// Fixed stepsize; nullopt selects the solver's automatic rule.
  std::optional<double> stepsize;
  double fixpoint_tol = 1e-10;
  double grad_tol = 1e-8;
  double rank_tol = kDefaultRankTol;
  /// Rank bound r for PPGD and Burer-Monteiro; must be absent for ISTA.
  std::optional<Index> rank;
  /// Seeds the Burer-Monteiro initialization and the RIP sampling behind the
  /// automatic PPGD stepsize.
  std::uint64_t seed = 0;
  int rip_samples = 200;
};

enum class SolveStatus { Converged, MaxIters, NumericalFailure };
std::string_view to_string(SolveStatus status);

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double fixpoint_residual = 0.0;
  std::optional<double> grad_norm;
  Index rank_estimate = 0;
  std::optional<double> dist_to_ref;
};

struct Factors {
  Matrix x;
  Matrix y;
};

struct SolveReport {
  Matrix final_matrix;
  std::optional<Factors> factored;
  std::vector<TraceRow> trace;
  SolveStatus status = SolveStatus::MaxIters;
  int iterations = 0;
  double stepsize = 0.0;
  double wall_time = 0.0;
  /// Zero-subgradient check of the final iterate (ISTA, on convergence).
  std::optional<MembershipResult> optimality;
};

/// 0.5 ||y - A(M)||^2 + lambda ||M||_*.
double objective(const ProblemInstance& inst, const Matrix& m);

/// 1 / ||A||_op^2 with the norm from 50 power iterations on A^* A.
double ista_auto_stepsize(const ProblemInstance& inst);

/// 1 / (1 + delta_lower(2r)) clamped to (3/4, 1].
double ppgd_auto_stepsize(const ProblemInstance& inst, Index r, int rip_samples,
                          std::uint64_t seed);

/// Proximal gradient with full singular value soft-thresholding. Starts from
/// m0 (zero by default). cfg.rank must be empty.
SolveReport solve_ista(const ProblemInstance& inst, const SolverConfig& cfg,
                       const std::optional<Matrix>& m0 = std::nullopt,
                       const std::optional<Matrix>& reference = std::nullopt);

/// M_{t+1} = P_{r, eta lambda}(M_t + eta A^*(y - A(M_t))), run through
/// constrained_prox_descent. rank(m0) must be <= r.
SolveReport solve_ppgd(const ProblemInstance& inst, const SolverConfig& cfg, const Matrix& m0,
                       const std::optional<Matrix>& reference = std::nullopt);

/// g(X, Y) = 0.5 ||y - A(X Y^T)||^2 + (lambda / 2) (||X||_F^2 + ||Y||_F^2).
double bm_objective(const ProblemInstance& inst, const Matrix& x, const Matrix& y);
Factors bm_gradient(const ProblemInstance& inst, const Matrix& x, const Matrix& y);
/// Hessian of g at (x, y) applied to the direction (dx, dy).
Factors bm_hessian_vector(const ProblemInstance& inst, const Matrix& x, const Matrix& y,
                          const Matrix& dx, const Matrix& dy);

/// Gradient descent on g with Armijo backtracking (c = 1e-4, halving, at most
/// 60 halvings). X, Y start i.i.d. N(0, 1 / (d r)), d = max(d1, d2), drawn from
/// cfg.seed. Stops when max(||grad_X||, ||grad_Y||) <= grad_tol * (1 + g).
SolveReport solve_burer_monteiro(const ProblemInstance& inst, const SolverConfig& cfg,
                                 const std::optional<Matrix>& reference = std::nullopt);

enum class HessianMethod { Lanczos, Power };
std::string_view to_string(HessianMethod method);

struct CriticalityOptions {
  double grad_tol = 1e-8;
  double hess_tol = 1e-6;
  /// Lanczos step cap; defaults to the problem dimension (d1 + d2) r.
  std::optional<int> max_lanczos;
  std::uint64_t seed = 0;
  /// Skip Lanczos and go straight to the power-iteration fallback.
  bool force_power = false;
  int max_power_iters = 20000;
};

struct CriticalityReport {
  double grad_norm_x = 0.0;
  double grad_norm_y = 0.0;
  double min_hess_eig = 0.0;
  int lanczos_iters = 0;
  HessianMethod method = HessianMethod::Lanczos;
  double objective = 0.0;
  bool is_second_order = false;
};

/// Gradient norms and the smallest Hessian eigenvalue of g at (x, y). The
/// eigenvalue comes from Lanczos with full reorthogonalization on analytic
/// Hessian-vector products; if Lanczos breaks down without a converged Ritz
/// pair, power iteration on (c I - H) takes over, c an estimate of ||H||.
CriticalityReport certify_criticality(const ProblemInstance& inst, const Matrix& x,
                                      const Matrix& y, const CriticalityOptions& opts = {});

nlohmann::json to_json(const SolveReport& report);
nlohmann::json to_json(const CriticalityReport& report);

}  // namespace lrl
