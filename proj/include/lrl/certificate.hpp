#pragma once

#include <cstdint>

#include "json.hpp"
#include "lrl/sensing.hpp"

namespace lrl {

/// E_hat = (1/lambda) A^*(y - A(M_hat)); M_hat solves the LASSO iff E_hat is a
/// subgradient of the nuclear norm at M_hat.
Matrix compute_ehat(const ProblemInstance& inst, const Matrix& mhat);

/// Membership test for E in the nuclear-norm subdifferential at M_hat, which
/// is { U V^T + W : U^T W = 0, W V = 0, ||W||_op <= 1 } for the compact SVD
/// M_hat = U S V^T.
struct MembershipResult {
  bool is_member = false;
  /// ||U^T E V - I||_F
  double uv_residual = 0.0;
  /// ||(I - UU^T) E (I - VV^T)||_op
  double w_op_norm = 0.0;
  /// max(||U^T E (I - VV^T)||_F, ||(I - UU^T) E V||_F)
  double ortho_residual = 0.0;
  Index rank = 0;
};

/// U, V come from the SVD of mhat truncated at rank_tol. is_member holds when
/// uv_residual <= cert_tol * sqrt(rank), ortho_residual <= cert_tol and
/// w_op_norm <= 1 + cert_tol. For rank 0 this reduces to ||E||_op <= 1 + cert_tol.
MembershipResult subgradient_membership(const Matrix& mhat, const Matrix& e, double cert_tol = 1e-6,
                                        double rank_tol = kDefaultRankTol);

struct CertificateOptions {
  int rip_samples = 200;
  std::uint64_t rip_seed = 0;
  /// Census threshold is sigma >= 1 - cert_tol; the membership test runs with
  /// cert_tol * (1 + ||E_hat||_op).
  double cert_tol = 1e-6;
  double rank_tol = kDefaultRankTol;
};

struct CertificateReport {
  Matrix ehat;
  Vector singvals_ehat;
  Index count_ge1 = 0;
  MembershipResult membership;
  /// Sampled RIP lower bound at rank 2 r*; stands in for delta*.
  double delta_lower = 0.0;
  /// ||A^*(xi)||_op / lambda.
  double noise_ratio = 0.0;
  double condition_value = 0.0;
  bool condition_satisfied = false;
  /// Always true: delta_lower is a sampled proxy, so the condition check is
  /// diagnostic rather than a certificate.
  bool diagnostic = true;
  Index r_star = 0;
  Index theorem_rank_cap = 0;
  Index rank_mhat = 0;
  Index rank_e_lambda = 0;
  /// Number of singular values of E_hat - E_lambda that are >= 1 - cert_tol.
  Index k_diagnostic = 0;
  Matrix e_lambda;
};

/// Rank cap floor((1 + 25 c^2) r*) for condition value c.
Index theorem_rank_cap(double condition_value, Index r_star);

/// Requires ground truth; throws ValidationError otherwise.
CertificateReport verify_theorem1(const ProblemInstance& inst, const Matrix& mhat,
                                  const CertificateOptions& opts = {});

nlohmann::json to_json(const CertificateReport& report, bool include_matrices = false);
nlohmann::json to_json(const MembershipResult& m);

struct PolarizationResult {
  /// max |<A(M1), A(M2)> - <M1, M2>| over the sampled pairs.
  double max_deviation = 0.0;
  /// max | ||A(S)||^2 / ||S||_F^2 - 1 | over S = M1 +- M2 of the same pairs:
  /// a RIP lower bound at rank 2r computed on shared samples. Polarization
  /// gives max_deviation <= shared_delta_lower up to rounding.
  double shared_delta_lower = 0.0;
  Index rank = 0;
  int trials = 0;
};

/// Pair t draws M1 = random_low_rank(d1, d2, r, derive_seed(seed, 2t)) and
/// M2 = random_low_rank(d1, d2, r, derive_seed(seed, 2t + 1)).
PolarizationResult polarization_check(const SensingOperator& op, Index r, int trials,
                                      std::uint64_t seed);

}  // namespace lrl
