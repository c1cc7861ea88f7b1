#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lrl/types.hpp"

namespace lrl {

enum class OperatorKind { Gaussian, Identity, Explicit };

std::string_view to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(std::string_view name);

/// Linear map A: R^{d1 x d2} -> R^n, A(M)_i = <A_i, M>.
///
/// Gaussian and explicit operators hold an n x (d1*d2) design matrix whose
/// i-th row is the row-major vectorization of A_i. The design is shared
/// between copies and never mutated, so operators are cheap to copy and safe
/// to use from several threads. The identity operator has no design and maps
/// M to its row-major vectorization.
class SensingOperator {
 public:
  /// n matrices with i.i.d. N(0, 1/n) entries, so E||A(M)||^2 = ||M||_F^2.
  /// Entries are drawn from Rng(seed) in order A_1, ..., A_n, each row by row.
  static SensingOperator gaussian(Index d1, Index d2, Index n, std::uint64_t seed);
  static SensingOperator identity(Index d1, Index d2);
  static SensingOperator from_matrices(std::span<const Matrix> matrices);
  static SensingOperator from_design(Index d1, Index d2, Matrix design);

  OperatorKind kind() const { return kind_; }
  Index rows() const { return d1_; }
  Index cols() const { return d2_; }
  Index measurement_count() const { return n_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  Vector apply(const Matrix& m) const;
  Matrix adjoint(const Vector& v) const;

  /// The i-th sensing matrix A_i.
  Matrix sensing_matrix(Index i) const;

  /// Explicit operator c * A.
  SensingOperator scaled(double c) const;

  /// Operator norm of A (as a map on vec(M)), by power iteration on A^* A.
  double norm_estimate(int iters, std::uint64_t seed) const;

  /// The design matrix; empty for the identity operator.
  const Matrix& design() const;

 private:
  SensingOperator(OperatorKind kind, Index d1, Index d2, Index n,
                  std::optional<std::uint64_t> seed, std::shared_ptr<const Matrix> design)
      : kind_(kind), d1_(d1), d2_(d2), n_(n), seed_(seed), design_(std::move(design)) {}

  OperatorKind kind_;
  Index d1_;
  Index d2_;
  Index n_;
  std::optional<std::uint64_t> seed_;
  std::shared_ptr<const Matrix> design_;
};

struct GroundTruth {
  Matrix m_star;
  Vector xi;
  Index r_star = 0;
};

/// Measurements y = A(M*) + xi with the penalty weight lambda.
struct ProblemInstance {
  SensingOperator op;
  Vector y;
  double lambda = 1.0;
  std::optional<GroundTruth> ground_truth;
};

/// Throws ValidationError if shapes or lambda are inconsistent.
void validate(const ProblemInstance& inst);

/// Sampled lower bound on the restricted isometry constant delta_r.
struct RipEstimate {
  Index rank = 0;
  int samples = 0;
  double delta_lower = 0.0;
  double max_ratio = 1.0;
  double min_ratio = 1.0;
};

/// Draws `samples` random rank-r matrices L * R (Gaussian d1 x r and r x d2
/// factors) and records the extremes of ||A(M)||^2 / ||M||_F^2.
///
/// Sample j uses the stream derive_seed(seed, j) and draws the factors one
/// rank-one term at a time (column q of L, then row q of R). Every prefix
/// L[:, :q] R[:q, :], q = 1..r, is also evaluated, so the sample set for rank
/// r is contained in the one for any r' > r under the same seed and the
/// estimate is monotone in r.
RipEstimate estimate_rip(const SensingOperator& op, Index r, int samples, std::uint64_t seed);

/// Random rank-r matrix with unit Frobenius norm (product of Gaussian factors).
Matrix random_low_rank(Index d1, Index d2, Index r, std::uint64_t seed);

struct InstanceSpec {
  Index d1 = 0;
  Index d2 = 0;
  Index r_star = 0;
  std::vector<double> spectrum;
  Index n = 0;
  double lambda = 1.0;
  /// Target ||A^*(xi)||_op / lambda.
  double noise_ratio = 0.0;
  std::uint64_t seed = 0;
  OperatorKind operator_kind = OperatorKind::Gaussian;
};

/// M* = U diag(spectrum) V^T with U, V from QR of Gaussian matrices, and xi a
/// Gaussian vector rescaled so that ||A^*(xi)||_op = noise_ratio * lambda.
/// Sub-streams of spec.seed: 0 operator, 1 factors, 2 noise, 3 power-iteration
/// start.
ProblemInstance generate_instance(const InstanceSpec& spec);

/// Power-iteration estimate of ||A^*(v)||_op with the configured defaults
/// (200 iterations, 1e-10 relative change).
double adjoint_operator_norm(const SensingOperator& op, const Vector& v, std::uint64_t seed);

}  // namespace lrl
