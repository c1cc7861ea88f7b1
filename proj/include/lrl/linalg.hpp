#pragma once

#include <cstdint>
#include <vector>

#include "lrl/types.hpp"

namespace lrl {

/// Thin SVD: source = left * diag(singvals) * right^T with k = min(d1, d2).
struct Svd {
  Matrix left;      // d1 x k, orthonormal columns
  Vector singvals;  // nonincreasing, nonnegative
  Matrix right;     // d2 x k, orthonormal columns
};

/// Dense thin SVD (one-sided Jacobi). Throws NumericalError on non-finite
/// input or output.
Svd svd(const Matrix& m);

/// Result of a singular value thresholding step together with the
/// singular values that survived it.
struct Thresholded {
  Matrix matrix;
  /// Shrunk singular values (sigma_i - alpha)_+, i < min(r, k). Zeros are kept.
  Vector kept_singvals;
};

/// Soft-threshold the singular values of m by alpha, then keep only the top r.
/// Ties at the cut keep the first r in the SVD's order.
Thresholded soft_hard_threshold_with_spectrum(const Matrix& m, Index r, double alpha);

Matrix soft_hard_threshold(const Matrix& m, Index r, double alpha);

/// Plain singular value soft-thresholding: the prox of alpha * ||.||_*.
Matrix soft_threshold(const Matrix& m, double alpha);

/// Denoising solution of min 0.5 ||M - M*||_F^2 + lambda ||M||_* and the
/// matching subgradient, with M* = m_lambda + lambda * e_lambda.
struct IdealSolution {
  Matrix m_lambda;
  Matrix e_lambda;
};

IdealSolution ideal_solution(const Matrix& m_star, double lambda);

/// Partition of a matrix into pairwise orthogonal pieces of rank <= block_rank,
/// obtained by grouping consecutive singular triplets.
struct BlockDecomposition {
  std::vector<Matrix> blocks;
  Index block_rank = 1;
};

/// Singular values below machine precision (relative to sigma_1, scaled by
/// max(d1, d2)) are treated as zero and generate no blocks; the zero matrix
/// decomposes into an empty list.
BlockDecomposition block_decompose(const Matrix& m, Index r);

/// Split m = in_tangent + normal for the subspace
/// T = { U A^T + B V^T } spanned by orthonormal U (d1 x r) and V (d2 x r).
struct TangentSplit {
  Matrix in_tangent;  // P_T(m)
  Matrix normal;      // P_T-perp(m) = (I - UU^T) m (I - VV^T)
};

/// Throws ValidationError if u or v lacks orthonormal columns (tolerance 1e-8)
/// or the shapes disagree. Zero-column u, v are allowed.
TangentSplit t_subspace_projections(const Matrix& u, const Matrix& v, const Matrix& m);

/// Number of singular values strictly greater than rel_tol * sigma_1; 0 for
/// the zero matrix.
Index numerical_rank(const Matrix& m, double rel_tol = kDefaultRankTol);
Index numerical_rank_of_spectrum(const Vector& singvals, double rel_tol = kDefaultRankTol);

double nuclear_norm(const Matrix& m);
double operator_norm(const Matrix& m);

/// Trace inner product <a, b> = tr(a^T b).
double inner(const Matrix& a, const Matrix& b);

/// Largest singular value by power iteration on m^T m. Starts from a unit
/// vector drawn from `seed`; stops after max_iters or when the estimate
/// changes by less than rel_tol relative.
double power_operator_norm(const Matrix& m, std::uint64_t seed, int max_iters = 200,
                           double rel_tol = 1e-10);

/// Row-major vectorization and its inverse.
Vector flatten(const Matrix& m);
Matrix unflatten(const Vector& v, Index rows, Index cols);

/// Singular values of x * y^T computed through thin QR factors of x and y.
Vector factored_singular_values(const Matrix& x, const Matrix& y);

}  // namespace lrl
