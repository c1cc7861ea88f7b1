#include "lrl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrl/rng.hpp"

namespace lrl {

Svd svd(const Matrix& m) {
  if (!m.allFinite()) throw NumericalError("svd: input has non-finite entries");
  Eigen::JacobiSVD<Matrix> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success)
    throw NumericalError("svd: Jacobi iteration did not converge");
  Svd out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  if (!out.left.allFinite() || !out.right.allFinite() || !out.singvals.allFinite())
    throw NumericalError("svd: non-finite factors");
  return out;
}

Thresholded soft_hard_threshold_with_spectrum(const Matrix& m, Index r, double alpha) {
  if (r < 1) throw ValidationError("soft_hard_threshold: rank must be >= 1");
  if (!(alpha >= 0.0)) throw ValidationError("soft_hard_threshold: alpha must be >= 0");
  const Svd s = svd(m);
  const Index keep = std::min<Index>(r, s.singvals.size());
  Vector shrunk = (s.singvals.head(keep).array() - alpha).cwiseMax(0.0).matrix();
  Thresholded out;
  out.matrix = s.left.leftCols(keep) * shrunk.asDiagonal() * s.right.leftCols(keep).transpose();
  out.kept_singvals = std::move(shrunk);
  return out;
}

Matrix soft_hard_threshold(const Matrix& m, Index r, double alpha) {
  return soft_hard_threshold_with_spectrum(m, r, alpha).matrix;
}

Matrix soft_threshold(const Matrix& m, double alpha) {
  return soft_hard_threshold(m, std::max<Index>(1, std::min(m.rows(), m.cols())), alpha);
}

IdealSolution ideal_solution(const Matrix& m_star, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("ideal_solution: lambda must be > 0");
  const Svd s = svd(m_star);
  const Vector shrunk = (s.singvals.array() - lambda).cwiseMax(0.0).matrix();
  const Vector capped = s.singvals.cwiseMin(lambda) / lambda;
  return {s.left * shrunk.asDiagonal() * s.right.transpose(),
          s.left * capped.asDiagonal() * s.right.transpose()};
}

BlockDecomposition block_decompose(const Matrix& m, Index r) {
  if (r < 1) throw ValidationError("block_decompose: block rank must be >= 1");
  BlockDecomposition out;
  out.block_rank = r;
  const Svd s = svd(m);
  if (s.singvals.size() == 0 || s.singvals(0) == 0.0) return out;
  const double floor = std::numeric_limits<double>::epsilon() *
                       static_cast<double>(std::max(m.rows(), m.cols())) * s.singvals(0);
  Index significant = 0;
  while (significant < s.singvals.size() && s.singvals(significant) > floor) ++significant;
  for (Index start = 0; start < significant; start += r) {
    const Index len = std::min(r, significant - start);
    out.blocks.push_back(s.left.middleCols(start, len) *
                         s.singvals.segment(start, len).asDiagonal() *
                         s.right.middleCols(start, len).transpose());
  }
  return out;
}

namespace {

void require_orthonormal(const Matrix& q, const char* name) {
  const Matrix gram = q.transpose() * q;
  const double err = (gram - Matrix::Identity(q.cols(), q.cols())).norm();
  if (!(err <= 1e-8))
    throw ValidationError(std::string("t_subspace_projections: ") + name +
                          " does not have orthonormal columns (||Q^T Q - I||_F = " +
                          std::to_string(err) + ")");
}

}  // namespace

TangentSplit t_subspace_projections(const Matrix& u, const Matrix& v, const Matrix& m) {
  if (u.rows() != m.rows() || v.rows() != m.cols())
    throw ValidationError("t_subspace_projections: basis rows do not match the matrix shape");
  if (u.cols() != v.cols())
    throw ValidationError("t_subspace_projections: U and V must have the same column count");
  require_orthonormal(u, "U");
  require_orthonormal(v, "V");
  const Matrix left_removed = m - u * (u.transpose() * m);
  Matrix normal = left_removed - (left_removed * v) * v.transpose();
  Matrix in_tangent = m - normal;
  return {std::move(in_tangent), std::move(normal)};
}

Index numerical_rank_of_spectrum(const Vector& singvals, double rel_tol) {
  if (singvals.size() == 0) return 0;
  const double top = singvals.maxCoeff();
  if (top <= 0.0) return 0;
  return (singvals.array() > rel_tol * top).count();
}

Index numerical_rank(const Matrix& m, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw ValidationError("numerical_rank: rel_tol must lie in (0, 1)");
  if (m.size() == 0) return 0;
  return numerical_rank_of_spectrum(svd(m).singvals, rel_tol);
}

double nuclear_norm(const Matrix& m) {
  return m.size() == 0 ? 0.0 : svd(m).singvals.sum();
}

double operator_norm(const Matrix& m) {
  return m.size() == 0 ? 0.0 : svd(m).singvals(0);
}

double inner(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).sum();
}

double power_operator_norm(const Matrix& m, std::uint64_t seed, int max_iters, double rel_tol) {
  if (m.size() == 0) return 0.0;
  Rng rng(seed);
  Vector v = rng.normal_vector(m.cols());
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Vector u = m * v;
    const double next = u.norm();
    if (next == 0.0) return 0.0;
    Vector w = m.transpose() * u;
    const double wn = w.norm();
    if (wn == 0.0) return next;
    v = w / wn;
    const bool done = it > 0 && std::abs(next - estimate) <= rel_tol * next;
    estimate = next;
    if (done) break;
  }
  return estimate;
}

Vector flatten(const Matrix& m) {
  Vector out(m.size());
  Index k = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out(k++) = m(i, j);
  return out;
}

Matrix unflatten(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols)
    throw ValidationError("unflatten: expected " + std::to_string(rows * cols) + " entries, got " +
                          std::to_string(v.size()));
  Matrix out(rows, cols);
  Index k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = v(k++);
  return out;
}

Vector factored_singular_values(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols())
    throw ValidationError("factored_singular_values: factor widths differ");
  if (x.cols() == 0) return Vector();
  Eigen::HouseholderQR<Matrix> qx(x), qy(y);
  const Index kx = std::min(x.rows(), x.cols());
  const Index ky = std::min(y.rows(), y.cols());
  const Matrix rx = qx.matrixQR().topRows(kx).triangularView<Eigen::Upper>();
  const Matrix ry = qy.matrixQR().topRows(ky).triangularView<Eigen::Upper>();
  return svd(rx * ry.transpose()).singvals;
}

}  // namespace lrl
