#include "lrl/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrl/linalg.hpp"
#include "lrl/rng.hpp"

namespace lrl {

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Gaussian: return "gaussian";
    case OperatorKind::Identity: return "identity";
    case OperatorKind::Explicit: return "explicit";
  }
  return "unknown";
}

OperatorKind operator_kind_from_string(std::string_view name) {
  if (name == "gaussian") return OperatorKind::Gaussian;
  if (name == "identity") return OperatorKind::Identity;
  if (name == "explicit") return OperatorKind::Explicit;
  throw ValidationError("unknown operator kind '" + std::string(name) + "'");
}

SensingOperator SensingOperator::gaussian(Index d1, Index d2, Index n, std::uint64_t seed) {
  if (d1 < 1 || d2 < 1) throw ValidationError("gaussian_ensemble: dimensions must be positive");
  if (n < 1) throw ValidationError("gaussian_ensemble: need at least one measurement");
  Rng rng(seed);
  auto design = std::make_shared<Matrix>(
      rng.normal_matrix(n, d1 * d2, 1.0 / std::sqrt(static_cast<double>(n))));
  return {OperatorKind::Gaussian, d1, d2, n, seed, std::move(design)};
}

SensingOperator SensingOperator::identity(Index d1, Index d2) {
  if (d1 < 1 || d2 < 1) throw ValidationError("identity operator: dimensions must be positive");
  return {OperatorKind::Identity, d1, d2, d1 * d2, std::nullopt, nullptr};
}

SensingOperator SensingOperator::from_matrices(std::span<const Matrix> matrices) {
  if (matrices.empty()) throw ValidationError("explicit operator: need at least one matrix");
  const Index d1 = matrices.front().rows();
  const Index d2 = matrices.front().cols();
  Matrix design(static_cast<Index>(matrices.size()), d1 * d2);
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    if (matrices[i].rows() != d1 || matrices[i].cols() != d2)
      throw ValidationError("explicit operator: sensing matrix " + std::to_string(i) +
                            " has the wrong shape");
    design.row(static_cast<Index>(i)) = flatten(matrices[i]).transpose();
  }
  return from_design(d1, d2, std::move(design));
}

SensingOperator SensingOperator::from_design(Index d1, Index d2, Matrix design) {
  if (d1 < 1 || d2 < 1) throw ValidationError("explicit operator: dimensions must be positive");
  if (design.cols() != d1 * d2 || design.rows() < 1)
    throw ValidationError("explicit operator: design must be n x (d1*d2) with n >= 1");
  if (!design.allFinite()) throw ValidationError("explicit operator: non-finite entries");
  const Index n = design.rows();
  return {OperatorKind::Explicit, d1, d2, n, std::nullopt,
          std::make_shared<const Matrix>(std::move(design))};
}

Vector SensingOperator::apply(const Matrix& m) const {
  if (m.rows() != d1_ || m.cols() != d2_)
    throw ValidationError("apply: matrix is " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", operator expects " +
                          std::to_string(d1_) + "x" + std::to_string(d2_));
  if (kind_ == OperatorKind::Identity) return flatten(m);
  // Row-major vec(M) is the column-major storage of M^T.
  const Matrix mt = m.transpose();
  return *design_ * Eigen::Map<const Vector>(mt.data(), mt.size());
}

Matrix SensingOperator::adjoint(const Vector& v) const {
  if (v.size() != n_)
    throw ValidationError("adjoint: vector has " + std::to_string(v.size()) +
                          " entries, operator has " + std::to_string(n_) + " measurements");
  if (kind_ == OperatorKind::Identity) return unflatten(v, d1_, d2_);
  const Vector flat = design_->transpose() * v;
  return Eigen::Map<const Matrix>(flat.data(), d2_, d1_).transpose();
}

Matrix SensingOperator::sensing_matrix(Index i) const {
  if (i < 0 || i >= n_) throw ValidationError("sensing_matrix: index out of range");
  if (kind_ == OperatorKind::Identity) {
    Matrix e = Matrix::Zero(d1_, d2_);
    e(i / d2_, i % d2_) = 1.0;
    return e;
  }
  return unflatten(design_->row(i).transpose(), d1_, d2_);
}

SensingOperator SensingOperator::scaled(double c) const {
  if (kind_ == OperatorKind::Identity)
    return from_design(d1_, d2_, c * Matrix::Identity(n_, n_));
  return from_design(d1_, d2_, c * *design_);
}

double SensingOperator::norm_estimate(int iters, std::uint64_t seed) const {
  if (kind_ == OperatorKind::Identity) return 1.0;
  return power_operator_norm(*design_, seed, iters, 0.0);
}

const Matrix& SensingOperator::design() const {
  static const Matrix empty;
  return design_ ? *design_ : empty;
}

void validate(const ProblemInstance& inst) {
  if (inst.y.size() != inst.op.measurement_count())
    throw ValidationError("problem: y has " + std::to_string(inst.y.size()) +
                          " entries but the operator has n = " +
                          std::to_string(inst.op.measurement_count()));
  if (!(inst.lambda > 0.0) || !std::isfinite(inst.lambda))
    throw ValidationError("problem: lambda must be positive and finite");
  if (!inst.y.allFinite()) throw ValidationError("problem: y has non-finite entries");
  if (inst.ground_truth) {
    const GroundTruth& gt = *inst.ground_truth;
    if (gt.m_star.rows() != inst.op.rows() || gt.m_star.cols() != inst.op.cols())
      throw ValidationError("problem: ground-truth matrix has the wrong shape");
    if (gt.xi.size() != inst.op.measurement_count())
      throw ValidationError("problem: noise vector has the wrong length");
  }
}

namespace {

// Draws rank-one terms of L * R one at a time and reports every prefix sum.
template <class Visit>
void for_each_prefix_sample(Index d1, Index d2, Index r, std::uint64_t seed, Visit&& visit) {
  Rng rng(seed);
  Matrix acc = Matrix::Zero(d1, d2);
  for (Index q = 0; q < r; ++q) {
    const Vector col = rng.normal_vector(d1);
    const Vector row = rng.normal_vector(d2);
    acc.noalias() += col * row.transpose();
    const double fro = acc.norm();
    if (fro > 0.0) visit(q + 1, Matrix(acc / fro));
  }
}

}  // namespace

Matrix random_low_rank(Index d1, Index d2, Index r, std::uint64_t seed) {
  if (r < 0 || r > std::min(d1, d2)) throw ValidationError("random_low_rank: bad rank");
  Matrix out = Matrix::Zero(d1, d2);
  for_each_prefix_sample(d1, d2, r, seed, [&](Index q, Matrix m) {
    if (q == r) out = std::move(m);
  });
  return out;
}

RipEstimate estimate_rip(const SensingOperator& op, Index r, int samples, std::uint64_t seed) {
  if (r < 1 || r > std::min(op.rows(), op.cols()))
    throw ValidationError("estimate_rip: rank must be in [1, min(d1, d2)]");
  if (samples < 1) throw ValidationError("estimate_rip: need at least one sample");
  RipEstimate est;
  est.rank = r;
  est.samples = samples;
  est.max_ratio = -std::numeric_limits<double>::infinity();
  est.min_ratio = std::numeric_limits<double>::infinity();
  for (int j = 0; j < samples; ++j) {
    for_each_prefix_sample(op.rows(), op.cols(), r, derive_seed(seed, static_cast<std::uint64_t>(j)),
                           [&](Index, const Matrix& m) {
                             const double ratio =
                                 op.kind() == OperatorKind::Identity
                                     ? 1.0
                                     : op.apply(m).squaredNorm() / m.squaredNorm();
                             est.max_ratio = std::max(est.max_ratio, ratio);
                             est.min_ratio = std::min(est.min_ratio, ratio);
                           });
  }
  est.delta_lower = std::max({est.max_ratio - 1.0, 1.0 - est.min_ratio, 0.0});
  return est;
}

double adjoint_operator_norm(const SensingOperator& op, const Vector& v, std::uint64_t seed) {
  return power_operator_norm(op.adjoint(v), seed, 200, 1e-10);
}

ProblemInstance generate_instance(const InstanceSpec& spec) {
  if (spec.d1 < 1 || spec.d2 < 1) throw ValidationError("generate: dimensions must be positive");
  if (spec.r_star < 0 || spec.r_star > std::min(spec.d1, spec.d2))
    throw ValidationError("generate: r_star = " + std::to_string(spec.r_star) +
                          " exceeds min(d1, d2) = " + std::to_string(std::min(spec.d1, spec.d2)));
  if (static_cast<Index>(spec.spectrum.size()) != spec.r_star)
    throw ValidationError("generate: spectrum must have exactly r_star entries");
  for (double s : spec.spectrum)
    if (!(s > 0.0) || !std::isfinite(s))
      throw ValidationError("generate: spectrum entries must be positive");
  if (!(spec.lambda > 0.0) || !std::isfinite(spec.lambda))
    throw ValidationError("generate: lambda must be positive");
  if (!(spec.noise_ratio >= 0.0) || !std::isfinite(spec.noise_ratio))
    throw ValidationError("generate: noise ratio must be nonnegative");

  SensingOperator op = [&] {
    switch (spec.operator_kind) {
      case OperatorKind::Gaussian:
        return SensingOperator::gaussian(spec.d1, spec.d2, spec.n, derive_seed(spec.seed, 0));
      case OperatorKind::Identity:
        if (spec.n != 0 && spec.n != spec.d1 * spec.d2)
          throw ValidationError("generate: identity operator requires n = d1*d2");
        return SensingOperator::identity(spec.d1, spec.d2);
      case OperatorKind::Explicit: break;
    }
    throw ValidationError("generate: explicit operators cannot be generated from a spec");
  }();

  GroundTruth gt;
  gt.m_star = Matrix::Zero(spec.d1, spec.d2);
  if (spec.r_star > 0) {
    Rng rng(derive_seed(spec.seed, 1));
    const Matrix gu = rng.normal_matrix(spec.d1, spec.r_star);
    const Matrix gv = rng.normal_matrix(spec.d2, spec.r_star);
    const Matrix u = Eigen::HouseholderQR<Matrix>(gu).householderQ() *
                     Matrix::Identity(spec.d1, spec.r_star);
    const Matrix v = Eigen::HouseholderQR<Matrix>(gv).householderQ() *
                     Matrix::Identity(spec.d2, spec.r_star);
    const Vector sigma = Eigen::Map<const Vector>(spec.spectrum.data(), spec.r_star);
    gt.m_star = u * sigma.asDiagonal() * v.transpose();
  }

  const Index n = op.measurement_count();
  gt.xi = Vector::Zero(n);
  if (spec.noise_ratio > 0.0) {
    Rng rng(derive_seed(spec.seed, 2));
    const Vector g = rng.normal_vector(n);
    const double size = adjoint_operator_norm(op, g, derive_seed(spec.seed, 3));
    if (!(size > 0.0)) throw NumericalError("generate: A^*(xi) vanished; cannot calibrate noise");
    gt.xi = g * (spec.noise_ratio * spec.lambda / size);
  }
  gt.r_star = numerical_rank(gt.m_star);

  ProblemInstance inst{op, op.apply(gt.m_star) + gt.xi, spec.lambda, std::move(gt)};
  return inst;
}

}  // namespace lrl
