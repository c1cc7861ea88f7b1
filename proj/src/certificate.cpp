#include "lrl/certificate.hpp"

#include <algorithm>
#include <cmath>

#include "lrl/linalg.hpp"
#include "lrl/rng.hpp"

namespace lrl {

Matrix compute_ehat(const ProblemInstance& inst, const Matrix& mhat) {
  validate(inst);
  return inst.op.adjoint(inst.y - inst.op.apply(mhat)) / inst.lambda;
}

MembershipResult subgradient_membership(const Matrix& mhat, const Matrix& e, double cert_tol,
                                        double rank_tol) {
  if (mhat.rows() != e.rows() || mhat.cols() != e.cols())
    throw ValidationError("subgradient_membership: M_hat and E have different shapes");
  MembershipResult out;
  const Svd s = svd(mhat);
  out.rank = numerical_rank_of_spectrum(s.singvals, rank_tol);
  if (out.rank == 0) {
    out.w_op_norm = operator_norm(e);
    out.is_member = out.w_op_norm <= 1.0 + cert_tol;
    return out;
  }
  const Matrix u = s.left.leftCols(out.rank);
  const Matrix v = s.right.leftCols(out.rank);
  const Matrix ev = e * v;
  const Matrix ute = u.transpose() * e;
  const Matrix core = u.transpose() * ev;
  out.uv_residual = (core - Matrix::Identity(out.rank, out.rank)).norm();
  // U^T E (I - VV^T) and (I - UU^T) E V
  const Matrix row_part = ute - core * v.transpose();
  const Matrix col_part = ev - u * core;
  out.ortho_residual = std::max(row_part.norm(), col_part.norm());
  const Matrix w = e - u * ute - col_part * v.transpose();
  out.w_op_norm = operator_norm(w);
  out.is_member = out.uv_residual <= cert_tol * std::sqrt(static_cast<double>(out.rank)) &&
                  out.ortho_residual <= cert_tol && out.w_op_norm <= 1.0 + cert_tol;
  return out;
}

Index theorem_rank_cap(double condition_value, Index r_star) {
  return static_cast<Index>(
      std::floor((1.0 + 25.0 * condition_value * condition_value) * static_cast<double>(r_star)));
}

CertificateReport verify_theorem1(const ProblemInstance& inst, const Matrix& mhat,
                                  const CertificateOptions& opts) {
  validate(inst);
  if (!inst.ground_truth) throw ValidationError("verify: the problem has no ground truth");
  const GroundTruth& gt = *inst.ground_truth;
  CertificateReport rep;
  rep.ehat = compute_ehat(inst, mhat);
  rep.singvals_ehat = svd(rep.ehat).singvals;
  rep.count_ge1 = (rep.singvals_ehat.array() >= 1.0 - opts.cert_tol).count();
  const double ehat_norm = rep.singvals_ehat.size() > 0 ? rep.singvals_ehat(0) : 0.0;
  rep.membership =
      subgradient_membership(mhat, rep.ehat, opts.cert_tol * (1.0 + ehat_norm), opts.rank_tol);

  rep.r_star = gt.r_star;
  const Index max_rank = std::min(inst.op.rows(), inst.op.cols());
  if (gt.r_star > 0) {
    rep.delta_lower =
        estimate_rip(inst.op, std::min<Index>(2 * gt.r_star, max_rank), opts.rip_samples,
                     opts.rip_seed)
            .delta_lower;
  }
  rep.noise_ratio = operator_norm(inst.op.adjoint(gt.xi)) / inst.lambda;
  rep.condition_value = rep.delta_lower + rep.noise_ratio;
  rep.condition_satisfied = rep.condition_value <= 1.0 / 16.0;
  rep.theorem_rank_cap = theorem_rank_cap(rep.condition_value, gt.r_star);
  rep.rank_mhat = numerical_rank(mhat, opts.rank_tol);

  const IdealSolution ideal = ideal_solution(gt.m_star, inst.lambda);
  rep.e_lambda = ideal.e_lambda;
  rep.rank_e_lambda = numerical_rank(ideal.e_lambda, opts.rank_tol);
  const Vector diff_sv = svd(rep.ehat - ideal.e_lambda).singvals;
  rep.k_diagnostic = (diff_sv.array() >= 1.0 - opts.cert_tol).count();
  return rep;
}

nlohmann::json to_json(const MembershipResult& m) {
  return {{"is_member", m.is_member},
          {"uv_residual", m.uv_residual},
          {"w_op_norm", m.w_op_norm},
          {"ortho_residual", m.ortho_residual},
          {"rank", m.rank}};
}

nlohmann::json to_json(const CertificateReport& r, bool include_matrices) {
  nlohmann::json sv = nlohmann::json::array();
  for (Index i = 0; i < r.singvals_ehat.size(); ++i) sv.push_back(r.singvals_ehat(i));
  nlohmann::json doc = {{"singvals_ehat", std::move(sv)},
                        {"count_ge1", r.count_ge1},
                        {"membership", to_json(r.membership)},
                        {"delta_lower", r.delta_lower},
                        {"noise_ratio", r.noise_ratio},
                        {"condition_value", r.condition_value},
                        {"condition_satisfied", r.condition_satisfied},
                        {"diagnostic", r.diagnostic},
                        {"r_star", r.r_star},
                        {"theorem_rank_cap", r.theorem_rank_cap},
                        {"rank_mhat", r.rank_mhat},
                        {"rank_e_lambda", r.rank_e_lambda},
                        {"k_diagnostic", r.k_diagnostic}};
  if (include_matrices) {
    auto flat = [](const Matrix& m) {
      nlohmann::json a = nlohmann::json::array();
      for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
      return a;
    };
    doc["ehat"] = flat(r.ehat);
    doc["e_lambda"] = flat(r.e_lambda);
  }
  return doc;
}

PolarizationResult polarization_check(const SensingOperator& op, Index r, int trials,
                                      std::uint64_t seed) {
  if (r < 1 || 2 * r > std::min(op.rows(), op.cols()))
    throw ValidationError("polarization_check: need 1 <= r and 2r <= min(d1, d2)");
  if (trials < 1) throw ValidationError("polarization_check: need at least one trial");
  PolarizationResult out;
  out.rank = r;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const auto k = static_cast<std::uint64_t>(t);
    const Matrix m1 = random_low_rank(op.rows(), op.cols(), r, derive_seed(seed, 2 * k));
    const Matrix m2 = random_low_rank(op.rows(), op.cols(), r, derive_seed(seed, 2 * k + 1));
    const Vector a1 = op.apply(m1);
    const Vector a2 = op.apply(m2);
    out.max_deviation = std::max(out.max_deviation, std::abs(a1.dot(a2) - inner(m1, m2)));
    for (double sign : {1.0, -1.0}) {
      const double fro2 = (m1 + sign * m2).squaredNorm();
      if (fro2 == 0.0) continue;
      const double ratio = (a1 + sign * a2).squaredNorm() / fro2;
      out.shared_delta_lower = std::max(out.shared_delta_lower, std::abs(ratio - 1.0));
    }
  }
  return out;
}

}  // namespace lrl
