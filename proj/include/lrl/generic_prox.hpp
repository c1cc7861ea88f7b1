#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

namespace lrl {

/// min_{x in C} f(x) + h(x) with f smooth, h convex and a constrained
/// proximal map prox(z, eta) = argmin_{x in C} ||x - z||^2 / (2 eta) + h(x).
template <class Point>
struct CompositeProblem {
  std::function<double(const Point&)> smooth;
  std::function<Point(const Point&)> gradient;
  std::function<double(const Point&)> nonsmooth;
  std::function<Point(const Point&, double)> prox;
};

enum class ProxStatus { Converged, MaxIters, ObjectiveIncrease };

struct ProxConfig {
  double stepsize = 1.0;
  int max_iters = 1000;
  /// Stop when ||x_{t+1} - x_t|| / max(1, ||x_t||) <= fixpoint_tol.
  double fixpoint_tol = 1e-10;
  /// Abort when f + h grows by more than this relative amount in one step.
  double increase_tol = 1e-8;
};

template <class Point>
struct ProxResult {
  Point x;
  double objective = 0.0;
  int iterations = 0;
  ProxStatus status = ProxStatus::MaxIters;
};

/// Iterates x_{t+1} = prox(x_t - eta * grad f(x_t), eta). `on_step` is called
/// after every step with (t + 1, x_{t+1}, objective, fixpoint residual).
/// Point needs vector-space arithmetic and a `norm()` member (Eigen types).
template <class Point, class Observer>
ProxResult<Point> constrained_prox_descent(const CompositeProblem<Point>& problem, Point x0,
                                           const ProxConfig& cfg, Observer&& on_step) {
  ProxResult<Point> res;
  res.x = std::move(x0);
  res.objective = problem.smooth(res.x) + problem.nonsmooth(res.x);
  for (int t = 0; t < cfg.max_iters; ++t) {
    Point next = problem.prox(res.x - cfg.stepsize * problem.gradient(res.x), cfg.stepsize);
    const double obj = problem.smooth(next) + problem.nonsmooth(next);
    const double step = (next - res.x).norm();
    const double residual = step / std::max(1.0, static_cast<double>(res.x.norm()));
    const bool increased = obj - res.objective > cfg.increase_tol * std::abs(res.objective);
    res.x = std::move(next);
    res.objective = obj;
    res.iterations = t + 1;
    on_step(res.iterations, std::as_const(res.x), obj, residual);
    if (!std::isfinite(obj) || increased) {
      res.status = ProxStatus::ObjectiveIncrease;
      return res;
    }
    if (residual <= cfg.fixpoint_tol) {
      res.status = ProxStatus::Converged;
      return res;
    }
  }
  res.status = ProxStatus::MaxIters;
  return res;
}

template <class Point>
ProxResult<Point> constrained_prox_descent(const CompositeProblem<Point>& problem, Point x0,
                                           const ProxConfig& cfg) {
  return constrained_prox_descent(problem, std::move(x0), cfg,
                                  [](int, const Point&, double, double) {});
}

}  // namespace lrl
