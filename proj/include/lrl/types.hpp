#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Default relative tolerance for counting singular values: sigma_l > tol * sigma_1.
inline constexpr double kDefaultRankTol = 1e-6;

/// Bad caller input: mismatched dimensions, infeasible parameters.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical routine failed (non-finite values, stalled line search, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or incompatible file contents.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lrl
