#pragma once

#include <cstdint>
#include <random>

#include "lrl/types.hpp"

namespace lrl {

/// Seeded random source with a stream that is fixed by this file, not by the
/// standard library implementation: raw bits come from std::mt19937_64 (whose
/// output sequence is pinned by the standard), uniforms use the top 53 bits and
/// normals use the Box-Muller transform. std::normal_distribution is not used
/// because its algorithm is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Standard normal draw.
  double normal();

  /// rows x cols matrix of N(0, stddev^2) entries, filled row by row.
  Matrix normal_matrix(Index rows, Index cols, double stddev = 1.0);

  Vector normal_vector(Index size, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Independent child seed for a numbered sub-stream (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lrl
