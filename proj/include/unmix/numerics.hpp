#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace unmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Deterministic seeded random number generator.
//
// The engine is std::mt19937_64, whose output sequence for a given seed is
// pinned by the C++ standard, and every distribution transform below is
// implemented in this repository, so a seed reproduces the same stream
// bit-exactly on every platform. An Rng must not be shared between threads;
// derive independent streams with Rng::stream instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent substream: (seed, stream_id) are mixed through SplitMix64
  // before seeding the engine, so distinct ids give unrelated streams.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1); safe under log().
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller. Consumes exactly two uniforms per draw
  // (no caching) so stream accounting stays position-independent.
  double normal();

  // Gamma(alpha, 1) via Marsaglia-Tsang; for alpha < 1 samples Gamma(alpha+1)
  // and applies the U^(1/alpha) boost.
  double gamma(double alpha);

 private:
  std::mt19937_64 engine_;
};

struct DirichletSpec {
  Vector alpha;  // concentration parameters, all > 0

  void validate() const;  // throws std::invalid_argument on alpha[i] <= 0
};

// Dense product with explicit shape checking.
Matrix mat_mul(const Matrix& a, const Matrix& b);

// rows x cols matrix of i.i.d. N(0, sigma^2) entries.
Matrix sample_gaussian(Rng& rng, Index rows, Index cols, double sigma);

// k x n matrix whose columns are i.i.d. Dirichlet(alpha) samples; every
// column is nonnegative and sums to 1.
Matrix sample_dirichlet(Rng& rng, const DirichletSpec& spec, Index n);

// fan_out x fan_in matrix, entries uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(Rng& rng, Index fan_in, Index fan_out);

}  // namespace unmix
