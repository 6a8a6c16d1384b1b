#include "unmix/numerics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace unmix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id) {
  return Rng(splitmix64(seed ^ splitmix64(stream_id)));
}

double Rng::normal() {
  const double u1 = uniform_open01();
  const double u2 = uniform_open01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double alpha) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("gamma: shape must be positive, got " +
                                std::to_string(alpha));
  }
  if (alpha < 1.0) {
    const double boost = std::pow(uniform_open01(), 1.0 / alpha);
    return gamma(alpha + 1.0) * boost;
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open01();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

void DirichletSpec::validate() const {
  if (alpha.size() == 0) {
    throw std::invalid_argument("DirichletSpec: alpha must be non-empty");
  }
  for (Index i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0)) {
      throw std::invalid_argument(
          "DirichletSpec: alpha[" + std::to_string(i) +
          "] must be positive, got " + std::to_string(alpha[i]));
    }
  }
}

Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream msg;
    msg << "mat_mul: inner dimensions differ, " << a.rows() << "x" << a.cols()
        << " vs " << b.rows() << "x" << b.cols();
    throw std::invalid_argument(msg.str());
  }
  Matrix c = a * b;
  if (!c.allFinite()) {
    throw std::runtime_error("mat_mul: non-finite entries in product");
  }
  return c;
}

Matrix sample_gaussian(Rng& rng, Index rows, Index cols, double sigma) {
  if (sigma < 0.0) {
    throw std::invalid_argument("sample_gaussian: sigma must be >= 0, got " +
                                std::to_string(sigma));
  }
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      m(i, j) = sigma == 0.0 ? 0.0 : sigma * rng.normal();
    }
  }
  return m;
}

Matrix sample_dirichlet(Rng& rng, const DirichletSpec& spec, Index n) {
  spec.validate();
  if (n < 1) {
    throw std::invalid_argument("sample_dirichlet: n must be >= 1");
  }
  const Index k = spec.alpha.size();
  Matrix m(k, n);
  for (Index j = 0; j < n; ++j) {
    double sum = 0.0;
    for (Index i = 0; i < k; ++i) {
      const double g = rng.gamma(spec.alpha[i]);
      m(i, j) = g;
      sum += g;
    }
    // A zero sum cannot occur: gamma() returns strictly positive values.
    m.col(j) /= sum;
  }
  return m;
}

Matrix xavier_uniform(Rng& rng, Index fan_in, Index fan_out) {
  if (fan_in < 1 || fan_out < 1) {
    throw std::invalid_argument("xavier_uniform: fans must be >= 1");
  }
  const double bound =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_out, fan_in);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      m(i, j) = rng.uniform(-bound, bound);
    }
  }
  return m;
}

}  // namespace unmix
