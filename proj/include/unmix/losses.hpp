#pragma once

#include <vector>

#include "unmix/numerics.hpp"

namespace unmix {

struct LossValue {
  double value = 0.0;
  Matrix grad;        // with respect to Y_hat, same shape
  int incidents = 0;  // zero-norm reconstruction columns (SAD only)
};

// (1/n) sum_i |yhat_i - y_i|^2 over pixels (columns).
LossValue mse_loss(const Matrix& Y, const Matrix& Y_hat);

// (1/n) sum_i arccos(<yhat_i, y_i> / (|yhat_i| |y_i|)), cosine clamped to
// [-1 + 1e-12, 1 - 1e-12]; clamped pixels contribute zero gradient, and a
// zero-norm yhat_i contributes pi/2 with zero gradient.
LossValue sad_loss(const Matrix& Y, const Matrix& Y_hat);

// Spectral angle between two spectra, clamped as above. Zero-norm input
// yields pi/2.
double spectral_angle(const Vector& a, const Vector& b);

struct EndmemberReport {
  // permutation[i] = index of the true endmember assigned to estimate i.
  std::vector<int> permutation;
  Vector per_endmember_sad;  // indexed by true endmember
  double mean_sad = 0.0;
};

// Exhaustive permutation matching (k <= 8), minimizing mean pairwise SAD.
EndmemberReport match_endmembers(const Matrix& M_hat, const Matrix& M_true);

}  // namespace unmix
