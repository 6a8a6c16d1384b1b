#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unmix/numerics.hpp"

namespace unmix {

// Spectral library: one reflectance spectrum per material, shared band grid.
struct SpectralLibrary {
  std::vector<std::string> names;
  Matrix spectra;  // band_count x materials, values in [0, 1]

  Index band_count() const { return spectra.rows(); }
  Index material_count() const { return spectra.cols(); }
};

struct SynthConfig {
  Index k = 3;
  Index n = 2000;
  DirichletSpec alpha;
  double max_purity = 0.8;  // must exceed 1/k
  double snr_db = 40.0;     // +infinity disables the noise term
  std::uint64_t seed = 0;
  // When non-empty, picks these library materials instead of a seeded draw.
  std::vector<std::string> endmember_names;

  void validate() const;
};

struct DatasetMeta {
  Index n = 0;
  Index l = 0;
  Index k = 0;
  std::vector<double> alpha;
  double max_purity = 0.0;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> endmember_names;
};

struct Dataset {
  Matrix Y;  // l x n observations
  std::optional<Matrix> M_true;  // l x k
  std::optional<Matrix> A_true;  // k x n
  DatasetMeta meta;

  void validate() const;
};

// CSV format: header row of material names, then one row per band of
// comma-separated reflectances. No wavelength column.
SpectralLibrary load_spectral_library(const std::string& path);

// Synth4-style generation: k seeded library picks, Dirichlet abundances
// rejection-sampled to the purity cap, Gaussian noise scaled to the target
// SNR (Frobenius, dB), observations clamped at zero.
Dataset generate_synthetic(const SpectralLibrary& lib, const SynthConfig& cfg);

// Dataset directory: Y.hsib, optional M_true.hsib / A_true.hsib, meta.json.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// One epoch worth of batches: a shuffled partition of {0..n-1}; the final
// batch may be smaller.
std::vector<std::vector<Index>> batch_indices(Index n, Index batch_size,
                                              Rng& rng);

// "HSIB" matrix container: magic, version u16 = 1, rows u32, cols u32,
// then rows*cols doubles row-major, all little-endian.
void save_matrix(const Matrix& m, const std::string& path);
Matrix load_matrix(const std::string& path);

// Synthetic demo library: smooth pseudo-reflectance curves (sums of Gaussian
// bumps rescaled into [0, 1]). Stands in for a real spectral library, which
// is not bundled.
SpectralLibrary make_demo_library(Index bands, Index materials,
                                  std::uint64_t seed);

}  // namespace unmix
