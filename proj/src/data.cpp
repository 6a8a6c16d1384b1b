#include "unmix/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "csv_detail.hpp"

namespace unmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'H', 'S', 'I', 'B'};
constexpr std::uint16_t kVersion = 1;
constexpr double kReflectanceSlack = 1e-9;
constexpr long kMaxConsecutiveRejections = 1000000;

template <typename T>
void write_le(std::ofstream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes, bytes + sizeof(T));
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

// Parses "inf"-style spellings for the noiseless sentinel.
json snr_to_json(double snr_db) {
  if (std::isinf(snr_db)) return json("inf");
  return json(snr_db);
}

double snr_from_json(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "Inf") {
      return std::numeric_limits<double>::infinity();
    }
    throw std::runtime_error("meta.json: unrecognized snr_db string '" + s +
                             "'");
  }
  return j.get<double>();
}

}  // namespace

void SynthConfig::validate() const {
  alpha.validate();
  if (k < 2) throw std::invalid_argument("SynthConfig: k must be >= 2");
  if (n < 1) throw std::invalid_argument("SynthConfig: n must be >= 1");
  if (alpha.alpha.size() != k) {
    throw std::invalid_argument("SynthConfig: alpha length " +
                                std::to_string(alpha.alpha.size()) +
                                " does not match k=" + std::to_string(k));
  }
  if (!(max_purity > 1.0 / static_cast<double>(k)) || max_purity > 1.0) {
    throw std::invalid_argument(
        "SynthConfig: max_purity must lie in (1/k, 1], got " +
        std::to_string(max_purity));
  }
}

void Dataset::validate() const {
  if (Y.size() == 0) throw std::runtime_error("Dataset: empty Y");
  if ((Y.array() < 0.0).any()) {
    throw std::runtime_error("Dataset: Y has negative entries");
  }
  if (M_true) {
    if (M_true->rows() != Y.rows()) {
      throw std::runtime_error("Dataset: M_true band count mismatch");
    }
    if ((M_true->array() < 0.0).any()) {
      throw std::runtime_error("Dataset: M_true has negative entries");
    }
  }
  if (A_true) {
    if (A_true->cols() != Y.cols()) {
      throw std::runtime_error("Dataset: A_true sample count mismatch");
    }
    if (M_true && A_true->rows() != M_true->cols()) {
      throw std::runtime_error("Dataset: A_true/M_true endmember mismatch");
    }
    for (Index j = 0; j < A_true->cols(); ++j) {
      const auto col = A_true->col(j);
      if (col.minCoeff() < -1e-12 || std::abs(col.sum() - 1.0) > 1e-9) {
        throw std::runtime_error("Dataset: A_true column " +
                                 std::to_string(j) + " not on the simplex");
      }
      if (meta.max_purity > 0.0 &&
          col.maxCoeff() > meta.max_purity + 1e-9) {
        throw std::runtime_error("Dataset: A_true column " +
                                 std::to_string(j) +
                                 " exceeds the purity cap");
      }
    }
  }
}

SpectralLibrary load_spectral_library(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_spectral_library: cannot open " + path);
  }
  std::string line;
  int lineno = 0;
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    names = detail::split_csv_line(line);
    break;
  }
  if (names.empty()) {
    throw std::runtime_error("load_spectral_library: " + path + " is empty");
  }
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c].empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": empty material name in header column " +
                               std::to_string(c + 1));
    }
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != names.size()) {
      throw std::runtime_error(where + ": row has " +
                               std::to_string(cells.size()) +
                               " cells, expected " +
                               std::to_string(names.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      const double v = detail::parse_cell(cell, where);
      if (v < -kReflectanceSlack || v > 1.0 + kReflectanceSlack) {
        throw std::runtime_error(
            where + ": reflectance " + std::to_string(v) +
            " outside [0, 1]; is a wavelength column present?");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error("load_spectral_library: " + path +
                             " has a header but no band rows");
  }

  SpectralLibrary lib;
  lib.names = std::move(names);
  lib.spectra.resize(static_cast<Index>(rows.size()),
                     static_cast<Index>(lib.names.size()));
  for (Index i = 0; i < lib.spectra.rows(); ++i) {
    for (Index j = 0; j < lib.spectra.cols(); ++j) {
      lib.spectra(i, j) =
          rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return lib;
}

Dataset generate_synthetic(const SpectralLibrary& lib, const SynthConfig& cfg) {
  cfg.validate();
  if (lib.material_count() < cfg.k) {
    throw std::invalid_argument(
        "generate_synthetic: library has " +
        std::to_string(lib.material_count()) + " materials, need " +
        std::to_string(cfg.k));
  }

  // Substreams: 0 = endmember choice, 1 = abundances, 2 = noise.
  Rng rng_pick = Rng::stream(cfg.seed, 0);
  Rng rng_abund = Rng::stream(cfg.seed, 1);
  Rng rng_noise = Rng::stream(cfg.seed, 2);

  std::vector<Index> chosen;
  if (!cfg.endmember_names.empty()) {
    if (static_cast<Index>(cfg.endmember_names.size()) != cfg.k) {
      throw std::invalid_argument(
          "generate_synthetic: endmember_names length must equal k");
    }
    for (const auto& name : cfg.endmember_names) {
      const auto it = std::find(lib.names.begin(), lib.names.end(), name);
      if (it == lib.names.end()) {
        throw std::invalid_argument(
            "generate_synthetic: material '" + name + "' not in library");
      }
      chosen.push_back(it - lib.names.begin());
    }
  } else {
    // Partial Fisher-Yates draw without replacement.
    std::vector<Index> pool(lib.material_count());
    for (Index i = 0; i < lib.material_count(); ++i) pool[i] = i;
    for (Index i = 0; i < cfg.k; ++i) {
      const Index j =
          i + static_cast<Index>(rng_pick.next_u64() %
                                 static_cast<std::uint64_t>(pool.size() - i));
      std::swap(pool[i], pool[j]);
      chosen.push_back(pool[i]);
    }
  }

  Matrix M(lib.band_count(), cfg.k);
  std::vector<std::string> names;
  for (Index i = 0; i < cfg.k; ++i) {
    M.col(i) = lib.spectra.col(chosen[static_cast<std::size_t>(i)]);
    names.push_back(lib.names[static_cast<std::size_t>(chosen[i])]);
  }

  // Whole-column rejection keeps accepted samples i.i.d. from the truncated
  // Dirichlet.
  Matrix A(cfg.k, cfg.n);
  Vector draw(cfg.k);
  long consecutive_rejections = 0;
  for (Index j = 0; j < cfg.n;) {
    double sum = 0.0;
    for (Index i = 0; i < cfg.k; ++i) {
      draw[i] = rng_abund.gamma(cfg.alpha.alpha[i]);
      sum += draw[i];
    }
    draw /= sum;
    if (draw.maxCoeff() <= cfg.max_purity) {
      A.col(j) = draw;
      ++j;
      consecutive_rejections = 0;
    } else if (++consecutive_rejections > kMaxConsecutiveRejections) {
      throw std::runtime_error(
          "generate_synthetic: rejection sampling stalled; max_purity " +
          std::to_string(cfg.max_purity) +
          " is infeasible for the given alpha");
    }
  }

  const Matrix clean = M * A;
  Matrix Y;
  if (std::isinf(cfg.snr_db)) {
    Y = clean;
  } else {
    Matrix noise = sample_gaussian(rng_noise, clean.rows(), clean.cols(), 1.0);
    const double noise_energy = noise.squaredNorm();
    if (noise_energy <= 0.0) {
      throw std::runtime_error("generate_synthetic: degenerate noise draw");
    }
    const double target_energy =
        clean.squaredNorm() * std::pow(10.0, -cfg.snr_db / 10.0);
    noise *= std::sqrt(target_energy / noise_energy);
    Y = (clean + noise).cwiseMax(0.0);
  }

  Dataset ds;
  ds.Y = std::move(Y);
  ds.M_true = std::move(M);
  ds.A_true = std::move(A);
  ds.meta.n = cfg.n;
  ds.meta.l = lib.band_count();
  ds.meta.k = cfg.k;
  ds.meta.alpha.assign(cfg.alpha.alpha.data(),
                       cfg.alpha.alpha.data() + cfg.alpha.alpha.size());
  ds.meta.max_purity = cfg.max_purity;
  ds.meta.snr_db = cfg.snr_db;
  ds.meta.seed = cfg.seed;
  ds.meta.endmember_names = std::move(names);
  ds.validate();
  return ds;
}

void save_matrix(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_matrix: cannot open " + path);
  out.write(kMagic, 4);
  write_le<std::uint16_t>(out, kVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = m(i, j);
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (double& v : row) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_matrix: write failed for " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_matrix: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("load_matrix: bad magic in " + path);
  }
  const auto version = read_le<std::uint16_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("load_matrix: unsupported version " +
                             std::to_string(version) + " in " + path);
  }
  const auto rows = read_le<std::uint32_t>(in);
  const auto cols = read_le<std::uint32_t>(in);
  if (!in) throw std::runtime_error("load_matrix: truncated header in " + path);
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<double> row(cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) {
      throw std::runtime_error("load_matrix: truncated payload in " + path);
    }
    for (std::uint32_t j = 0; j < cols; ++j) {
      double v = row[j];
      if constexpr (std::endian::native == std::endian::big) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        bits = __builtin_bswap64(bits);
        v = std::bit_cast<double>(bits);
      }
      m(static_cast<Index>(i), static_cast<Index>(j)) = v;
    }
  }
  return m;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  ds.validate();
  fs::create_directories(dir);
  save_matrix(ds.Y, (fs::path(dir) / "Y.hsib").string());
  if (ds.M_true) {
    save_matrix(*ds.M_true, (fs::path(dir) / "M_true.hsib").string());
  }
  if (ds.A_true) {
    save_matrix(*ds.A_true, (fs::path(dir) / "A_true.hsib").string());
  }
  json meta;
  meta["n"] = ds.meta.n;
  meta["l"] = ds.meta.l;
  meta["k"] = ds.meta.k;
  meta["alpha"] = ds.meta.alpha;
  meta["max_purity"] = ds.meta.max_purity;
  meta["snr_db"] = snr_to_json(ds.meta.snr_db);
  meta["seed"] = ds.meta.seed;
  meta["endmember_names"] = ds.meta.endmember_names;
  std::ofstream out(fs::path(dir) / "meta.json");
  if (!out) throw std::runtime_error("save_dataset: cannot write meta.json");
  out << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  const fs::path base(dir);
  std::ifstream meta_in(base / "meta.json");
  if (!meta_in) {
    throw std::runtime_error("load_dataset: missing meta.json in " + dir);
  }
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_dataset: malformed meta.json: " +
                             std::string(e.what()));
  }

  Dataset ds;
  ds.meta.n = meta.at("n").get<Index>();
  ds.meta.l = meta.at("l").get<Index>();
  ds.meta.k = meta.at("k").get<Index>();
  ds.meta.alpha = meta.at("alpha").get<std::vector<double>>();
  ds.meta.max_purity = meta.at("max_purity").get<double>();
  ds.meta.snr_db = snr_from_json(meta.at("snr_db"));
  ds.meta.seed = meta.at("seed").get<std::uint64_t>();
  ds.meta.endmember_names =
      meta.at("endmember_names").get<std::vector<std::string>>();

  ds.Y = load_matrix((base / "Y.hsib").string());
  if (ds.Y.rows() != ds.meta.l || ds.Y.cols() != ds.meta.n) {
    std::ostringstream msg;
    msg << "load_dataset: Y is " << ds.Y.rows() << "x" << ds.Y.cols()
        << " but meta.json declares " << ds.meta.l << "x" << ds.meta.n;
    throw std::runtime_error(msg.str());
  }
  if (fs::exists(base / "M_true.hsib")) {
    ds.M_true = load_matrix((base / "M_true.hsib").string());
    if (ds.M_true->rows() != ds.meta.l || ds.M_true->cols() != ds.meta.k) {
      throw std::runtime_error("load_dataset: M_true shape disagrees with meta");
    }
  }
  if (fs::exists(base / "A_true.hsib")) {
    ds.A_true = load_matrix((base / "A_true.hsib").string());
    if (ds.A_true->rows() != ds.meta.k || ds.A_true->cols() != ds.meta.n) {
      throw std::runtime_error("load_dataset: A_true shape disagrees with meta");
    }
  }
  ds.validate();
  return ds;
}

std::vector<std::vector<Index>> batch_indices(Index n, Index batch_size,
                                              Rng& rng) {
  if (batch_size < 1 || batch_size > n) {
    throw std::invalid_argument("batch_indices: batch_size " +
                                std::to_string(batch_size) +
                                " out of range for n=" + std::to_string(n));
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  // Fisher-Yates; the modulo draw is deterministic, and its bias is
  // immaterial at these ranges.
  for (Index i = 0; i < n - 1; ++i) {
    const Index j =
        i + static_cast<Index>(rng.next_u64() %
                               static_cast<std::uint64_t>(n - i));
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(j)]);
  }
  std::vector<std::vector<Index>> batches;
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min<Index>(start + batch_size, n);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

SpectralLibrary make_demo_library(Index bands, Index materials,
                                  std::uint64_t seed) {
  if (bands < 2 || materials < 1) {
    throw std::invalid_argument("make_demo_library: need bands >= 2, materials >= 1");
  }
  Rng rng = Rng::stream(seed, 7);
  SpectralLibrary lib;
  lib.spectra.resize(bands, materials);
  for (Index m = 0; m < materials; ++m) {
    Vector curve = Vector::Zero(bands);
    const int bumps = 3 + static_cast<int>(rng.next_u64() % 4);
    for (int b = 0; b < bumps; ++b) {
      const double amp = rng.uniform(-0.5, 0.8);
      const double center = rng.uniform(0.0, static_cast<double>(bands - 1));
      const double width = rng.uniform(static_cast<double>(bands) / 40.0,
                                       static_cast<double>(bands) / 6.0);
      for (Index i = 0; i < bands; ++i) {
        const double t = (static_cast<double>(i) - center) / width;
        curve[i] += amp * std::exp(-0.5 * t * t);
      }
    }
    const double lo = rng.uniform(0.02, 0.12);
    const double hi = rng.uniform(0.55, 0.95);
    const double cmin = curve.minCoeff();
    const double cmax = curve.maxCoeff();
    const double span = cmax - cmin;
    for (Index i = 0; i < bands; ++i) {
      const double t = span > 0.0 ? (curve[i] - cmin) / span : 0.5;
      lib.spectra(i, m) = lo + t * (hi - lo);
    }
    lib.names.push_back("material_" + std::to_string(m + 1));
  }
  return lib;
}

}  // namespace unmix
