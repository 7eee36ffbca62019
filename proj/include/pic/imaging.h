#pragma once

#include "pic/grid.h"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace pic {

// Cartesian line mask over k-space columns (k-space centred at (h/2, w/2)).
struct SamplingMask
{
  Index height = 0;
  Index width = 0;
  std::vector<Index> kept_columns; // ascending
  double center_fraction = 0.08;
  std::uint64_t seed = 0;
  double target_R = 1.0;

  Index sample_count() const { return height * static_cast<Index>(kept_columns.size()); }
  RealGrid as_grid() const;
  bool operator==(SamplingMask const &) const = default;
};

struct KSpaceMeasurement
{
  SamplingMask mask;
  std::vector<Cx> values;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t noise_seed = 0;
};

// Indices of the always-kept centre band of ceil(center_fraction * width) columns.
std::vector<Index> center_band(Index width, double center_fraction);

SamplingMask generate_cartesian_mask(Index height, Index width, double R, double center_fraction, std::uint64_t seed);
SamplingMask full_mask(Index height, Index width);

// H f: centred unitary DFT restricted to kept columns, ordered row by row then by kept column.
std::vector<Cx> forward(RealGrid const &f, SamplingMask const &mask);
// H^T v: zero-fill, inverse unitary DFT, real part.
RealGrid adjoint(std::span<Cx const> v, SamplingMask const &mask);

// Per-column weights d such that H^T H = F^H diag(d) F on real images, indexed by the
// unshifted DFT column. Entries are 0, 1/2 or 1.
std::vector<double> normal_column_weights(SamplingMask const &mask);

// Circular complex Gaussian noise rescaled so that 20 log10(|clean|/|noise|) = snr_db.
std::vector<Cx> add_noise(std::span<Cx const> clean, double snr_db, std::uint64_t seed);
double measure_snr(std::span<Cx const> clean, std::span<Cx const> noisy);

KSpaceMeasurement simulate_measurement(RealGrid const &f, SamplingMask const &mask, double snr_db, std::uint64_t noise_seed);

// Mask: 0/1 TNSR grid plus "<path>.txt" sidecar. Measurement: complex TNSR plus sidecar
// naming the mask file.
void write_mask(std::filesystem::path const &path, SamplingMask const &mask);
SamplingMask read_mask(std::filesystem::path const &path);
void write_measurement(std::filesystem::path const &path, KSpaceMeasurement const &m);
KSpaceMeasurement read_measurement(std::filesystem::path const &path);
std::filesystem::path sidecar_path(std::filesystem::path const &path);

} // namespace pic
