#include "pic/imaging.h"

#include "pic/error.h"
#include "pic/fft.h"
#include "pic/kv.h"
#include "pic/rng.h"
#include "pic/tensor_io.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace pic {

RealGrid SamplingMask::as_grid() const
{
  RealGrid g(height, width);
  for (Index r = 0; r < height; r++) {
    for (auto c : kept_columns) {
      g(r, c) = 1.0;
    }
  }
  return g;
}

std::vector<Index> center_band(Index width, double center_fraction)
{
  auto const b = static_cast<Index>(std::ceil(center_fraction * static_cast<double>(width)));
  Index const start = width / 2 - b / 2;
  std::vector<Index> band;
  for (Index i = 0; i < b; i++) {
    band.push_back(start + i);
  }
  return band;
}

SamplingMask generate_cartesian_mask(Index height, Index width, double R, double center_fraction, std::uint64_t seed)
{
  if (height <= 0 || width <= 0) {
    throw ParameterError("mask dimensions must be positive");
  }
  if (!(R >= 1.0) || !std::isfinite(R)) {
    throw ParameterError("undersampling ratio R must be >= 1");
  }
  if (!(center_fraction >= 0.0 && center_fraction <= 1.0)) {
    throw ParameterError("center_fraction must lie in [0, 1]");
  }
  auto const budget = static_cast<Index>(std::ceil(static_cast<double>(width) / R));
  auto const band = center_band(width, center_fraction);
  if (static_cast<Index>(band.size()) > budget) {
    throw ParameterError("centre band of " + std::to_string(band.size()) + " columns exceeds the budget of " +
                         std::to_string(budget) + " columns at R=" + format_double(R));
  }

  std::vector<char> in_band(static_cast<std::size_t>(width), 0);
  for (auto c : band) {
    in_band[static_cast<std::size_t>(c)] = 1;
  }
  std::vector<Index> pool;
  for (Index c = 0; c < width; c++) {
    if (!in_band[static_cast<std::size_t>(c)]) {
      pool.push_back(c);
    }
  }
  Index const extra = budget - static_cast<Index>(band.size());
  Rng rng(seed);
  for (Index i = 0; i < extra; i++) {
    auto const j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(pool.size() - i)));
    std::swap(pool[i], pool[j]);
  }

  SamplingMask mask;
  mask.height = height;
  mask.width = width;
  mask.center_fraction = center_fraction;
  mask.seed = seed;
  mask.target_R = R;
  mask.kept_columns = band;
  mask.kept_columns.insert(mask.kept_columns.end(), pool.begin(), pool.begin() + extra);
  std::sort(mask.kept_columns.begin(), mask.kept_columns.end());
  return mask;
}

SamplingMask full_mask(Index height, Index width)
{
  return generate_cartesian_mask(height, width, 1.0, 0.0, 0);
}

std::vector<Cx> forward(RealGrid const &f, SamplingMask const &mask)
{
  if (f.height() != mask.height || f.width() != mask.width) {
    throw ContractError("forward: image is " + std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                        ", mask is " + std::to_string(mask.height) + "x" + std::to_string(mask.width));
  }
  auto const k = fft2c(to_complex(f));
  std::vector<Cx> out;
  out.reserve(static_cast<std::size_t>(mask.sample_count()));
  for (Index r = 0; r < mask.height; r++) {
    for (auto c : mask.kept_columns) {
      out.push_back(k(r, c));
    }
  }
  return out;
}

RealGrid adjoint(std::span<Cx const> v, SamplingMask const &mask)
{
  if (static_cast<Index>(v.size()) != mask.sample_count()) {
    throw ContractError("adjoint: sample vector has length " + std::to_string(v.size()) + ", mask expects " +
                        std::to_string(mask.sample_count()));
  }
  ComplexGrid k(mask.height, mask.width);
  std::size_t i = 0;
  for (Index r = 0; r < mask.height; r++) {
    for (auto c : mask.kept_columns) {
      k(r, c) = v[i++];
    }
  }
  return real_part(ifft2c(k));
}

std::vector<double> normal_column_weights(SamplingMask const &mask)
{
  Index const w = mask.width;
  std::vector<double> centred(static_cast<std::size_t>(w), 0.0);
  for (auto c : mask.kept_columns) {
    centred[static_cast<std::size_t>(c)] = 1.0;
  }
  // fft2c places unshifted column u at centred index (u + w/2) mod w
  auto kept_unshifted = [&](Index u) { return centred[static_cast<std::size_t>((u + w / 2) % w)]; };
  std::vector<double> d(static_cast<std::size_t>(w));
  for (Index u = 0; u < w; u++) {
    d[static_cast<std::size_t>(u)] = 0.5 * (kept_unshifted(u) + kept_unshifted((w - u) % w));
  }
  return d;
}

std::vector<Cx> add_noise(std::span<Cx const> clean, double snr_db, std::uint64_t seed)
{
  std::vector<Cx> out(clean.begin(), clean.end());
  if (std::isinf(snr_db) && snr_db > 0) {
    return out;
  }
  if (!std::isfinite(snr_db)) {
    throw ParameterError("snr_db must be finite or +inf");
  }
  double const signal = norm2(clean);
  if (signal == 0.0) {
    throw ParameterError("add_noise: clean signal is all zero, SNR undefined");
  }
  Rng rng(seed);
  std::vector<Cx> noise(clean.size());
  for (auto &n : noise) {
    double const re = rng.normal();
    double const im = rng.normal();
    n = Cx(re, im) * std::sqrt(0.5);
  }
  double const target = signal * std::pow(10.0, -snr_db / 20.0);
  double const scale = target / norm2(noise);
  for (std::size_t i = 0; i < out.size(); i++) {
    out[i] += scale * noise[i];
  }
  return out;
}

double measure_snr(std::span<Cx const> clean, std::span<Cx const> noisy)
{
  if (clean.size() != noisy.size()) {
    throw ContractError("measure_snr: length mismatch");
  }
  double err = 0.0;
  for (std::size_t i = 0; i < clean.size(); i++) {
    err += std::norm(noisy[i] - clean[i]);
  }
  if (err == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 20.0 * std::log10(norm2(clean) / std::sqrt(err));
}

KSpaceMeasurement simulate_measurement(RealGrid const &f, SamplingMask const &mask, double snr_db, std::uint64_t noise_seed)
{
  KSpaceMeasurement m;
  m.mask = mask;
  m.snr_db = snr_db;
  m.noise_seed = noise_seed;
  m.values = add_noise(forward(f, mask), snr_db, noise_seed);
  return m;
}

std::filesystem::path sidecar_path(std::filesystem::path const &path)
{
  return std::filesystem::path(path.string() + ".txt");
}

void write_mask(std::filesystem::path const &path, SamplingMask const &mask)
{
  write_grid(path, mask.as_grid());
  KeyValues kv;
  kv.set("kind", "mask");
  kv.set("height", static_cast<std::int64_t>(mask.height));
  kv.set("width", static_cast<std::int64_t>(mask.width));
  kv.set("R", mask.target_R);
  kv.set("center_fraction", mask.center_fraction);
  kv.set("seed", mask.seed);
  kv.save(sidecar_path(path));
}

SamplingMask read_mask(std::filesystem::path const &path)
{
  auto const grid = read_grid(path);
  auto const kv = KeyValues::load(sidecar_path(path));
  SamplingMask mask;
  mask.height = grid.height();
  mask.width = grid.width();
  mask.target_R = kv.get_double("R");
  mask.center_fraction = kv.get_double("center_fraction");
  mask.seed = kv.get_u64("seed");
  for (Index c = 0; c < grid.width(); c++) {
    if (grid(0, c) != 0.0) {
      mask.kept_columns.push_back(c);
    }
  }
  for (Index r = 0; r < grid.height(); r++) {
    for (Index c = 0; c < grid.width(); c++) {
      bool const kept = std::binary_search(mask.kept_columns.begin(), mask.kept_columns.end(), c);
      if (grid(r, c) != (kept ? 1.0 : 0.0)) {
        throw IoError(path.string() + ": mask is not a Cartesian column mask");
      }
    }
  }
  if (mask.kept_columns.empty()) {
    throw IoError(path.string() + ": mask keeps no columns");
  }
  return mask;
}

void write_measurement(std::filesystem::path const &path, KSpaceMeasurement const &m)
{
  auto mask_path = path;
  mask_path.replace_extension(".mask.tnsr");
  write_mask(mask_path, m.mask);
  write_complex_vector(path, m.values);
  KeyValues kv;
  kv.set("kind", "measurement");
  kv.set("mask", mask_path.filename().string());
  kv.set("snr_db", m.snr_db);
  kv.set("noise_seed", m.noise_seed);
  kv.save(sidecar_path(path));
}

KSpaceMeasurement read_measurement(std::filesystem::path const &path)
{
  auto const kv = KeyValues::load(sidecar_path(path));
  KSpaceMeasurement m;
  m.mask = read_mask(path.parent_path() / kv.get_string("mask"));
  m.snr_db = kv.get_double("snr_db");
  m.noise_seed = kv.get_u64("noise_seed");
  m.values = read_complex_vector(path);
  if (static_cast<Index>(m.values.size()) != m.mask.sample_count()) {
    throw IoError(path.string() + ": sample count does not match its mask");
  }
  return m;
}

} // namespace pic
