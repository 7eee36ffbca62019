#pragma once

#include "pic/generator.h"
#include "pic/imaging.h"
#include "pic/kv.h"
#include "pic/recon.h"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pic {

inline constexpr int CsvSchemaVersion = 1;

struct DatasetSpec
{
  int count = 20;
  std::uint64_t master_seed = 1;
  double delta = 0.3;               // misalignment of the constrained styles, 0 disables
  std::uint64_t generator_seed = 7;

  void validate() const;
};

// One test (or validation) case: truth, prior of a different contrast, and optionally a
// misaligned prior.
struct Sample
{
  std::string id;
  std::uint64_t index = 0; // stream index used for the per-image seeds
  ExtendedLatent w_true, w_pi;
  RealGrid truth, prior;
  std::optional<ExtendedLatent> w_misaligned;
  std::optional<RealGrid> prior_misaligned;
};

struct Dataset
{
  DatasetSpec spec;
  GeneratorParams generator;
  Sample validation;
  std::vector<Sample> test;
};

Dataset make_dataset(DatasetSpec const &spec, GeneratorParams generator);
void write_dataset(std::filesystem::path const &dir, Dataset const &d);
Dataset read_dataset(std::filesystem::path const &dir);

// The default lambda grid: 7 log-spaced points from 1e-4 to 10.
std::vector<double> default_lambda_grid();

struct ExperimentConfig
{
  std::string method = "picgm"; // pls-tv, csgm, picgm, wpiccs
  double R = 4.0;
  double center_fraction = 0.08;
  double snr_db = 20.0;
  std::uint64_t seed = 1;

  double lambda = 0.1;
  double alpha = 0.5;
  double lambda_phi = 0.0;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> alpha_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> lambda_phi_grid{0.0, 1e-3, 1e-2, 1e-1};

  Index p1 = 0; // 0 selects (k, 2k + 1)
  Index p2 = 0;
  int wavelet_levels = 7;
  std::string prior = "aligned";       // aligned | misaligned
  std::string latent_source = "oracle"; // oracle | invert
  LatentSpace latent_space = LatentSpace::WPlus;
  AdamConfig adam;
  PrimalDualConfig pd;
  int threads = 1;

  static ExperimentConfig from_kv(KeyValues const &kv);
  KeyValues to_kv() const;
  void validate() const;
};

bool is_latent_method(std::string const &method);

// Per-image measurement for a configuration. The mask depends only on (seed, R,
// center_fraction); the noise seed on (seed, sample index).
KSpaceMeasurement simulate_sample(Sample const &s, ExperimentConfig const &cfg);
SamplingMask experiment_mask(ExperimentConfig const &cfg, Index height, Index width);

// Runs cfg.method with its fixed parameters on one sample.
ReconResult reconstruct_sample(Sample const &s, KSpaceMeasurement const &g, Generator const &gen,
                               ExperimentConfig const &cfg);

struct GridPoint
{
  double lambda = 0.0; // lambda_phi for the latent methods
  double alpha = 0.0;
  double mse = 0.0;
  std::string status = "ok";
};

struct GridSearchResult
{
  std::vector<GridPoint> points;
  GridPoint best;
};

// Lowest MSE among successful points; ties go to the smaller lambda, then the smaller alpha.
GridPoint select_best(std::vector<GridPoint> const &points);

GridSearchResult grid_search(Dataset const &d, ExperimentConfig const &cfg);
std::string grid_csv(std::string const &method, GridSearchResult const &r);
// Copies the selected point into the fixed-parameter fields of cfg.
ExperimentConfig apply_best(ExperimentConfig cfg, GridPoint const &best);

struct MetricsRow
{
  std::string image_id;
  std::string method;
  double R = 0.0;
  double snr_db = 0.0;
  std::string prior;
  double rmse = 0.0;
  double ssim = 0.0;
  double wall_time_s = 0.0; // kept out of metrics.csv
  std::uint64_t seed = 0;
  std::string status = "ok";
};

struct SuiteResult
{
  std::vector<MetricsRow> rows;
};

// Reconstructs every test image. With out set, writes metrics.csv, timing.toml and the
// per-image artifacts under out.
SuiteResult run_suite(Dataset const &d, ExperimentConfig const &cfg,
                      std::optional<std::filesystem::path> const &out = std::nullopt);

std::string metrics_csv(std::vector<MetricsRow> const &rows);
std::vector<MetricsRow> parse_metrics_csv(std::string const &text, std::string const &source = "<csv>");

struct Aggregate
{
  std::string method;
  double R = 0.0;
  double snr_db = 0.0;
  std::string prior;
  int count = 0;
  double rmse_mean = 0.0, rmse_median = 0.0, rmse_iqr = 0.0;
  double ssim_mean = 0.0, ssim_median = 0.0, ssim_iqr = 0.0;
};

// Groups successful rows by (method, R, snr_db, prior), in order of first appearance.
std::vector<Aggregate> aggregate(std::vector<MetricsRow> const &rows);
std::string aggregate_csv(std::vector<Aggregate> const &a);
std::string aggregate_table(std::vector<Aggregate> const &a);

// Linear-interpolated quantile of a sample (q in [0, 1]).
double quantile(std::vector<double> v, double q);

// Writes a 16-bit PGM scaled to the image's [min, max] plus a `.txt` window sidecar.
void write_pgm16(std::filesystem::path const &path, RealGrid const &f);
// Reads a 16-bit PGM, mapping it back through its sidecar window when present.
RealGrid read_pgm16(std::filesystem::path const &path);

std::string trace_csv(std::vector<ObjectiveValue> const &trace);

// Re-reads every artifact under dir. Returns one message per file that fails.
std::vector<std::string> self_check(std::filesystem::path const &dir);

} // namespace pic
