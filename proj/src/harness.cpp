#include "pic/harness.h"

#include "pic/error.h"
#include "pic/metrics.h"
#include "pic/rng.h"
#include "pic/tensor_io.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace pic {

namespace {

constexpr std::uint64_t StreamTruth = 0x7472757468;     // "truth"
constexpr std::uint64_t StreamContrast = 0x636f6e7472;  // "contr"
constexpr std::uint64_t StreamMisalign = 0x6d6973616c;  // "misal"
constexpr std::uint64_t StreamValidation = 0x76616c6964; // "valid"
constexpr std::uint64_t StreamMask = 0x6d61736b;        // "mask"
constexpr std::uint64_t StreamNoise = 0x6e6f697365;     // "noise"
constexpr std::uint64_t StreamAdamSeed = 0x6164616d;    // "adam"
constexpr std::uint64_t StreamPriorInv = 0x7072696e76;  // "prinv"

// Sample index reserved for the validation image; test images use 0 .. count-1.
constexpr std::uint64_t ValidationIndex = std::uint64_t{1} << 32;

char const *const MetricsHeader = "schema_version,image_id,method,R,snr_db,prior,rmse,ssim,seed,status";

std::string image_id(int i)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "img%03d", i);
  return buf;
}

// Contrast styles occupy the second block of the phantom generator.
bool in_contrast_block(Index j, Index k) { return j >= k && j < 2 * k; }

Sample make_sample(PhantomGenerator const &gen, std::string id, std::uint64_t index, std::uint64_t truth_seed,
                   std::uint64_t contrast_seed, std::uint64_t misalign_seed, double delta)
{
  Index const k = gen.block_size();
  Sample s;
  s.id = std::move(id);
  s.index = index;
  s.w_true = gen.initial_latent(truth_seed);
  s.w_pi = style_mix(s.w_true, gen.initial_latent(contrast_seed), k, 2 * k + 1);
  s.truth = gen.synthesize(s.w_true);
  s.prior = gen.synthesize(s.w_pi);
  if (delta > 0.0) {
    auto w = s.w_pi;
    Rng rng(misalign_seed);
    auto v = w.values();
    for (Index j = 0; j < w.size(); j++) {
      if (!in_contrast_block(j, k)) {
        v[j] += rng.uniform(-delta, delta);
      }
    }
    s.prior_misaligned = gen.synthesize(w);
    s.w_misaligned = std::move(w);
  }
  return s;
}

Tensor latent_tensor(ExtendedLatent const &w)
{
  return Tensor{{static_cast<std::uint32_t>(w.layers()), static_cast<std::uint32_t>(w.block_size())}, w.vector()};
}

ExtendedLatent read_latent(std::filesystem::path const &path)
{
  auto const t = read_tensor(path);
  if (t.dims.size() != 2 || t.dtype() != DType::Real64) {
    throw IoError(path.string() + ": expected a 2-D real tensor (layers x k)");
  }
  return ExtendedLatent(t.dims[1], t.dims[0], t.real());
}

void write_sample(std::filesystem::path const &dir, Sample const &s)
{
  write_grid(dir / "truth.tnsr", s.truth);
  write_tensor(dir / "truth_latent.tnsr", latent_tensor(s.w_true));
  write_grid(dir / "prior.tnsr", s.prior);
  write_tensor(dir / "prior_latent.tnsr", latent_tensor(s.w_pi));
  if (s.prior_misaligned) {
    write_grid(dir / "prior_misaligned.tnsr", *s.prior_misaligned);
    write_tensor(dir / "prior_misaligned_latent.tnsr", latent_tensor(*s.w_misaligned));
  }
}

Sample read_sample(std::filesystem::path const &dir, std::string id, std::uint64_t index)
{
  Sample s;
  s.id = std::move(id);
  s.index = index;
  s.truth = read_grid(dir / "truth.tnsr");
  s.w_true = read_latent(dir / "truth_latent.tnsr");
  s.prior = read_grid(dir / "prior.tnsr");
  s.w_pi = read_latent(dir / "prior_latent.tnsr");
  if (std::filesystem::exists(dir / "prior_misaligned.tnsr")) {
    s.prior_misaligned = read_grid(dir / "prior_misaligned.tnsr");
    s.w_misaligned = read_latent(dir / "prior_misaligned_latent.tnsr");
  }
  return s;
}

std::string clean_field(std::string s)
{
  for (auto &c : s) {
    if (c == ',' || c == '\n' || c == '\r') {
      c = ';';
    }
  }
  return s;
}

std::vector<std::string> split_csv_line(std::string const &line)
{
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> split_lines(std::string const &text)
{
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

double csv_number(std::string const &field, std::string const &source, std::size_t line, char const *column)
{
  try {
    return parse_double(field);
  } catch (std::exception const &) {
    throw IoError(source + ":" + std::to_string(line) + ": column " + column + ": not a number: '" + field + "'");
  }
}

std::uint64_t csv_u64(std::string const &field, std::string const &source, std::size_t line, char const *column)
{
  std::uint64_t v = 0;
  auto const [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || p != field.data() + field.size()) {
    throw IoError(source + ":" + std::to_string(line) + ": column " + column + ": not an unsigned integer: '" + field +
                  "'");
  }
  return v;
}

std::string prior_label(ExperimentConfig const &cfg)
{
  return cfg.method == "pls-tv" || cfg.method == "csgm" ? "none" : cfg.prior;
}

AdamConfig sample_adam(ExperimentConfig const &cfg, Sample const &s)
{
  auto a = cfg.adam;
  a.seed = derive_seed(cfg.adam.seed ^ cfg.seed, StreamAdamSeed, s.index);
  return a;
}

// Runs body(i) for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, int threads, F &&body)
{
  int const t = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (t <= 1) {
    for (std::size_t i = 0; i < n; i++) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex m;
  std::vector<std::thread> pool;
  for (int w = 0; w < t; w++) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!error) {
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (auto &th : pool) {
    th.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

} // namespace

void DatasetSpec::validate() const
{
  if (count < 0) {
    throw ParameterError("dataset count must be non-negative");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw ParameterError("misalignment delta must be a finite non-negative number");
  }
}

Dataset make_dataset(DatasetSpec const &spec, GeneratorParams generator)
{
  spec.validate();
  Dataset d;
  d.spec = spec;
  d.generator = std::move(generator);
  PhantomGenerator const gen(d.generator);
  std::uint64_t const m = spec.master_seed;
  d.validation = make_sample(gen, "val", ValidationIndex, derive_seed(m, StreamValidation, 0),
                             derive_seed(m, StreamValidation, 1), derive_seed(m, StreamValidation, 2), spec.delta);
  for (int i = 0; i < spec.count; i++) {
    auto const u = static_cast<std::uint64_t>(i);
    d.test.push_back(make_sample(gen, image_id(i), u, derive_seed(m, StreamTruth, u), derive_seed(m, StreamContrast, u),
                                 derive_seed(m, StreamMisalign, u), spec.delta));
  }
  return d;
}

void write_dataset(std::filesystem::path const &dir, Dataset const &d)
{
  KeyValues kv;
  kv.set("schema_version", CsvSchemaVersion);
  kv.set("count", d.spec.count);
  kv.set("master_seed", d.spec.master_seed);
  kv.set("delta", d.spec.delta);
  kv.set("generator_seed", d.spec.generator_seed);
  kv.set("generator", "generator.sgen");
  kv.set("validation_id", d.validation.id);
  std::filesystem::create_directories(dir);
  kv.save(dir / "manifest.toml");
  save_generator(dir / "generator.sgen", d.generator);
  write_sample(dir / d.validation.id, d.validation);
  for (auto const &s : d.test) {
    write_sample(dir / s.id, s);
  }
}

Dataset read_dataset(std::filesystem::path const &dir)
{
  auto const kv = KeyValues::load(dir / "manifest.toml");
  Dataset d;
  d.spec.count = static_cast<int>(kv.get_int("count"));
  d.spec.master_seed = kv.get_u64("master_seed");
  d.spec.delta = kv.get_double("delta");
  d.spec.generator_seed = kv.get_u64("generator_seed");
  d.spec.validate();
  d.generator = load_generator(dir / kv.get_string("generator"));
  d.validation = read_sample(dir / kv.get_string("validation_id"), kv.get_string("validation_id"), ValidationIndex);
  for (int i = 0; i < d.spec.count; i++) {
    d.test.push_back(read_sample(dir / image_id(i), image_id(i), static_cast<std::uint64_t>(i)));
  }
  return d;
}

std::vector<double> default_lambda_grid()
{
  std::vector<double> g;
  for (int i = 0; i < 7; i++) {
    g.push_back(std::pow(10.0, -4.0 + 5.0 * i / 6.0));
  }
  return g;
}

bool is_latent_method(std::string const &method) { return method == "csgm" || method == "picgm"; }

ExperimentConfig ExperimentConfig::from_kv(KeyValues const &kv)
{
  ExperimentConfig c;
  c.method = kv.get_string("method", c.method);
  c.R = kv.get_double("R", c.R);
  c.center_fraction = kv.get_double("center_fraction", c.center_fraction);
  c.snr_db = kv.get_double("snr_db", c.snr_db);
  c.seed = kv.get_u64("seed", c.seed);
  c.lambda = kv.get_double("lambda", c.lambda);
  c.alpha = kv.get_double("alpha", c.alpha);
  c.lambda_phi = kv.get_double("lambda_phi", c.lambda_phi);
  c.lambda_grid = kv.get_doubles("lambda_grid", c.lambda_grid);
  c.alpha_grid = kv.get_doubles("alpha_grid", c.alpha_grid);
  c.lambda_phi_grid = kv.get_doubles("lambda_phi_grid", c.lambda_phi_grid);
  c.p1 = kv.get_int("p1", c.p1);
  c.p2 = kv.get_int("p2", c.p2);
  c.wavelet_levels = static_cast<int>(kv.get_int("wavelet_levels", c.wavelet_levels));
  c.prior = kv.get_string("prior", c.prior);
  c.latent_source = kv.get_string("latent_source", c.latent_source);
  auto const space = kv.get_string("latent_space", "wplus");
  if (space == "wplus") {
    c.latent_space = LatentSpace::WPlus;
  } else if (space == "z") {
    c.latent_space = LatentSpace::Z;
  } else {
    throw ParameterError("latent_space must be 'wplus' or 'z', got '" + space + "'");
  }
  c.adam.step = kv.get_double("adam.step", c.adam.step);
  c.adam.beta1 = kv.get_double("adam.beta1", c.adam.beta1);
  c.adam.beta2 = kv.get_double("adam.beta2", c.adam.beta2);
  c.adam.epsilon = kv.get_double("adam.epsilon", c.adam.epsilon);
  c.adam.iters = static_cast<int>(kv.get_int("adam.iters", c.adam.iters));
  c.adam.restarts = static_cast<int>(kv.get_int("adam.restarts", c.adam.restarts));
  c.adam.seed = kv.get_u64("adam.seed", c.adam.seed);
  c.pd.primal_step = kv.get_double("pd.primal_step", c.pd.primal_step);
  c.pd.dual_step = kv.get_double("pd.dual_step", c.pd.dual_step);
  c.pd.iters = static_cast<int>(kv.get_int("pd.iters", c.pd.iters));
  c.pd.reweight_period = static_cast<int>(kv.get_int("pd.reweight_period", c.pd.reweight_period));
  c.threads = static_cast<int>(kv.get_int("threads", c.threads));
  c.validate();
  return c;
}

KeyValues ExperimentConfig::to_kv() const
{
  KeyValues kv;
  kv.set("method", method);
  kv.set("R", R);
  kv.set("center_fraction", center_fraction);
  kv.set("snr_db", snr_db);
  kv.set("seed", seed);
  kv.set("lambda", lambda);
  kv.set("alpha", alpha);
  kv.set("lambda_phi", lambda_phi);
  kv.set("lambda_grid", lambda_grid);
  kv.set("alpha_grid", alpha_grid);
  kv.set("lambda_phi_grid", lambda_phi_grid);
  kv.set("p1", static_cast<std::int64_t>(p1));
  kv.set("p2", static_cast<std::int64_t>(p2));
  kv.set("wavelet_levels", wavelet_levels);
  kv.set("prior", prior);
  kv.set("latent_source", latent_source);
  kv.set("latent_space", latent_space == LatentSpace::WPlus ? "wplus" : "z");
  kv.set("adam.step", adam.step);
  kv.set("adam.beta1", adam.beta1);
  kv.set("adam.beta2", adam.beta2);
  kv.set("adam.epsilon", adam.epsilon);
  kv.set("adam.iters", adam.iters);
  kv.set("adam.restarts", adam.restarts);
  kv.set("adam.seed", adam.seed);
  kv.set("pd.primal_step", pd.primal_step);
  kv.set("pd.dual_step", pd.dual_step);
  kv.set("pd.iters", pd.iters);
  kv.set("pd.reweight_period", pd.reweight_period);
  kv.set("threads", threads);
  return kv;
}

void ExperimentConfig::validate() const
{
  if (method != "pls-tv" && method != "csgm" && method != "picgm" && method != "wpiccs") {
    throw ParameterError("method must be one of pls-tv, csgm, picgm, wpiccs; got '" + method + "'");
  }
  if (prior != "aligned" && prior != "misaligned") {
    throw ParameterError("prior must be 'aligned' or 'misaligned', got '" + prior + "'");
  }
  if (latent_source != "oracle" && latent_source != "invert") {
    throw ParameterError("latent_source must be 'oracle' or 'invert', got '" + latent_source + "'");
  }
  if (threads < 1) {
    throw ParameterError("threads must be at least 1");
  }
  if ((p1 == 0) != (p2 == 0)) {
    throw ParameterError("p1 and p2 must be set together");
  }
  adam.validate();
  pd.validate();
}

SamplingMask experiment_mask(ExperimentConfig const &cfg, Index height, Index width)
{
  return generate_cartesian_mask(height, width, cfg.R, cfg.center_fraction, derive_seed(cfg.seed, StreamMask, 0));
}

KSpaceMeasurement simulate_sample(Sample const &s, ExperimentConfig const &cfg)
{
  auto const mask = experiment_mask(cfg, s.truth.height(), s.truth.width());
  return simulate_measurement(s.truth, mask, cfg.snr_db, derive_seed(cfg.seed, StreamNoise, s.index));
}

ReconResult reconstruct_sample(Sample const &s, KSpaceMeasurement const &g, Generator const &gen,
                               ExperimentConfig const &cfg)
{
  cfg.validate();
  bool const misaligned = cfg.prior == "misaligned";
  if (misaligned && !s.prior_misaligned) {
    throw ParameterError("sample " + s.id + " has no misaligned prior (dataset generated with delta = 0)");
  }
  RealGrid const &prior = misaligned ? *s.prior_misaligned : s.prior;

  if (cfg.method == "pls-tv") {
    return pls_tv(g, cfg.lambda, cfg.pd);
  }
  if (cfg.method == "wpiccs") {
    return wpiccs(g, prior, cfg.lambda, cfg.alpha, cfg.wavelet_levels, cfg.pd);
  }
  auto const adam = sample_adam(cfg, s);
  if (cfg.method == "csgm") {
    return csgm(g, gen, cfg.lambda_phi, adam, cfg.latent_space);
  }

  ExtendedLatent w_pi = misaligned ? *s.w_misaligned : s.w_pi;
  if (cfg.latent_source == "invert") {
    InvertOptions opt;
    opt.seed = derive_seed(cfg.seed, StreamPriorInv, s.index);
    w_pi = invert(gen, prior, std::nullopt, opt).w;
  }
  Index const k = gen.block_size();
  StyleConstraint c{cfg.p1 == 0 ? k : cfg.p1, cfg.p2 == 0 ? 2 * k + 1 : cfg.p2, std::move(w_pi)};
  auto res = picgm(g, gen, c, cfg.lambda_phi, adam);
  res.config.set("latent_source", cfg.latent_source);
  return res;
}

GridPoint select_best(std::vector<GridPoint> const &points)
{
  std::optional<GridPoint> best;
  for (auto const &p : points) {
    if (p.status != "ok") {
      continue;
    }
    if (!best || p.mse < best->mse || (p.mse == best->mse && (p.lambda < best->lambda ||
                                                                (p.lambda == best->lambda && p.alpha < best->alpha)))) {
      best = p;
    }
  }
  if (!best) {
    throw NumericalError("grid search: every grid point failed");
  }
  return *best;
}

GridSearchResult grid_search(Dataset const &d, ExperimentConfig const &cfg)
{
  cfg.validate();
  bool const latent = is_latent_method(cfg.method);
  auto const &lambdas = latent ? cfg.lambda_phi_grid : cfg.lambda_grid;
  std::vector<double> const alphas = cfg.method == "wpiccs" ? cfg.alpha_grid : std::vector<double>{0.0};
  if (lambdas.empty() || alphas.empty()) {
    throw ParameterError("grid search needs non-empty grids");
  }
  PhantomGenerator const gen(d.generator);
  auto const g = simulate_sample(d.validation, cfg);

  GridSearchResult r;
  for (double lam : lambdas) {
    for (double al : alphas) {
      r.points.push_back({lam, al, 0.0, "ok"});
    }
  }
  parallel_for(r.points.size(), cfg.threads, [&](std::size_t i) {
    auto &p = r.points[i];
    auto const run = apply_best(cfg, p);
    try {
      auto const res = reconstruct_sample(d.validation, g, gen, run);
      double const e = rmse(res.image, d.validation.truth);
      p.mse = e * e;
    } catch (NumericalError const &e) {
      p.mse = std::numeric_limits<double>::quiet_NaN();
      p.status = clean_field(std::string("failed: ") + e.what());
    }
  });
  r.best = select_best(r.points);
  return r;
}

std::string grid_csv(std::string const &method, GridSearchResult const &r)
{
  std::string out = "schema_version,method,lambda,alpha,mse,status\n";
  for (auto const &p : r.points) {
    out += std::to_string(CsvSchemaVersion) + "," + method + "," + format_double(p.lambda) + "," +
           format_double(p.alpha) + "," + format_double(p.mse) + "," + p.status + "\n";
  }
  return out;
}

ExperimentConfig apply_best(ExperimentConfig cfg, GridPoint const &best)
{
  if (is_latent_method(cfg.method)) {
    cfg.lambda_phi = best.lambda;
  } else {
    cfg.lambda = best.lambda;
    if (cfg.method == "wpiccs") {
      cfg.alpha = best.alpha;
    }
  }
  return cfg;
}

SuiteResult run_suite(Dataset const &d, ExperimentConfig const &cfg, std::optional<std::filesystem::path> const &out)
{
  cfg.validate();
  for (auto const &s : d.test) {
    if (s.id == d.validation.id) {
      throw ContractError("validation image " + s.id + " appears in the test set");
    }
  }
  PhantomGenerator const gen(d.generator);
  std::size_t const n = d.test.size();
  std::vector<MetricsRow> rows(n);
  std::vector<std::optional<ReconResult>> results(n);
  std::vector<KSpaceMeasurement> measurements(n);

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    auto const &s = d.test[i];
    auto &row = rows[i];
    row.image_id = s.id;
    row.method = cfg.method;
    row.R = cfg.R;
    row.snr_db = cfg.snr_db;
    row.prior = prior_label(cfg);
    row.seed = cfg.seed;
    measurements[i] = simulate_sample(s, cfg);
    try {
      auto res = reconstruct_sample(s, measurements[i], gen, cfg);
      row.rmse = rmse(res.image, s.truth);
      SsimParams sp;
      sp.range = dynamic_range(s.truth);
      row.ssim = ssim(res.image, s.truth, sp);
      row.wall_time_s = res.wall_time_s;
      results[i] = std::move(res);
    } catch (NumericalError const &e) {
      row.rmse = row.ssim = std::numeric_limits<double>::quiet_NaN();
      row.status = clean_field(std::string("failed: ") + e.what());
    }
  });

  if (out) {
    auto const dir = *out;
    std::filesystem::create_directories(dir);
    write_file(dir / "metrics.csv", metrics_csv(rows));
    // wall-clock times vary between runs, so they stay out of the CSVs
    KeyValues timing;
    timing.set("method", cfg.method);
    for (auto const &r : rows) {
      timing.set("wall_time_s." + r.image_id, r.wall_time_s);
    }
    timing.save(dir / "timing.toml");
    cfg.to_kv().save(dir / "config.toml");
    for (std::size_t i = 0; i < n; i++) {
      auto const &s = d.test[i];
      write_measurement(dir / "measurements" / (s.id + ".tnsr"), measurements[i]);
      if (!results[i]) {
        continue;
      }
      auto const &res = *results[i];
      auto const base = dir / "recon" / s.id;
      write_grid(base.string() + ".tnsr", res.image);
      if (res.latent) {
        write_tensor(base.string() + "_latent.tnsr", latent_tensor(*res.latent));
      }
      write_file(base.string() + "_trace.csv", trace_csv(res.trace));
      res.config.save(base.string() + "_config.toml");
      RealGrid diff(s.truth.height(), s.truth.width());
      for (Index j = 0; j < diff.size(); j++) {
        diff[j] = std::abs(res.image[j] - s.truth[j]);
      }
      write_pgm16(dir / "images" / (s.id + "_recon.pgm"), res.image);
      write_pgm16(dir / "images" / (s.id + "_diff.pgm"), diff);
    }
  }
  return {std::move(rows)};
}

std::string metrics_csv(std::vector<MetricsRow> const &rows)
{
  std::string out = std::string(MetricsHeader) + "\n";
  for (auto const &r : rows) {
    out += std::to_string(CsvSchemaVersion) + "," + r.image_id + "," + r.method + "," + format_double(r.R) + "," +
           format_double(r.snr_db) + "," + r.prior + "," + format_double(r.rmse) + "," + format_double(r.ssim) + "," +
           std::to_string(r.seed) + "," + clean_field(r.status) + "\n";
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string const &text, std::string const &source)
{
  auto const lines = split_lines(text);
  if (lines.empty() || lines[0] != MetricsHeader) {
    throw IoError(source + ":1: expected header '" + MetricsHeader + "'");
  }
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < lines.size(); i++) {
    std::size_t const ln = i + 1;
    if (lines[i].empty()) {
      continue;
    }
    auto const f = split_csv_line(lines[i]);
    if (f.size() != 10) {
      throw IoError(source + ":" + std::to_string(ln) + ": expected 10 fields, found " + std::to_string(f.size()));
    }
    if (f[0] != std::to_string(CsvSchemaVersion)) {
      throw IoError(source + ":" + std::to_string(ln) + ": unsupported schema_version '" + f[0] + "'");
    }
    MetricsRow r;
    r.image_id = f[1];
    r.method = f[2];
    r.R = csv_number(f[3], source, ln, "R");
    r.snr_db = csv_number(f[4], source, ln, "snr_db");
    r.prior = f[5];
    r.rmse = csv_number(f[6], source, ln, "rmse");
    r.ssim = csv_number(f[7], source, ln, "ssim");
    r.seed = csv_u64(f[8], source, ln, "seed");
    r.status = f[9];
    rows.push_back(std::move(r));
  }
  return rows;
}

double quantile(std::vector<double> v, double q)
{
  if (v.empty()) {
    throw ContractError("quantile of an empty sample");
  }
  std::sort(v.begin(), v.end());
  double const pos = q * static_cast<double>(v.size() - 1);
  auto const lo = static_cast<std::size_t>(std::floor(pos));
  auto const hi = std::min(lo + 1, v.size() - 1);
  double const t = pos - static_cast<double>(lo);
  return v[lo] + t * (v[hi] - v[lo]);
}

std::vector<Aggregate> aggregate(std::vector<MetricsRow> const &rows)
{
  struct Acc
  {
    Aggregate a;
    std::vector<double> rmse, ssim;
  };
  std::vector<Acc> groups;
  for (auto const &r : rows) {
    if (r.status != "ok") {
      continue;
    }
    auto it = std::find_if(groups.begin(), groups.end(), [&](Acc const &g) {
      return g.a.method == r.method && g.a.R == r.R && g.a.snr_db == r.snr_db && g.a.prior == r.prior;
    });
    if (it == groups.end()) {
      Acc g;
      g.a.method = r.method;
      g.a.R = r.R;
      g.a.snr_db = r.snr_db;
      g.a.prior = r.prior;
      groups.push_back(std::move(g));
      it = groups.end() - 1;
    }
    it->rmse.push_back(r.rmse);
    it->ssim.push_back(r.ssim);
  }
  std::vector<Aggregate> out;
  for (auto &g : groups) {
    auto mean = [](std::vector<double> const &v) {
      double s = 0.0;
      for (double x : v) {
        s += x;
      }
      return s / static_cast<double>(v.size());
    };
    g.a.count = static_cast<int>(g.rmse.size());
    g.a.rmse_mean = mean(g.rmse);
    g.a.rmse_median = quantile(g.rmse, 0.5);
    g.a.rmse_iqr = quantile(g.rmse, 0.75) - quantile(g.rmse, 0.25);
    g.a.ssim_mean = mean(g.ssim);
    g.a.ssim_median = quantile(g.ssim, 0.5);
    g.a.ssim_iqr = quantile(g.ssim, 0.75) - quantile(g.ssim, 0.25);
    out.push_back(g.a);
  }
  return out;
}

std::string aggregate_csv(std::vector<Aggregate> const &a)
{
  std::string out =
      "schema_version,method,R,snr_db,prior,count,rmse_mean,rmse_median,rmse_iqr,ssim_mean,ssim_median,ssim_iqr\n";
  for (auto const &g : a) {
    out += std::to_string(CsvSchemaVersion) + "," + g.method + "," + format_double(g.R) + "," +
           format_double(g.snr_db) + "," + g.prior + "," + std::to_string(g.count) + "," + format_double(g.rmse_mean) +
           "," + format_double(g.rmse_median) + "," + format_double(g.rmse_iqr) + "," + format_double(g.ssim_mean) +
           "," + format_double(g.ssim_median) + "," + format_double(g.ssim_iqr) + "\n";
  }
  return out;
}

std::string aggregate_table(std::vector<Aggregate> const &a)
{
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %5s %6s %-10s %5s %10s %10s %10s %8s %8s %8s\n", "method", "R", "snr", "prior",
                "n", "rmse_mean", "rmse_med", "rmse_iqr", "ssim_mn", "ssim_md", "ssim_iqr");
  out += buf;
  bool misaligned = false;
  for (auto const &g : a) {
    std::snprintf(buf, sizeof buf, "%-8s %5g %6g %-10s %5d %10.5f %10.5f %10.5f %8.4f %8.4f %8.4f\n", g.method.c_str(),
                  g.R, g.snr_db, g.prior.c_str(), g.count, g.rmse_mean, g.rmse_median, g.rmse_iqr, g.ssim_mean,
                  g.ssim_median, g.ssim_iqr);
    out += buf;
    misaligned = misaligned || g.prior == "misaligned";
  }
  if (misaligned) {
    out += "\nmisaligned priors: geometry, structure and texture styles of the prior latent are perturbed by\n"
           "iid U(-delta, delta). This stands in for a prior acquired at an offset slice, which a 2-D phantom\n"
           "cannot represent directly.\n";
  }
  return out;
}

void write_pgm16(std::filesystem::path const &path, RealGrid const &f)
{
  auto const v = f.values();
  double lo = 0.0, hi = 0.0;
  if (!v.empty()) {
    auto const [a, b] = std::minmax_element(v.begin(), v.end());
    lo = *a;
    hi = *b;
  }
  std::string bytes = "P5\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n65535\n";
  for (double x : v) {
    double const t = hi > lo ? (x - lo) / (hi - lo) : 0.0;
    auto const q = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
    bytes.push_back(static_cast<char>(q >> 8));
    bytes.push_back(static_cast<char>(q & 0xff));
  }
  write_file(path, bytes);
  KeyValues kv;
  kv.set("kind", "pgm_window");
  kv.set("min", lo);
  kv.set("max", hi);
  kv.save(sidecar_path(path));
}

RealGrid read_pgm16(std::filesystem::path const &path)
{
  auto const bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      pos++;
    }
    std::size_t const start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      pos++;
    }
    return bytes.substr(start, pos - start);
  };
  auto number = [&](char const *what) {
    auto const t = token();
    long v = 0;
    auto const [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size() || v <= 0) {
      throw IoError(path.string() + ": bad PGM " + what + " '" + t + "'");
    }
    return v;
  };
  if (token() != "P5") {
    throw IoError(path.string() + ": not a binary PGM");
  }
  long const w = number("width");
  long const h = number("height");
  if (number("maxval") != 65535) {
    throw IoError(path.string() + ": expected a 16-bit PGM");
  }
  pos++; // single whitespace before the raster
  if (bytes.size() != pos + static_cast<std::size_t>(2 * w * h)) {
    throw IoError(path.string() + ": PGM raster has the wrong size");
  }
  double lo = 0.0, hi = 65535.0;
  if (std::filesystem::exists(sidecar_path(path))) {
    auto const kv = KeyValues::load(sidecar_path(path));
    lo = kv.get_double("min");
    hi = kv.get_double("max");
  }
  RealGrid f(h, w);
  for (Index i = 0; i < f.size(); i++) {
    auto const b0 = static_cast<unsigned char>(bytes[pos + 2 * i]);
    auto const b1 = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    f[i] = lo + (hi - lo) * static_cast<double>((b0 << 8) | b1) / 65535.0;
  }
  return f;
}

std::string trace_csv(std::vector<ObjectiveValue> const &trace)
{
  std::string out = "iteration,objective,data_fidelity,penalty\n";
  for (std::size_t i = 0; i < trace.size(); i++) {
    out += std::to_string(i) + "," + format_double(trace[i].total) + "," + format_double(trace[i].fidelity) + "," +
           format_double(trace[i].penalty) + "\n";
  }
  return out;
}

std::vector<std::string> self_check(std::filesystem::path const &dir)
{
  std::vector<std::string> issues;
  if (!std::filesystem::is_directory(dir)) {
    throw IoError(dir.string() + ": not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (auto const &e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (auto const &p : files) {
    auto const ext = p.extension().string();
    try {
      if (ext == ".tnsr") {
        auto const bytes = read_file(p);
        if (encode_tensor(decode_tensor(bytes)) != bytes) {
          issues.push_back(p.string() + ": tensor does not re-encode to the same bytes");
        }
        auto const side = sidecar_path(p);
        if (std::filesystem::exists(side)) {
          auto const kind = KeyValues::load(side).get_string("kind", "");
          if (kind == "measurement") {
            read_measurement(p);
          } else if (kind == "mask") {
            read_mask(p);
          }
        }
      } else if (ext == ".pgm") {
        read_pgm16(p);
      } else if (ext == ".toml" || ext == ".txt") {
        KeyValues::load(p);
      } else if (ext == ".sgen") {
        load_generator(p);
      } else if (ext == ".csv") {
        auto const text = read_file(p);
        if (text.rfind(MetricsHeader, 0) == 0) {
          parse_metrics_csv(text, p.string());
        } else {
          auto const lines = split_lines(text);
          if (lines.empty()) {
            issues.push_back(p.string() + ": empty CSV (header missing)");
            continue;
          }
          auto const cols = split_csv_line(lines[0]).size();
          for (std::size_t i = 1; i < lines.size(); i++) {
            if (split_csv_line(lines[i]).size() != cols) {
              issues.push_back(p.string() + ":" + std::to_string(i + 1) + ": field count differs from the header");
              break;
            }
          }
        }
      }
    } catch (std::exception const &e) {
      issues.push_back(p.string() + ": " + e.what());
    }
  }
  return issues;
}

} // namespace pic
