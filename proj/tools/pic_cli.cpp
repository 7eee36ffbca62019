#include "pic/error.h"
#include "pic/harness.h"
#include "pic/metrics.h"
#include "pic/tensor_io.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

using namespace pic;

namespace {

struct ConfigArgs
{
  std::string file;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App *cmd, ConfigArgs &a)
{
  cmd->add_option("--config", a.file, "TOML experiment config");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->allow_extras();
}

// Config file, then --key=value extras, then --seed.
ExperimentConfig load_config(CLI::App const *cmd, ConfigArgs const &a)
{
  KeyValues kv;
  if (!a.file.empty()) {
    kv = KeyValues::load(a.file);
  }
  for (auto const &arg : cmd->remaining()) {
    auto const eq = arg.find('=');
    if (arg.rfind("--", 0) != 0 || eq == std::string::npos) {
      throw ParameterError("unrecognised argument '" + arg + "' (overrides take the form --key=value)");
    }
    auto const key = arg.substr(2, eq - 2);
    kv.merge(KeyValues::parse(key + " = " + arg.substr(eq + 1)));
  }
  if (a.seed) {
    kv.set("seed", *a.seed);
  }
  auto const known = ExperimentConfig{}.to_kv();
  for (auto const &[key, value] : kv.raw()) {
    if (!known.has(key)) {
      throw ParameterError("unknown config key '" + key + "'");
    }
  }
  return ExperimentConfig::from_kv(kv);
}

int run(int argc, char **argv)
{
  CLI::App app{"Prior-image-constrained reconstruction toolkit"};
  app.require_subcommand(1);

  // phantom gen
  auto *phantom = app.add_subcommand("phantom", "phantom dataset tools");
  phantom->require_subcommand(1);
  auto *pgen = phantom->add_subcommand("gen", "generate the paired-contrast phantom dataset");
  std::string pg_out;
  DatasetSpec spec;
  pgen->add_option("--out", pg_out, "output directory")->required();
  pgen->add_option("--count", spec.count, "number of test images");
  pgen->add_option("--delta", spec.delta, "misalignment of the constrained styles");
  pgen->add_option("--generator-seed", spec.generator_seed, "generator master seed");
  pgen->add_option("--seed", spec.master_seed, "dataset master seed");

  // mask gen
  auto *mask = app.add_subcommand("mask", "sampling mask tools");
  mask->require_subcommand(1);
  auto *mgen = mask->add_subcommand("gen", "generate a Cartesian column mask");
  std::string m_out;
  Index m_h = 64, m_w = 64;
  double m_R = 4.0, m_cf = 0.08;
  std::uint64_t m_seed = 1;
  mgen->add_option("--out", m_out, "output TNSR path")->required();
  mgen->add_option("--height", m_h);
  mgen->add_option("--width", m_w);
  mgen->add_option("--R", m_R, "undersampling ratio");
  mgen->add_option("--center-fraction", m_cf);
  mgen->add_option("--seed", m_seed);

  // simulate
  auto *sim = app.add_subcommand("simulate", "simulate a noisy k-space measurement of an image");
  std::string s_image, s_out, s_mask;
  double s_R = 4.0, s_cf = 0.08, s_snr = 20.0;
  std::uint64_t s_seed = 1, s_noise = 2;
  sim->add_option("--image", s_image, "image TNSR")->required();
  sim->add_option("--out", s_out, "measurement TNSR path")->required();
  sim->add_option("--mask", s_mask, "existing mask (otherwise generated)");
  sim->add_option("--R", s_R);
  sim->add_option("--center-fraction", s_cf);
  sim->add_option("--snr-db", s_snr);
  sim->add_option("--seed", s_seed, "mask seed");
  sim->add_option("--noise-seed", s_noise);

  // grid-search
  auto *grid = app.add_subcommand("grid-search", "tune a method on the validation image");
  ConfigArgs g_cfg;
  std::string g_data, g_out;
  grid->add_option("--dataset", g_data)->required();
  grid->add_option("--out", g_out)->required();
  add_config_options(grid, g_cfg);

  // reconstruct
  auto *rec = app.add_subcommand("reconstruct", "reconstruct one dataset image");
  ConfigArgs r_cfg;
  std::string r_data, r_out, r_id;
  rec->add_option("--dataset", r_data)->required();
  rec->add_option("--image-id", r_id, "image id, e.g. img000")->required();
  rec->add_option("--out", r_out)->required();
  add_config_options(rec, r_cfg);

  // run-suite
  auto *suite = app.add_subcommand("run-suite", "reconstruct every test image");
  ConfigArgs u_cfg;
  std::string u_data, u_out;
  suite->add_option("--dataset", u_data)->required();
  suite->add_option("--out", u_out)->required();
  add_config_options(suite, u_cfg);

  // report
  auto *rep = app.add_subcommand("report", "summarise metrics CSVs");
  std::vector<std::string> rep_in;
  std::string rep_out;
  rep->add_option("csv", rep_in, "metrics CSV files")->required();
  rep->add_option("--out", rep_out, "directory for aggregate.csv");

  // self-check
  auto *chk = app.add_subcommand("self-check", "re-read every artifact under a directory");
  std::string chk_dir;
  chk->add_option("dir", chk_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const code = app.exit(e);
    return code == 0 ? ExitOk : ExitParameter;
  }

  if (*pgen) {
    auto d = make_dataset(spec, make_generator(spec.generator_seed));
    write_dataset(pg_out, d);
    std::cout << "wrote " << d.test.size() << " test triples and validation image " << d.validation.id << " to "
              << pg_out << "\n";
  } else if (*mgen) {
    auto const m = generate_cartesian_mask(m_h, m_w, m_R, m_cf, m_seed);
    write_mask(m_out, m);
    std::cout << "kept " << m.kept_columns.size() << " of " << m_w << " columns\n";
  } else if (*sim) {
    auto const f = read_grid(s_image);
    auto const m = s_mask.empty() ? generate_cartesian_mask(f.height(), f.width(), s_R, s_cf, s_seed) : read_mask(s_mask);
    auto const g = simulate_measurement(f, m, s_snr, s_noise);
    write_measurement(s_out, g);
    std::cout << "m = " << g.values.size() << " samples\n";
  } else if (*grid) {
    auto const cfg = load_config(grid, g_cfg);
    auto const d = read_dataset(g_data);
    auto const r = grid_search(d, cfg);
    std::filesystem::create_directories(g_out);
    write_file(std::filesystem::path(g_out) / "grid.csv", grid_csv(cfg.method, r));
    apply_best(cfg, r.best).to_kv().save(std::filesystem::path(g_out) / "best.toml");
    std::cout << "best lambda = " << format_double(r.best.lambda) << ", alpha = " << format_double(r.best.alpha)
              << ", mse = " << format_double(r.best.mse) << "\n";
  } else if (*rec) {
    auto const cfg = load_config(rec, r_cfg);
    auto const d = read_dataset(r_data);
    auto const it = std::find_if(d.test.begin(), d.test.end(), [&](Sample const &s) { return s.id == r_id; });
    if (it == d.test.end()) {
      throw ParameterError("no test image '" + r_id + "' in " + r_data);
    }
    PhantomGenerator const gen(d.generator);
    auto const g = simulate_sample(*it, cfg);
    auto const res = reconstruct_sample(*it, g, gen, cfg);
    std::filesystem::path const out(r_out);
    write_measurement(out / "measurement.tnsr", g);
    write_grid(out / "recon.tnsr", res.image);
    write_file(out / "trace.csv", trace_csv(res.trace));
    res.config.save(out / "config.toml");
    write_pgm16(out / "recon.pgm", res.image);
    SsimParams sp;
    sp.range = dynamic_range(it->truth);
    std::cout << "rmse = " << format_double(rmse(res.image, it->truth))
              << ", ssim = " << format_double(ssim(res.image, it->truth, sp)) << "\n";
  } else if (*suite) {
    auto const cfg = load_config(suite, u_cfg);
    auto const d = read_dataset(u_data);
    auto const r = run_suite(d, cfg, std::filesystem::path(u_out));
    std::cout << aggregate_table(aggregate(r.rows));
  } else if (*rep) {
    std::vector<MetricsRow> rows;
    for (auto const &p : rep_in) {
      auto part = parse_metrics_csv(read_file(p), p);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    auto const a = aggregate(rows);
    std::cout << aggregate_table(a);
    if (!rep_out.empty()) {
      write_file(std::filesystem::path(rep_out) / "aggregate.csv", aggregate_csv(a));
    }
  } else if (*chk) {
    auto const issues = self_check(chk_dir);
    for (auto const &i : issues) {
      std::cout << i << "\n";
    }
    if (!issues.empty()) {
      return ExitIo;
    }
    std::cout << "all artifacts re-read\n";
  }
  return ExitOk;
}

} // namespace

int main(int argc, char **argv)
{
  try {
    return run(argc, argv);
  } catch (ParameterError const &e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return ExitParameter;
  } catch (ContractError const &e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return ExitParameter;
  } catch (NumericalError const &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return ExitNumerical;
  } catch (IoError const &e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return ExitIo;
  } catch (std::filesystem::filesystem_error const &e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return ExitIo;
  }
}
