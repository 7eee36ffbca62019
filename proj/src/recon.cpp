#include "pic/recon.h"

#include "pic/error.h"
#include "pic/fft.h"
#include "pic/rng.h"
#include "pic/sparsity.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace pic {

namespace {

constexpr std::uint64_t StreamCsgm = 0x6373676d;  // "csgm"
constexpr std::uint64_t StreamPicgm = 0x7069636d; // "picm"

constexpr double TvNormSq = 8.0;      // |Phi|^2 bound for 2D forward differences
constexpr double WaveletNormSq = 1.0; // Psi is orthonormal

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Analysis-l1 terms handled by the primal-dual solver:
//   tv_weight * |Phi f|_1 + wavelet_weight * |W Psi (f - prior)|_1
struct AnalysisTerms
{
  double tv_weight = 0.0;
  double wavelet_weight = 0.0;
  RealGrid const *prior = nullptr;
  int levels = 1;
  bool reweight = false;
};

class PrimalDualSolver
{
public:
  PrimalDualSolver(KSpaceMeasurement const &g, AnalysisTerms const &terms, PrimalDualConfig const &cfg)
      : g_{g}
      , terms_{terms}
      , cfg_{cfg}
      , h_{g.mask.height}
      , w_{g.mask.width}
      , rhs_{adjoint(g.values, g.mask)}
      , colw_{normal_column_weights(g.mask)}
  {
    double norm_sq = 0.0;
    if (has_tv()) {
      norm_sq += TvNormSq;
    }
    if (has_wavelet()) {
      norm_sq += WaveletNormSq;
      if (!terms.prior || terms.prior->height() != h_ || terms.prior->width() != w_) {
        throw ContractError("wpiccs: prior image shape does not match the measurement");
      }
      prior_coeffs_ = dwt2(*terms.prior, terms.levels).flat;
      weights_.assign(prior_coeffs_.size(), 1.0);
    }
    tau_ = cfg.primal_step > 0.0 ? cfg.primal_step : (norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 1.0);
    sigma_ = cfg.dual_step > 0.0 ? cfg.dual_step : (norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 1.0);
    if (norm_sq > 0.0 && tau_ * sigma_ * norm_sq > 1.0) {
      sigma_ = 1.0 / (tau_ * norm_sq);
    }
  }

  ReconResult run()
  {
    RealGrid x = rhs_;
    RealGrid xbar = x;
    DiffField ytv{h_, w_, std::vector<double>(static_cast<std::size_t>(h_ * (w_ - 1)), 0.0),
                  std::vector<double>(static_cast<std::size_t>((h_ - 1) * w_), 0.0)};
    std::vector<double> yw(prior_coeffs_.size(), 0.0);

    // Monotone safeguard: the reported estimate is the best iterate under the current
    // weights, while the primal-dual state itself runs unmodified.
    RealGrid best = x;
    ObjectiveValue best_value = objective(best);

    ReconResult res;
    for (int t = 0; t <= cfg_.iters; t++) {
      if (has_wavelet() && terms_.reweight && cfg_.reweight_period > 0 && t > 0 && t % cfg_.reweight_period == 0) {
        auto c = dwt2(best, terms_.levels).flat;
        for (std::size_t i = 0; i < c.size(); i++) {
          c[i] -= prior_coeffs_[i];
        }
        weights_ = update_weights(c, default_epsilon(c)).weights;
        for (std::size_t i = 0; i < yw.size(); i++) {
          double const bound = terms_.wavelet_weight * weights_[i];
          yw[i] = std::clamp(yw[i], -bound, bound);
        }
        best_value = objective(best);
      }
      auto const current = objective(x);
      if (!std::isfinite(current.total)) {
        throw NumericalError("primal-dual solver diverged at iteration " + std::to_string(t) + " (objective " +
                             format_double(current.total) + ")");
      }
      if (current.total <= best_value.total) {
        best = x;
        best_value = current;
      }
      res.trace.push_back(best_value);
      if (t == cfg_.iters) {
        break;
      }

      RealGrid kty(h_, w_);
      if (has_tv()) {
        auto const d = finite_diff(xbar);
        double const bound = terms_.tv_weight;
        for (std::size_t i = 0; i < d.dx.size(); i++) {
          ytv.dx[i] = std::clamp(ytv.dx[i] + sigma_ * d.dx[i], -bound, bound);
        }
        for (std::size_t i = 0; i < d.dy.size(); i++) {
          ytv.dy[i] = std::clamp(ytv.dy[i] + sigma_ * d.dy[i], -bound, bound);
        }
        kty = finite_diff_adjoint(ytv);
      }
      if (has_wavelet()) {
        auto const c = dwt2(xbar, terms_.levels).flat;
        for (std::size_t i = 0; i < c.size(); i++) {
          double const bound = terms_.wavelet_weight * weights_[i];
          yw[i] = std::clamp(yw[i] + sigma_ * (c[i] - prior_coeffs_[i]), -bound, bound);
        }
        kty = kty + idwt2(WaveletCoeffs{h_, w_, terms_.levels, yw});
      }

      RealGrid v = x;
      for (Index i = 0; i < v.size(); i++) {
        v[i] -= tau_ * kty[i];
      }
      RealGrid xn = data_prox(v);
      for (Index i = 0; i < x.size(); i++) {
        xbar[i] = 2.0 * xn[i] - x[i];
      }
      x = std::move(xn);
    }
    res.data_fidelity = res.trace.back().fidelity;
    res.image = std::move(best);
    return res;
  }

private:
  bool has_tv() const { return terms_.tv_weight > 0.0; }
  bool has_wavelet() const { return terms_.wavelet_weight > 0.0; }

  // argmin_f |g - H f|^2 + |f - v|^2 / (2 tau), solved exactly in the Fourier domain.
  RealGrid data_prox(RealGrid const &v) const
  {
    ComplexGrid z(h_, w_);
    double const t2 = 2.0 * tau_;
    for (Index i = 0; i < v.size(); i++) {
      z[i] = v[i] + t2 * rhs_[i];
    }
    z = fft2u(z);
    for (Index r = 0; r < h_; r++) {
      for (Index c = 0; c < w_; c++) {
        z(r, c) /= 1.0 + t2 * colw_[static_cast<std::size_t>(c)];
      }
    }
    return real_part(ifft2u(z));
  }

  ObjectiveValue objective(RealGrid const &x) const
  {
    ObjectiveValue o;
    o.fidelity = data_fidelity(g_, x);
    if (has_tv()) {
      o.penalty += terms_.tv_weight * tv_seminorm(x);
    }
    if (has_wavelet()) {
      auto const c = dwt2(x, terms_.levels).flat;
      double s = 0.0;
      for (std::size_t i = 0; i < c.size(); i++) {
        s += weights_[i] * std::abs(c[i] - prior_coeffs_[i]);
      }
      o.penalty += terms_.wavelet_weight * s;
    }
    o.total = o.fidelity + o.penalty;
    return o;
  }

  KSpaceMeasurement const &g_;
  AnalysisTerms terms_;
  PrimalDualConfig cfg_;
  Index h_, w_;
  RealGrid rhs_;
  std::vector<double> colw_;
  std::vector<double> prior_coeffs_;
  std::vector<double> weights_;
  double tau_ = 1.0;
  double sigma_ = 1.0;
};

void echo_adam(KeyValues &kv, AdamConfig const &a)
{
  kv.set("adam_step", a.step);
  kv.set("adam_beta1", a.beta1);
  kv.set("adam_beta2", a.beta2);
  kv.set("adam_eps", a.epsilon);
  kv.set("adam_iters", a.iters);
  kv.set("adam_restarts", a.restarts);
  kv.set("seed", a.seed);
}

void echo_pd(KeyValues &kv, PrimalDualConfig const &c)
{
  kv.set("pd_primal_step", c.primal_step);
  kv.set("pd_dual_step", c.dual_step);
  kv.set("pd_iters", c.iters);
  kv.set("reweight_period", c.reweight_period);
}

void check_generator_measurement(Generator const &gen, KSpaceMeasurement const &g)
{
  if (gen.height() != g.mask.height || gen.width() != g.mask.width) {
    throw ContractError("generator image size does not match the measurement");
  }
}

struct Candidate
{
  std::vector<double> x;
  std::vector<ObjectiveValue> trace;
  int restart = 0;
};

// lowest final data fidelity, ties to the lowest restart index
bool better(Candidate const &a, std::optional<Candidate> const &best)
{
  return !best || a.trace.back().fidelity < best->trace.back().fidelity;
}

} // namespace

void PrimalDualConfig::validate() const
{
  if (primal_step < 0.0 || dual_step < 0.0 || !std::isfinite(primal_step) || !std::isfinite(dual_step)) {
    throw ParameterError("primal-dual steps must be non-negative");
  }
  if (iters < 0) {
    throw ParameterError("primal-dual iteration count must be non-negative");
  }
  if (reweight_period < 0) {
    throw ParameterError("reweight period must be non-negative");
  }
}

double data_fidelity(KSpaceMeasurement const &g, RealGrid const &f)
{
  auto const hf = forward(f, g.mask);
  double s = 0.0;
  for (std::size_t i = 0; i < hf.size(); i++) {
    s += std::norm(g.values[i] - hf[i]);
  }
  return s;
}

ObjectiveValue latent_objective(Generator const &gen, KSpaceMeasurement const &g, double lambda_phi,
                                ExtendedLatent const &w, std::span<double> grad)
{
  auto const img = gen.synthesize(w);
  auto hf = forward(img, g.mask);
  double fid = 0.0;
  for (std::size_t i = 0; i < hf.size(); i++) {
    hf[i] -= g.values[i];
    fid += std::norm(hf[i]);
  }
  auto const cot = 2.0 * adjoint(hf, g.mask);
  auto const gw = gen.synthesize_vjp(w, cot);
  std::copy(gw.begin(), gw.end(), grad.begin());
  double pen = 0.0;
  if (lambda_phi != 0.0) {
    std::vector<double> pg(grad.size());
    pen = gaussianization_penalty(w, gen.stats(), pg);
    for (std::size_t i = 0; i < grad.size(); i++) {
      grad[i] += lambda_phi * pg[i];
    }
  }
  return {fid + lambda_phi * pen, fid, lambda_phi * pen};
}

LambdaOp data_fidelity_op(Generator const &gen, KSpaceMeasurement const &g)
{
  Index const k = gen.block_size();
  Index const L = gen.layers();
  return LambdaOp(
      gen.latent_size(), 1,
      [&gen, &g, k, L](std::span<double const> x) {
        ExtendedLatent const w(k, L, std::vector<double>(x.begin(), x.end()));
        return std::vector<double>{data_fidelity(g, gen.synthesize(w))};
      },
      [&gen, &g, k, L](std::span<double const> x, std::span<double const> c) {
        ExtendedLatent const w(k, L, std::vector<double>(x.begin(), x.end()));
        std::vector<double> grad(x.size());
        latent_objective(gen, g, 0.0, w, grad);
        for (auto &v : grad) {
          v *= c[0];
        }
        return grad;
      });
}

LambdaOp gaussianization_op(GaussianizationStats const &stats, Index k, Index layers)
{
  return LambdaOp(
      k * layers, 1,
      [&stats, k, layers](std::span<double const> x) {
        ExtendedLatent const w(k, layers, std::vector<double>(x.begin(), x.end()));
        return std::vector<double>{gaussianization_penalty(w, stats)};
      },
      [&stats, k, layers](std::span<double const> x, std::span<double const> c) {
        ExtendedLatent const w(k, layers, std::vector<double>(x.begin(), x.end()));
        std::vector<double> grad(x.size());
        gaussianization_penalty(w, stats, grad);
        for (auto &v : grad) {
          v *= c[0];
        }
        return grad;
      });
}

LambdaOp synthesize_op(Generator const &gen)
{
  Index const k = gen.block_size();
  Index const L = gen.layers();
  Index const h = gen.height();
  Index const wd = gen.width();
  return LambdaOp(
      gen.latent_size(), h * wd,
      [&gen, k, L](std::span<double const> x) {
        return gen.synthesize(ExtendedLatent(k, L, std::vector<double>(x.begin(), x.end()))).vector();
      },
      [&gen, k, L, h, wd](std::span<double const> x, std::span<double const> c) {
        return gen.synthesize_vjp(ExtendedLatent(k, L, std::vector<double>(x.begin(), x.end())),
                                  RealGrid(h, wd, std::vector<double>(c.begin(), c.end())));
      });
}

ReconResult pls_tv(KSpaceMeasurement const &g, double lambda, PrimalDualConfig const &cfg)
{
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("pls-tv: lambda must be a finite non-negative number");
  }
  cfg.validate();
  auto const t0 = Clock::now();
  AnalysisTerms terms;
  terms.tv_weight = lambda;
  auto res = PrimalDualSolver(g, terms, cfg).run();
  res.wall_time_s = seconds_since(t0);
  res.config.set("method", "pls-tv");
  res.config.set("lambda", lambda);
  echo_pd(res.config, cfg);
  return res;
}

ReconResult wpiccs(KSpaceMeasurement const &g, RealGrid const &prior, double lambda, double alpha, int levels,
                   PrimalDualConfig const &cfg)
{
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("wpiccs: lambda must be a finite non-negative number");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("wpiccs: alpha must lie in [0, 1]");
  }
  cfg.validate();
  if (prior.height() != g.mask.height || prior.width() != g.mask.width) {
    throw ContractError("wpiccs: prior image shape does not match the measurement");
  }
  auto const t0 = Clock::now();
  AnalysisTerms terms;
  terms.tv_weight = lambda * (1.0 - alpha);
  terms.wavelet_weight = lambda * alpha;
  terms.prior = &prior;
  terms.levels = effective_levels(levels, prior.height(), prior.width());
  terms.reweight = true;
  auto res = PrimalDualSolver(g, terms, cfg).run();
  res.wall_time_s = seconds_since(t0);
  res.config.set("method", "wpiccs");
  res.config.set("lambda", lambda);
  res.config.set("alpha", alpha);
  res.config.set("wavelet_levels", terms.levels);
  echo_pd(res.config, cfg);
  return res;
}

std::uint64_t csgm_restart_seed(std::uint64_t seed, int restart)
{
  return derive_seed(seed, StreamCsgm, static_cast<std::uint64_t>(restart));
}

std::uint64_t picgm_restart_seed(std::uint64_t seed, int restart)
{
  return derive_seed(seed, StreamPicgm, static_cast<std::uint64_t>(restart));
}

ReconResult csgm(KSpaceMeasurement const &g, Generator const &gen, double lambda_phi, AdamConfig const &adam,
                 LatentSpace space)
{
  adam.validate();
  check_generator_measurement(gen, g);
  if (!(lambda_phi >= 0.0) || !std::isfinite(lambda_phi)) {
    throw ParameterError("csgm: lambda_phi must be a finite non-negative number");
  }
  auto const t0 = Clock::now();
  Index const k = gen.block_size();
  Index const L = gen.layers();

  Objective wplus = [&](std::span<double const> x, std::span<double> grad) {
    return latent_objective(gen, g, lambda_phi, ExtendedLatent(k, L, std::vector<double>(x.begin(), x.end())), grad);
  };
  Objective zspace = [&](std::span<double const> z, std::span<double> grad) {
    auto const w = broadcast(gen.map_style(z), L);
    std::vector<double> gw(static_cast<std::size_t>(w.size()));
    auto const v = latent_objective(gen, g, lambda_phi, w, gw);
    std::vector<double> gu(static_cast<std::size_t>(k), 0.0);
    for (Index l = 0; l < L; l++) {
      for (Index j = 0; j < k; j++) {
        gu[j] += gw[l * k + j];
      }
    }
    auto const gz = gen.map_style_vjp(z, gu);
    std::copy(gz.begin(), gz.end(), grad.begin());
    return v;
  };

  std::optional<Candidate> best;
  for (int r = 0; r < adam.restarts; r++) {
    std::uint64_t const seed = csgm_restart_seed(adam.seed, r);
    Candidate cand;
    cand.restart = r;
    if (space == LatentSpace::WPlus) {
      auto run = run_adam(wplus, gen.initial_latent(seed).vector(), adam, all_indices(gen.latent_size()));
      cand.x = std::move(run.x);
      cand.trace = std::move(run.trace);
    } else {
      auto run = run_adam(zspace, gen.sample_latent_z(seed).values, adam, all_indices(k));
      cand.x = broadcast(gen.map_style(run.x), L).vector();
      cand.trace = std::move(run.trace);
    }
    if (better(cand, best)) {
      best = std::move(cand);
    }
  }

  ReconResult res;
  ExtendedLatent w(k, L, std::move(best->x));
  res.image = gen.synthesize(w);
  res.latent = std::move(w);
  res.trace = std::move(best->trace);
  res.data_fidelity = res.trace.back().fidelity;
  res.best_restart = best->restart;
  res.seed = adam.seed;
  res.wall_time_s = seconds_since(t0);
  res.config.set("method", "csgm");
  res.config.set("lambda_phi", lambda_phi);
  res.config.set("latent_space", space == LatentSpace::WPlus ? "wplus" : "z");
  echo_adam(res.config, adam);
  return res;
}

ReconResult picgm(KSpaceMeasurement const &g, Generator const &gen, StyleConstraint const &constraint,
                  double lambda_phi, AdamConfig const &adam)
{
  adam.validate();
  validate(constraint);
  check_generator_measurement(gen, g);
  if (constraint.w_pi.block_size() != gen.block_size() || constraint.w_pi.layers() != gen.layers()) {
    throw ContractError("picgm: prior latent does not match the generator");
  }
  if (!(lambda_phi >= 0.0) || !std::isfinite(lambda_phi)) {
    throw ParameterError("picgm: lambda_phi must be a finite non-negative number");
  }
  auto const t0 = Clock::now();
  Index const k = gen.block_size();
  Index const L = gen.layers();
  auto const free = constraint.free_indices();

  Objective objective = [&](std::span<double const> x, std::span<double> grad) {
    return latent_objective(gen, g, lambda_phi, ExtendedLatent(k, L, std::vector<double>(x.begin(), x.end())), grad);
  };

  std::optional<Candidate> best;
  for (int r = 0; r < adam.restarts; r++) {
    // restart 0 starts the free styles at the prior's; later restarts draw them from the mapping network
    auto init = constraint.w_pi;
    if (r > 0) {
      init = style_mix(constraint.w_pi, gen.initial_latent(picgm_restart_seed(adam.seed, r)), constraint.p1,
                       constraint.p2);
    }
    auto run = run_adam(objective, init.vector(), adam, free);
    Candidate cand{std::move(run.x), std::move(run.trace), r};
    if (better(cand, best)) {
      best = std::move(cand);
    }
  }

  ReconResult res;
  ExtendedLatent w(k, L, std::move(best->x));
  res.image = gen.synthesize(w);
  res.latent = std::move(w);
  res.trace = std::move(best->trace);
  res.data_fidelity = res.trace.back().fidelity;
  res.best_restart = best->restart;
  res.seed = adam.seed;
  res.wall_time_s = seconds_since(t0);
  res.config.set("method", "picgm");
  res.config.set("lambda_phi", lambda_phi);
  res.config.set("p1", static_cast<std::int64_t>(constraint.p1));
  res.config.set("p2", static_cast<std::int64_t>(constraint.p2));
  echo_adam(res.config, adam);
  return res;
}

} // namespace pic
