#pragma once

#include "pic/adam.h"
#include "pic/generator.h"
#include "pic/grad.h"
#include "pic/imaging.h"
#include "pic/kv.h"

#include <optional>
#include <string>
#include <vector>

namespace pic {

struct PrimalDualConfig
{
  // 0 selects the default; the dual step is shrunk so that
  // primal * dual * |K|^2 <= 1 for the stacked analysis operator K.
  double primal_step = 0.0;
  double dual_step = 0.0;
  int iters = 500;
  int reweight_period = 100;

  void validate() const;
};

enum class LatentSpace
{
  WPlus,
  Z,
};

struct ReconResult
{
  RealGrid image;
  std::optional<ExtendedLatent> latent;
  std::vector<ObjectiveValue> trace; // iterations + 1 entries
  double data_fidelity = 0.0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  int best_restart = 0;
  KeyValues config;
};

// |g - H f|^2
double data_fidelity(KSpaceMeasurement const &g, RealGrid const &f);

// |g - H G(w)|^2 + lambda_phi * phi(w) and its gradient with respect to w.
ObjectiveValue latent_objective(Generator const &gen, KSpaceMeasurement const &g, double lambda_phi,
                                ExtendedLatent const &w, std::span<double> grad);

// w -> |g - H G(w)|^2 as a differentiable op (scalar output).
LambdaOp data_fidelity_op(Generator const &gen, KSpaceMeasurement const &g);
LambdaOp gaussianization_op(GaussianizationStats const &stats, Index k, Index layers);
LambdaOp synthesize_op(Generator const &gen);

ReconResult pls_tv(KSpaceMeasurement const &g, double lambda, PrimalDualConfig const &cfg);

ReconResult wpiccs(KSpaceMeasurement const &g, RealGrid const &prior, double lambda, double alpha, int levels,
                   PrimalDualConfig const &cfg);

ReconResult csgm(KSpaceMeasurement const &g, Generator const &gen, double lambda_phi, AdamConfig const &adam,
                 LatentSpace space = LatentSpace::WPlus);

ReconResult picgm(KSpaceMeasurement const &g, Generator const &gen, StyleConstraint const &constraint,
                  double lambda_phi, AdamConfig const &adam);

// Seeds used by the latent methods for restart r.
std::uint64_t csgm_restart_seed(std::uint64_t seed, int restart);
std::uint64_t picgm_restart_seed(std::uint64_t seed, int restart);

} // namespace pic
