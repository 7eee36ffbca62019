#pragma once

#include "pic/grid.h"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pic {

struct AdamConfig
{
  double step = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int iters = 1500;
  int restarts = 3;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ObjectiveValue
{
  double total = 0.0;
  double fidelity = 0.0;
  double penalty = 0.0;
};

// Evaluates the objective at x and writes the full gradient into grad.
using Objective = std::function<ObjectiveValue(std::span<double const> x, std::span<double> grad)>;

struct AdamRun
{
  std::vector<double> x;
  std::vector<ObjectiveValue> trace; // one entry per iterate, iters + 1 in total
};

// Adam over the listed coordinates only; all others keep their initial value.
AdamRun run_adam(Objective const &objective, std::vector<double> x0, AdamConfig const &cfg,
                 std::span<Index const> free);

// Adam over every coordinate followed by projection: constrained coordinates are reset
// to the anchor and their moment estimates zeroed after each step.
AdamRun run_projected_adam(Objective const &objective, std::vector<double> x0, AdamConfig const &cfg,
                           std::vector<bool> const &constrained, std::span<double const> anchor);

std::vector<Index> all_indices(Index n);

} // namespace pic
