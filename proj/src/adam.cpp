#include "pic/adam.h"

#include "pic/error.h"
#include "pic/kv.h"

#include <cmath>
#include <numeric>
#include <string>

namespace pic {

void AdamConfig::validate() const
{
  if (!(step > 0.0)) {
    throw ParameterError("adam step must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ParameterError("adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) {
    throw ParameterError("adam stability constant must be positive");
  }
  if (iters < 0) {
    throw ParameterError("adam iteration count must be non-negative");
  }
  if (restarts < 1) {
    throw ParameterError("adam needs at least one restart");
  }
}

std::vector<Index> all_indices(Index n)
{
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

namespace {

ObjectiveValue evaluate(Objective const &objective, std::vector<double> const &x, std::vector<double> &grad, int iter)
{
  auto const v = objective(x, grad);
  if (!std::isfinite(v.total)) {
    throw NumericalError("adam: objective is " + format_double(v.total) + " at iteration " + std::to_string(iter));
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw NumericalError("adam: non-finite gradient at iteration " + std::to_string(iter));
    }
  }
  return v;
}

} // namespace

AdamRun run_adam(Objective const &objective, std::vector<double> x0, AdamConfig const &cfg,
                 std::span<Index const> free)
{
  cfg.validate();
  AdamRun run;
  run.x = std::move(x0);
  std::vector<double> grad(run.x.size());
  std::vector<double> m(free.size(), 0.0);
  std::vector<double> v(free.size(), 0.0);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int t = 0; t <= cfg.iters; t++) {
    run.trace.push_back(evaluate(objective, run.x, grad, t));
    if (t == cfg.iters) {
      break;
    }
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t j = 0; j < free.size(); j++) {
      auto const i = static_cast<std::size_t>(free[j]);
      double const g = grad[i];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      double const mhat = m[j] / (1.0 - b1t);
      double const vhat = v[j] / (1.0 - b2t);
      run.x[i] -= cfg.step * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
  return run;
}

AdamRun run_projected_adam(Objective const &objective, std::vector<double> x0, AdamConfig const &cfg,
                           std::vector<bool> const &constrained, std::span<double const> anchor)
{
  cfg.validate();
  if (constrained.size() != x0.size() || anchor.size() != x0.size()) {
    throw ContractError("projected adam: constraint mask or anchor has the wrong length");
  }
  AdamRun run;
  run.x = std::move(x0);
  std::size_t const n = run.x.size();
  for (std::size_t i = 0; i < n; i++) {
    if (constrained[i]) {
      run.x[i] = anchor[i];
    }
  }
  std::vector<double> grad(n);
  std::vector<double> m(n, 0.0);
  std::vector<double> v(n, 0.0);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int t = 0; t <= cfg.iters; t++) {
    run.trace.push_back(evaluate(objective, run.x, grad, t));
    if (t == cfg.iters) {
      break;
    }
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t i = 0; i < n; i++) {
      double const g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      double const mhat = m[i] / (1.0 - b1t);
      double const vhat = v[i] / (1.0 - b2t);
      run.x[i] -= cfg.step * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    // projection onto the affine constraint set
    for (std::size_t i = 0; i < n; i++) {
      if (constrained[i]) {
        run.x[i] = anchor[i];
        m[i] = 0.0;
        v[i] = 0.0;
      }
    }
  }
  return run;
}

} // namespace pic
