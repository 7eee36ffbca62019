#include "pic/grad.h"

#include "pic/error.h"
#include "pic/rng.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace pic {

LambdaOp::LambdaOp(Index in, Index out, Forward f, Vjp v)
    : in_{in}
    , out_{out}
    , f_{std::move(f)}
    , v_{std::move(v)}
{
}

std::vector<double> vjp_contract(DifferentiableOp const &op,
                                 std::span<double const> point,
                                 std::span<double const> cotangent)
{
  if (static_cast<Index>(point.size()) != op.input_size()) {
    throw ContractError("vjp: point has length " + std::to_string(point.size()) + ", op expects " +
                        std::to_string(op.input_size()));
  }
  if (static_cast<Index>(cotangent.size()) != op.output_size()) {
    throw ContractError("vjp: cotangent has length " + std::to_string(cotangent.size()) +
                        ", op output is " + std::to_string(op.output_size()));
  }
  auto g = op.vjp(point, cotangent);
  if (static_cast<Index>(g.size()) != op.input_size()) {
    throw ContractError("vjp: op returned a gradient of the wrong length");
  }
  return g;
}

double relative_error(double analytic, double numeric)
{
  double const scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

namespace {
std::vector<double> random_unit(Rng &rng, Index n)
{
  std::vector<double> d(static_cast<std::size_t>(n));
  double nrm = 0.0;
  while (nrm == 0.0) {
    for (auto &x : d) {
      x = rng.normal();
    }
    nrm = norm2(d);
  }
  for (auto &x : d) {
    x /= nrm;
  }
  return d;
}
} // namespace

GradCheckReport finite_difference_check(DifferentiableOp const &op,
                                        std::span<double const> point,
                                        int probes,
                                        double step,
                                        std::uint64_t seed)
{
  if (!(step > 0.0)) {
    throw ParameterError("finite_difference_check: step must be positive");
  }
  if (probes < 1) {
    throw ParameterError("finite_difference_check: need at least one probe");
  }
  Rng rng(seed);
  GradCheckReport report;
  report.probe_count = probes;
  std::vector<double> xp(point.begin(), point.end());
  std::vector<double> xm(point.begin(), point.end());
  for (int p = 0; p < probes; p++) {
    auto const dir = random_unit(rng, op.input_size());
    std::vector<double> cot(static_cast<std::size_t>(op.output_size()), 1.0);
    if (op.output_size() > 1) {
      cot = random_unit(rng, op.output_size());
    }
    for (std::size_t i = 0; i < dir.size(); i++) {
      xp[i] = point[i] + step * dir[i];
      xm[i] = point[i] - step * dir[i];
    }
    auto const fp = op.forward(xp);
    auto const fm = op.forward(xm);
    double numeric = 0.0;
    for (std::size_t i = 0; i < cot.size(); i++) {
      if (!std::isfinite(fp[i]) || !std::isfinite(fm[i])) {
        throw NumericalError("finite_difference_check: non-finite output " + std::to_string(i) +
                             " at probe " + std::to_string(p));
      }
      numeric += cot[i] * (fp[i] - fm[i]);
    }
    numeric /= 2.0 * step;
    double const analytic = dot(vjp_contract(op, point, cot), dir);
    report.max_relative_error = std::max(report.max_relative_error, relative_error(analytic, numeric));
  }
  return report;
}

} // namespace pic
