#pragma once

#include "pic/grid.h"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace pic {

// A differentiable map R^n -> R^m with a hand-derived vector-Jacobian product.
class DifferentiableOp
{
public:
  virtual ~DifferentiableOp() = default;
  virtual Index input_size() const = 0;
  virtual Index output_size() const = 0;
  virtual std::vector<double> forward(std::span<double const> x) const = 0;
  // J(x)^T * cotangent
  virtual std::vector<double> vjp(std::span<double const> x, std::span<double const> cotangent) const = 0;
};

// Wraps a pair of callables; handy for objectives and tests.
class LambdaOp final : public DifferentiableOp
{
public:
  using Forward = std::function<std::vector<double>(std::span<double const>)>;
  using Vjp = std::function<std::vector<double>(std::span<double const>, std::span<double const>)>;

  LambdaOp(Index in, Index out, Forward f, Vjp v);

  Index input_size() const override { return in_; }
  Index output_size() const override { return out_; }
  std::vector<double> forward(std::span<double const> x) const override { return f_(x); }
  std::vector<double> vjp(std::span<double const> x, std::span<double const> c) const override
  {
    return v_(x, c);
  }

private:
  Index in_, out_;
  Forward f_;
  Vjp v_;
};

// Shape-checked VJP. Throws ContractError when point or cotangent do not match the op.
std::vector<double> vjp_contract(DifferentiableOp const &op,
                                 std::span<double const> point,
                                 std::span<double const> cotangent);

struct GradCheckReport
{
  double max_relative_error = 0.0;
  int probe_count = 0;
};

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares <vjp(x, c), d> with <c, (op(x + h d) - op(x - h d)) / 2h> along `probes`
// random unit directions d and random unit cotangents c.
GradCheckReport finite_difference_check(DifferentiableOp const &op,
                                        std::span<double const> point,
                                        int probes,
                                        double step,
                                        std::uint64_t seed = 0x5eed);

} // namespace pic
