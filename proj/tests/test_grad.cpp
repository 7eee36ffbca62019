#include "helpers.h"

#include "pic/error.h"
#include "pic/fft.h"
#include "pic/grad.h"

#include <doctest.h>

#include <cmath>

using namespace pic;

namespace {

LambdaOp identity_op(Index n)
{
  return LambdaOp(
      n, n, [](std::span<double const> x) { return std::vector<double>(x.begin(), x.end()); },
      [](std::span<double const>, std::span<double const> c) { return std::vector<double>(c.begin(), c.end()); });
}

LambdaOp square_op(Index n)
{
  return LambdaOp(
      n, n,
      [](std::span<double const> x) {
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); i++) {
          y[i] = x[i] * x[i];
        }
        return y;
      },
      [](std::span<double const> x, std::span<double const> c) {
        std::vector<double> g(x.size());
        for (std::size_t i = 0; i < x.size(); i++) {
          g[i] = 2.0 * x[i] * c[i];
        }
        return g;
      });
}

// x -> |F x|^2 on an 8 x 8 image
LambdaOp dft_energy_op()
{
  return LambdaOp(
      64, 1,
      [](std::span<double const> x) {
        auto const k = fft2c(to_complex(RealGrid(8, 8, std::vector<double>(x.begin(), x.end()))));
        return std::vector<double>{norm2(k.values()) * norm2(k.values())};
      },
      [](std::span<double const> x, std::span<double const> c) {
        auto const k = fft2c(to_complex(RealGrid(8, 8, std::vector<double>(x.begin(), x.end()))));
        auto const back = real_part(ifft2c(k));
        std::vector<double> g(64);
        for (Index i = 0; i < 64; i++) {
          g[i] = 2.0 * back[i] * c[0];
        }
        return g;
      });
}

LambdaOp sum_sin_op(Index n, double grad_scale = 1.0)
{
  return LambdaOp(
      n, 1,
      [](std::span<double const> x) {
        double s = 0.0;
        for (double v : x) {
          s += std::sin(v);
        }
        return std::vector<double>{s};
      },
      [grad_scale](std::span<double const> x, std::span<double const> c) {
        std::vector<double> g(x.size());
        for (std::size_t i = 0; i < x.size(); i++) {
          g[i] = grad_scale * std::cos(x[i]) * c[0];
        }
        return g;
      });
}

} // namespace

TEST_CASE("vjp of the identity returns the cotangent")
{
  auto const op = identity_op(5);
  std::vector<double> const x{1, 2, 3, 4, 5};
  std::vector<double> const c{0.5, -1, 2, 0, 3};
  CHECK(vjp_contract(op, x, c) == c);
}

TEST_CASE("vjp of an elementwise square at 3 is 6")
{
  auto const op = square_op(1);
  std::vector<double> const x{3.0};
  std::vector<double> const c{1.0};
  CHECK(vjp_contract(op, x, c)[0] == 6.0);
}

TEST_CASE("gradient of the DFT energy is 2x")
{
  auto const op = dft_energy_op();
  auto const x = test::random_vector(64, 3);
  std::vector<double> const c{1.0};
  auto const g = vjp_contract(op, x, c);
  for (std::size_t i = 0; i < x.size(); i++) {
    CHECK(g[i] == doctest::Approx(2.0 * x[i]).epsilon(1e-12));
  }
}

TEST_CASE("vjp_contract rejects mismatched shapes")
{
  auto const op = identity_op(3);
  std::vector<double> const good{1, 2, 3};
  std::vector<double> const bad{1, 2};
  CHECK_THROWS_AS(vjp_contract(op, bad, good), ContractError);
  CHECK_THROWS_AS(vjp_contract(op, good, bad), ContractError);
}

TEST_CASE("finite differences are exact for linear maps")
{
  auto const rep = finite_difference_check(identity_op(10), test::random_vector(10, 1), 8, 0.3);
  CHECK(rep.probe_count == 8);
  CHECK(rep.max_relative_error <= 1e-10);
  auto const rep2 = finite_difference_check(dft_energy_op(), test::random_vector(64, 2), 8, 1e-4);
  CHECK(rep2.max_relative_error <= 1e-8);
}

TEST_CASE("finite differences on sum(sin x)")
{
  auto const rep = finite_difference_check(sum_sin_op(20), test::random_vector(20, 4, -3, 3), 8, 1e-4);
  CHECK(rep.max_relative_error <= 1e-6);
}

TEST_CASE("a gradient scaled by 2 is flagged")
{
  // |2d - d| / max(|2d|, |d|) = 1/2 for every probe
  auto const rep = finite_difference_check(sum_sin_op(20, 2.0), test::random_vector(20, 5, -3, 3), 8, 1e-4);
  CHECK(rep.max_relative_error == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(rep.max_relative_error > 1e-2);
}

TEST_CASE("finite_difference_check validates its inputs")
{
  auto const op = identity_op(3);
  std::vector<double> const x{1, 2, 3};
  CHECK_THROWS_AS(finite_difference_check(op, x, 0, 1e-4), ParameterError);
  CHECK_THROWS_AS(finite_difference_check(op, x, 4, 0.0), ParameterError);
  LambdaOp const bad(
      1, 1, [](std::span<double const> v) { return std::vector<double>{std::log(v[0])}; },
      [](std::span<double const> v, std::span<double const> c) { return std::vector<double>{c[0] / v[0]}; });
  std::vector<double> const at_zero{0.0};
  CHECK_THROWS_AS(finite_difference_check(bad, at_zero, 2, 1e-4), NumericalError);
}

TEST_CASE("vjp is linear in the cotangent")
{
  auto const op = square_op(16);
  auto const x = test::random_vector(16, 6);
  auto const c1 = test::random_vector(16, 7);
  auto const c2 = test::random_vector(16, 8);
  double const a = 0.7, b = -1.3;
  std::vector<double> mix(16);
  for (int i = 0; i < 16; i++) {
    mix[i] = a * c1[i] + b * c2[i];
  }
  auto const g = vjp_contract(op, x, mix);
  auto const g1 = vjp_contract(op, x, c1);
  auto const g2 = vjp_contract(op, x, c2);
  for (int i = 0; i < 16; i++) {
    CHECK(std::abs(g[i] - (a * g1[i] + b * g2[i])) <= 1e-12);
  }
}

TEST_CASE("relative error definition")
{
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == 0.5);
  CHECK(relative_error(0.0, 1e-9) == doctest::Approx(0.1));
}
