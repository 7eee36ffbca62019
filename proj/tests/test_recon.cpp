#include "helpers.h"

#include "pic/error.h"
#include "pic/recon.h"
#include "pic/sparsity.h"

#include <doctest.h>

#include <cmath>

using namespace pic;

namespace {

PhantomGenerator const &gen()
{
  static PhantomGenerator const g(make_generator(7));
  return g;
}

double rel_err(RealGrid const &a, RealGrid const &b)
{
  return norm2((a - b).values()) / norm2(b.values());
}

KSpaceMeasurement noiseless(RealGrid const &f, double R)
{
  auto const m = R == 1.0 ? full_mask(f.height(), f.width()) : generate_cartesian_mask(f.height(), f.width(), R, 0.08, 3);
  return simulate_measurement(f, m, std::numeric_limits<double>::infinity(), 0);
}

RealGrid smooth_image(Index h, Index w, std::uint64_t seed)
{
  auto f = test::random_grid(h, w, seed, 0.0, 0.2);
  for (Index i = 0; i < h; i++) {
    for (Index j = 0; j < w; j++) {
      f(i, j) += (i > h / 4 && i < 3 * h / 4 && j > w / 3) ? 0.6 : 0.1;
    }
  }
  return f;
}

} // namespace

TEST_CASE("pls_tv without regularisation recovers fully sampled data")
{
  auto const f = smooth_image(32, 32, 1);
  PrimalDualConfig cfg;
  cfg.iters = 20;
  auto const r = pls_tv(noiseless(f, 1.0), 0.0, cfg);
  CHECK(rel_err(r.image, f) <= 1e-6);
  CHECK(r.trace.size() == 21);
}

TEST_CASE("pls_tv with a large weight flattens the image")
{
  auto const f = smooth_image(32, 32, 2);
  PrimalDualConfig cfg;
  cfg.iters = 5000;
  auto const r = pls_tv(noiseless(f, 1.0), 1e3, cfg);
  CHECK(tv_seminorm(r.image) <= 1e-3 * tv_seminorm(f));
}

TEST_CASE("pls_tv argument checks")
{
  auto const g = noiseless(smooth_image(16, 16, 3), 1.0);
  PrimalDualConfig cfg;
  CHECK_THROWS_AS(pls_tv(g, -1.0, cfg), ParameterError);
  cfg.iters = -1;
  CHECK_THROWS_AS(pls_tv(g, 0.1, cfg), ParameterError);
}

TEST_CASE("wpiccs with alpha 0 is exactly pls_tv")
{
  auto const f = smooth_image(32, 32, 4);
  auto const g = simulate_measurement(f, generate_cartesian_mask(32, 32, 4.0, 0.08, 5), 20.0, 6);
  PrimalDualConfig cfg;
  cfg.iters = 150;
  auto const a = pls_tv(g, 0.05, cfg);
  auto const b = wpiccs(g, smooth_image(32, 32, 9), 0.05, 0.0, 7, cfg);
  CHECK(a.image == b.image);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); t++) {
    CHECK(a.trace[t].total == b.trace[t].total);
  }
}

TEST_CASE("wpiccs with alpha 1 and an exact prior returns the prior")
{
  auto const f = smooth_image(32, 32, 5);
  PrimalDualConfig cfg;
  cfg.iters = 2000;
  auto const r = wpiccs(noiseless(f, 4.0), f, 0.1, 1.0, 7, cfg);
  CHECK(rel_err(r.image, f) <= 1e-6);
}

TEST_CASE("wpiccs argument checks")
{
  auto const g = noiseless(smooth_image(16, 16, 3), 1.0);
  PrimalDualConfig cfg;
  CHECK_THROWS_AS(wpiccs(g, RealGrid(16, 16), 0.1, 1.5, 7, cfg), ParameterError);
  CHECK_THROWS_AS(wpiccs(g, RealGrid(16, 16), -0.1, 0.5, 7, cfg), ParameterError);
  CHECK_THROWS_AS(wpiccs(g, RealGrid(16, 8), 0.1, 0.5, 7, cfg), ContractError);
}

TEST_CASE("wpiccs objective is non-increasing while the weights are frozen")
{
  auto const f = smooth_image(32, 32, 6);
  auto const g = simulate_measurement(f, generate_cartesian_mask(32, 32, 4.0, 0.08, 5), 20.0, 6);
  PrimalDualConfig cfg;
  cfg.iters = 400;
  auto const r = wpiccs(g, smooth_image(32, 32, 7), 0.1, 0.5, 7, cfg);
  int bad = 0;
  for (int t = 101; t <= cfg.iters; t++) {
    if (t % cfg.reweight_period != 0 && r.trace[t].total > r.trace[t - 1].total + 1e-9) {
      bad++;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("primal-dual configuration checks")
{
  PrimalDualConfig c;
  CHECK_NOTHROW(c.validate());
  c.primal_step = -1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.reweight_period = -1;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("data fidelity gradient passes finite-difference checks")
{
  auto const truth = gen().initial_latent(21);
  auto const g = simulate_measurement(gen().synthesize(truth), generate_cartesian_mask(64, 64, 4.0, 0.08, 2), 20.0, 3);
  auto const op = data_fidelity_op(gen(), g);
  for (std::uint64_t s = 0; s < 5; s++) {
    auto const w = gen().initial_latent(200 + s);
    CHECK(finite_difference_check(op, w.values(), 8, 1e-4, s).max_relative_error <= 1e-5);
  }
}

TEST_CASE("csgm with zero iterations returns the initial synthesis")
{
  auto const g = noiseless(gen().synthesize(gen().initial_latent(1)), 4.0);
  AdamConfig adam;
  adam.iters = 0;
  adam.restarts = 1;
  auto const r = csgm(g, gen(), 0.0, adam);
  CHECK(r.image == gen().synthesize(gen().initial_latent(csgm_restart_seed(adam.seed, 0))));
  CHECK(r.trace.size() == 1);
}

TEST_CASE("csgm fits an in-range image from full noiseless data")
{
  auto const f = gen().synthesize(gen().initial_latent(31));
  AdamConfig adam;
  auto const r = csgm(noiseless(f, 1.0), gen(), 0.0, adam);
  CHECK(r.trace.back().total <= r.trace.front().total);
  CHECK(rel_err(r.image, f) <= 0.05);
  auto const again = csgm(noiseless(f, 1.0), gen(), 0.0, adam);
  CHECK(again.image == r.image);
}

TEST_CASE("csgm in Z space")
{
  auto const f = gen().synthesize(gen().initial_latent(32));
  AdamConfig adam;
  adam.iters = 200;
  adam.restarts = 1;
  auto const r = csgm(noiseless(f, 4.0), gen(), 0.0, adam, LatentSpace::Z);
  CHECK(r.trace.back().total < r.trace.front().total);
  REQUIRE(r.latent);
  for (Index l = 1; l < 4; l++) {
    CHECK(r.latent->block(l) == r.latent->block(0));
  }
}

TEST_CASE("picgm keeps constrained coordinates and recovers in-range truth")
{
  auto const w_pi = gen().initial_latent(41);
  auto const w_star = style_mix(w_pi, gen().initial_latent(42), 8, 17);
  auto const f = gen().synthesize(w_star);
  StyleConstraint const c{8, 17, w_pi};
  AdamConfig adam;

  auto const exact = picgm(noiseless(gen().synthesize(w_pi), 4.0), gen(), c, 0.0, adam);
  CHECK(rel_err(exact.image, gen().synthesize(w_pi)) <= 1e-9);

  auto const g = simulate_measurement(f, generate_cartesian_mask(64, 64, 4.0, 0.08, 3), 20.0, 4);
  auto const r = picgm(g, gen(), c, 0.0, adam);
  REQUIRE(r.latent);
  for (Index i = 0; i < 32; i++) {
    if (i < 8 || i >= 16) {
      CHECK(r.latent->values()[i] == w_pi.values()[i]);
    }
  }
  CHECK(rel_err(r.image, f) <= 0.05);
  CHECK(data_fidelity(g, r.image) == doctest::Approx(r.data_fidelity).epsilon(1e-9));

  auto const again = picgm(g, gen(), c, 0.0, adam);
  CHECK(again.image == r.image);
  CHECK(*again.latent == *r.latent);
}

TEST_CASE("latent methods reject bad arguments")
{
  auto const g = noiseless(gen().synthesize(gen().initial_latent(1)), 4.0);
  AdamConfig adam;
  CHECK_THROWS_AS(csgm(g, gen(), -1.0, adam), ParameterError);
  StyleConstraint const bad{8, 16, gen().initial_latent(2)};
  CHECK_THROWS_AS(picgm(g, gen(), bad, 0.0, adam), ParameterError);
}
