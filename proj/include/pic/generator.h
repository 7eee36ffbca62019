#pragma once

#include "pic/adam.h"
#include "pic/grid.h"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace pic {

struct LatentZ
{
  std::vector<double> values;
  std::uint64_t seed = 0;
};

using StyleBlock = std::vector<double>;

// W+ latent: L stacked k-dimensional style blocks.
class ExtendedLatent
{
public:
  ExtendedLatent() = default;
  ExtendedLatent(Index k, Index layers, std::vector<double> values);

  Index block_size() const { return k_; }
  Index layers() const { return layers_; }
  Index size() const { return k_ * layers_; }
  std::span<double const> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::vector<double> const &vector() const { return values_; }
  StyleBlock block(Index l) const;
  void set_block(Index l, StyleBlock const &b);

  bool operator==(ExtendedLatent const &) const = default;

private:
  Index k_ = 0;
  Index layers_ = 0;
  std::vector<double> values_;
};

// Equality constraints w[1..p1] = w_pi[1..p1], w[p2..K] = w_pi[p2..K] (1-based, inclusive).
struct StyleConstraint
{
  Index p1 = 0;
  Index p2 = 0;
  ExtendedLatent w_pi;

  // 0-based indices of the unconstrained coordinates p1+1 .. p2-1.
  std::vector<Index> free_indices() const;
  std::vector<bool> constrained_mask() const;
};

// p1 must end a block and p2 must start one: p1 = a*k, p2 = b*k + 1, 1 <= p1 < p2 <= K,
// with at least one free coordinate between them.
void validate_split(Index p1, Index p2, Index k, Index K);
void validate(StyleConstraint const &c);

// Per-coordinate squashing: parameter = mid + half * tanh(style / scale).
struct RangeEntry
{
  double mid = 0.0;
  double half = 1.0;
  double scale = 1.0;
};

struct GaussianizationStats
{
  std::vector<double> mean;     // per style coordinate, shared by all blocks
  std::vector<double> variance;
  double slope = 5.0;           // inverse of the mapping network's leaky-ReLU slope
};

struct GeneratorParams
{
  Index k = 8;
  Index layers = 4;
  Index height = 64;
  Index width = 64;
  std::uint64_t master_seed = 0;
  double tau = 0.02;          // soft-edge width of region indicators
  double leak = 0.2;          // mapping network leaky-ReLU slope
  double output_gain = 4.0;   // slope of the output logistic
  // Mapping network, three k x k layers (two hidden plus output), row-major.
  std::array<std::vector<double>, 3> weights;
  std::array<std::vector<double>, 3> biases;
  std::vector<RangeEntry> ranges; // K entries
  GaussianizationStats stats;

  Index latent_size() const { return k * layers; }
};

struct GeneratorShape
{
  Index k = 8;
  Index layers = 4;
  Index height = 64;
  Index width = 64;
  double tau = 0.02;
};

// Builds mapping weights and range tables from the seed, then estimates the
// Gaussianization statistics from 10^4 mapped samples.
GeneratorParams make_generator(std::uint64_t master_seed, GeneratorShape const &shape = {});

void save_generator(std::filesystem::path const &path, GeneratorParams const &p);
GeneratorParams load_generator(std::filesystem::path const &path);

// Attribute slots of the procedural phantom. Block 1 geometry, block 2 contrast,
// block 3 interior structure, block 4 texture.
namespace slot {
enum : Index
{
  Cx, Cy, Ax, Ay, Theta, Rim, Band, Offset,
  Background, RimLevel, Cortex, Interior, Inclusion1, Inclusion2, Shade, TextureGain,
  U1, V1, A1, B1, U2, V2, A2, B2,
  Amp1, Orient1, Freq1, Phase1, Amp2, Orient2, Freq2, Phase2,
  Count
};
}

// Named attribute values decoded from a latent.
struct PhantomLayout
{
  std::array<double, slot::Count> p{};
};

// Region masks of the phantom, each in [0, 1].
struct RegionMasks
{
  RealGrid head, brain, deep, inclusion1, inclusion2;
};

// Abstract synthesis contract; a learned network can stand in for the phantom.
class Generator
{
public:
  virtual ~Generator() = default;
  virtual Index block_size() const = 0;
  virtual Index layers() const = 0;
  virtual Index height() const = 0;
  virtual Index width() const = 0;
  virtual RealGrid synthesize(ExtendedLatent const &w) const = 0;
  virtual std::vector<double> synthesize_vjp(ExtendedLatent const &w, RealGrid const &cotangent) const = 0;
  // broadcast(map_to_style(sample_z(seed)))
  virtual ExtendedLatent initial_latent(std::uint64_t seed) const = 0;
  virtual GaussianizationStats const &stats() const = 0;
  // Mapping network access for optimisation in Z.
  virtual LatentZ sample_latent_z(std::uint64_t seed) const = 0;
  virtual StyleBlock map_style(std::span<double const> z) const = 0;
  virtual std::vector<double> map_style_vjp(std::span<double const> z, std::span<double const> cotangent) const = 0;

  Index latent_size() const { return block_size() * layers(); }
};

class PhantomGenerator final : public Generator
{
public:
  explicit PhantomGenerator(GeneratorParams params);

  Index block_size() const override { return params_.k; }
  Index layers() const override { return params_.layers; }
  Index height() const override { return params_.height; }
  Index width() const override { return params_.width; }
  RealGrid synthesize(ExtendedLatent const &w) const override;
  std::vector<double> synthesize_vjp(ExtendedLatent const &w, RealGrid const &cotangent) const override;
  ExtendedLatent initial_latent(std::uint64_t seed) const override;
  GaussianizationStats const &stats() const override { return params_.stats; }
  LatentZ sample_latent_z(std::uint64_t seed) const override;
  StyleBlock map_style(std::span<double const> z) const override;
  std::vector<double> map_style_vjp(std::span<double const> z, std::span<double const> cotangent) const override;

  GeneratorParams const &params() const { return params_; }
  PhantomLayout decode(ExtendedLatent const &w) const;
  RegionMasks region_masks(ExtendedLatent const &w) const;
  // Latent index that drives a given attribute slot.
  Index latent_index(Index slot) const;

private:
  void check(ExtendedLatent const &w) const;
  GeneratorParams params_;
};

LatentZ sample_z(GeneratorParams const &params, std::uint64_t seed);
StyleBlock map_to_style(GeneratorParams const &params, LatentZ const &z);
ExtendedLatent broadcast(StyleBlock const &u, Index layers);
// Coordinates 1..p1 and p2..K from a, p1+1..p2-1 from b.
ExtendedLatent style_mix(ExtendedLatent const &a, ExtendedLatent const &b, Index p1, Index p2);

// phi(w) = sum over blocks and coordinates of (v - mean)^2 / variance, v the inverse leaky-ReLU of w.
double gaussianization_penalty(ExtendedLatent const &w, GaussianizationStats const &stats, std::span<double> grad = {});

struct InvertResult
{
  ExtendedLatent w;
  double residual = 0.0; // |G(w) - target|_2
  std::vector<ObjectiveValue> trace;
};

struct InvertOptions
{
  int iters = 800;
  double step = 0.05;
  double lambda_phi = 0.0;
  int restarts = 3;
  std::uint64_t seed = 1;
};

// Least-squares W+ inversion of an image, optionally restricted to a constraint set.
InvertResult invert(Generator const &gen, RealGrid const &target, std::optional<StyleConstraint> const &constraint,
                    InvertOptions const &opt);

} // namespace pic
