#pragma once

#include <cstdint>
#include <random>

namespace pic {

// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

// Seeded generator whose outputs are bit-identical across standard libraries.
// std::mt19937_64 is fully specified; the distributions on top of it are not,
// so the conversions here are written out.
class Rng
{
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t bits() { return engine_(); }
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::uint64_t below(std::uint64_t n);   // [0, n), unbiased
  double normal();

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace pic
