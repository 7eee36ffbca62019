#include "pic/rng.h"

#include <cmath>
#include <limits>
#include <numbers>

namespace pic {

std::uint64_t mix_seed(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
  return mix_seed(mix_seed(mix_seed(master) ^ stream) + index);
}

Rng::Rng(std::uint64_t seed)
    : engine_{seed}
{
}

double Rng::uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi)
{
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::below(std::uint64_t n)
{
  std::uint64_t const limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double const u2 = uniform();
  double const r = std::sqrt(-2.0 * std::log(u1));
  double const t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

} // namespace pic
