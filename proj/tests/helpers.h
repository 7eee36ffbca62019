#pragma once

#include "pic/grid.h"
#include "pic/rng.h"

#include <filesystem>
#include <string>
#include <vector>

namespace pic::test {

inline RealGrid random_grid(Index h, Index w, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
  Rng rng(seed);
  RealGrid g(h, w);
  for (Index i = 0; i < g.size(); i++) {
    g[i] = rng.uniform(lo, hi);
  }
  return g;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto &x : v) {
    x = rng.uniform(lo, hi);
  }
  return v;
}

inline std::vector<Cx> random_complex(std::size_t n, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<Cx> v(n);
  for (auto &x : v) {
    x = {rng.normal(), rng.normal()};
  }
  return v;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(std::string const &name)
{
  auto const p = std::filesystem::temp_directory_path() / ("pic_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace pic::test
