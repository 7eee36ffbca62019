#pragma once

#include "pic/grid.h"

#include <vector>

namespace pic {

// Orthonormal Haar coefficients, flattened as LL first, then each level from coarse to
// fine with bands LH, HL, HH, every band row-major.
struct WaveletCoeffs
{
  Index height = 0;
  Index width = 0;
  int levels = 0;
  std::vector<double> flat;
};

// Largest legal level count for an image (log2 of the smaller side).
int max_levels(Index height, Index width);
// Requested levels clamped to log2(min(h, w)) - 1 (at least 1).
int effective_levels(int requested, Index height, Index width);

WaveletCoeffs dwt2(RealGrid const &f, int levels);
RealGrid idwt2(WaveletCoeffs const &c);

// Forward differences without wraparound: dx is h x (w-1), dy is (h-1) x w.
struct DiffField
{
  Index height = 0;
  Index width = 0;
  std::vector<double> dx;
  std::vector<double> dy;
};

DiffField finite_diff(RealGrid const &f);
RealGrid finite_diff_adjoint(DiffField const &d);
// Anisotropic TV, |dx|_1 + |dy|_1.
double tv_seminorm(RealGrid const &f);

struct WeightDiag
{
  std::vector<double> weights;
  double epsilon = 1.0;
};

// w_i = 1 / (|c_i| + epsilon)
WeightDiag update_weights(std::span<double const> coeffs, double epsilon);
// 1e-3 * max |c_i|, floored at 1e-8.
double default_epsilon(std::span<double const> coeffs);

} // namespace pic
