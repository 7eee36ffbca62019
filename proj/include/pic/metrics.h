#pragma once

#include "pic/grid.h"

namespace pic {

struct SsimParams
{
  int window = 11;      // Gaussian window size, odd
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;   // dynamic range of the reference image

  void validate() const;
};

// sqrt(mean((a - b)^2))
double rmse(RealGrid const &a, RealGrid const &b);

// Mean Gaussian-weighted local SSIM over the valid region (windows fully inside the image).
double ssim(RealGrid const &a, RealGrid const &b, SsimParams const &params);

// max - min of the image, used as the SSIM dynamic range.
double dynamic_range(RealGrid const &f);

} // namespace pic
