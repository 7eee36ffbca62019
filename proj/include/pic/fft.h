#pragma once

#include "pic/grid.h"

namespace pic {

// Unitary (1/sqrt(n)) 2D DFT with the zero frequency moved to index (h/2, w/2).
ComplexGrid fft2c(ComplexGrid const &x);
// Inverse of fft2c.
ComplexGrid ifft2c(ComplexGrid const &k);

// Unshifted unitary transforms (zero frequency at index 0).
ComplexGrid fft2u(ComplexGrid const &x);
ComplexGrid ifft2u(ComplexGrid const &k);

} // namespace pic
