#include "pic/sparsity.h"

#include "pic/error.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace pic {

namespace {

bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

int log2i(Index n)
{
  int l = 0;
  while ((Index{1} << (l + 1)) <= n) {
    l++;
  }
  return l;
}

void check_wavelet_shape(Index h, Index w, int levels)
{
  if (!is_pow2(h) || !is_pow2(w)) {
    throw ParameterError("wavelet transform needs power-of-two dimensions, got " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
  if (levels < 1 || levels > max_levels(h, w)) {
    throw ParameterError("wavelet level count " + std::to_string(levels) + " outside [1, " +
                         std::to_string(max_levels(h, w)) + "]");
  }
}

// Visits every coefficient position of the in-place (Mallat) layout in flat order.
template <typename F> void for_each_flat(Index h, Index w, int levels, F &&fn)
{
  std::size_t k = 0;
  Index const lh = h >> levels;
  Index const lw = w >> levels;
  for (Index r = 0; r < lh; r++) {
    for (Index c = 0; c < lw; c++) {
      fn(k++, r * w + c);
    }
  }
  for (int lev = levels; lev >= 1; lev--) {
    Index const bh = h >> lev;
    Index const bw = w >> lev;
    // LH: top-right, HL: bottom-left, HH: bottom-right
    Index const offsets[3][2] = {{0, bw}, {bh, 0}, {bh, bw}};
    for (auto const &o : offsets) {
      for (Index r = 0; r < bh; r++) {
        for (Index c = 0; c < bw; c++) {
          fn(k++, (o[0] + r) * w + o[1] + c);
        }
      }
    }
  }
}

} // namespace

int max_levels(Index height, Index width)
{
  return log2i(std::min(height, width));
}

int effective_levels(int requested, Index height, Index width)
{
  return std::max(1, std::min(requested, max_levels(height, width) - 1));
}

WaveletCoeffs dwt2(RealGrid const &f, int levels)
{
  Index const h = f.height();
  Index const w = f.width();
  check_wavelet_shape(h, w, levels);
  double const s = 1.0 / std::sqrt(2.0);
  std::vector<double> a(f.values().begin(), f.values().end());
  std::vector<double> tmp(static_cast<std::size_t>(std::max(h, w)));
  Index ch = h, cw = w;
  for (int lev = 0; lev < levels; lev++) {
    for (Index r = 0; r < ch; r++) {
      for (Index c = 0; c < cw / 2; c++) {
        double const x0 = a[r * w + 2 * c];
        double const x1 = a[r * w + 2 * c + 1];
        tmp[c] = s * (x0 + x1);
        tmp[cw / 2 + c] = s * (x0 - x1);
      }
      std::copy(tmp.begin(), tmp.begin() + cw, a.begin() + r * w);
    }
    for (Index c = 0; c < cw; c++) {
      for (Index r = 0; r < ch / 2; r++) {
        double const x0 = a[(2 * r) * w + c];
        double const x1 = a[(2 * r + 1) * w + c];
        tmp[r] = s * (x0 + x1);
        tmp[ch / 2 + r] = s * (x0 - x1);
      }
      for (Index r = 0; r < ch; r++) {
        a[r * w + c] = tmp[r];
      }
    }
    ch /= 2;
    cw /= 2;
  }
  WaveletCoeffs out{h, w, levels, std::vector<double>(a.size())};
  for_each_flat(h, w, levels, [&](std::size_t k, Index pos) { out.flat[k] = a[pos]; });
  return out;
}

RealGrid idwt2(WaveletCoeffs const &c)
{
  Index const h = c.height;
  Index const w = c.width;
  check_wavelet_shape(h, w, c.levels);
  if (static_cast<Index>(c.flat.size()) != h * w) {
    throw ContractError("idwt2: coefficient count does not match the image size");
  }
  std::vector<double> a(c.flat.size());
  for_each_flat(h, w, c.levels, [&](std::size_t k, Index pos) { a[pos] = c.flat[k]; });
  double const s = 1.0 / std::sqrt(2.0);
  std::vector<double> tmp(static_cast<std::size_t>(std::max(h, w)));
  for (int lev = c.levels - 1; lev >= 0; lev--) {
    Index const ch = h >> lev;
    Index const cw = w >> lev;
    for (Index col = 0; col < cw; col++) {
      for (Index r = 0; r < ch / 2; r++) {
        double const lo = a[r * w + col];
        double const hi = a[(ch / 2 + r) * w + col];
        tmp[2 * r] = s * (lo + hi);
        tmp[2 * r + 1] = s * (lo - hi);
      }
      for (Index r = 0; r < ch; r++) {
        a[r * w + col] = tmp[r];
      }
    }
    for (Index r = 0; r < ch; r++) {
      for (Index col = 0; col < cw / 2; col++) {
        double const lo = a[r * w + col];
        double const hi = a[r * w + cw / 2 + col];
        tmp[2 * col] = s * (lo + hi);
        tmp[2 * col + 1] = s * (lo - hi);
      }
      std::copy(tmp.begin(), tmp.begin() + cw, a.begin() + r * w);
    }
  }
  return RealGrid(h, w, std::move(a));
}

DiffField finite_diff(RealGrid const &f)
{
  Index const h = f.height();
  Index const w = f.width();
  DiffField d{h, w, std::vector<double>(static_cast<std::size_t>(h * (w - 1))),
              std::vector<double>(static_cast<std::size_t>((h - 1) * w))};
  for (Index r = 0; r < h; r++) {
    for (Index c = 0; c + 1 < w; c++) {
      d.dx[r * (w - 1) + c] = f(r, c + 1) - f(r, c);
    }
  }
  for (Index r = 0; r + 1 < h; r++) {
    for (Index c = 0; c < w; c++) {
      d.dy[r * w + c] = f(r + 1, c) - f(r, c);
    }
  }
  return d;
}

RealGrid finite_diff_adjoint(DiffField const &d)
{
  Index const h = d.height;
  Index const w = d.width;
  if (static_cast<Index>(d.dx.size()) != h * (w - 1) || static_cast<Index>(d.dy.size()) != (h - 1) * w) {
    throw ContractError("finite_diff_adjoint: difference field has inconsistent shapes");
  }
  RealGrid g(h, w);
  for (Index r = 0; r < h; r++) {
    for (Index c = 0; c + 1 < w; c++) {
      double const v = d.dx[r * (w - 1) + c];
      g(r, c) -= v;
      g(r, c + 1) += v;
    }
  }
  for (Index r = 0; r + 1 < h; r++) {
    for (Index c = 0; c < w; c++) {
      double const v = d.dy[r * w + c];
      g(r, c) -= v;
      g(r + 1, c) += v;
    }
  }
  return g;
}

double tv_seminorm(RealGrid const &f)
{
  auto const d = finite_diff(f);
  return sum_abs(d.dx) + sum_abs(d.dy);
}

WeightDiag update_weights(std::span<double const> coeffs, double epsilon)
{
  if (!(epsilon > 0.0)) {
    throw ParameterError("reweighting epsilon must be positive");
  }
  WeightDiag w{std::vector<double>(coeffs.size()), epsilon};
  for (std::size_t i = 0; i < coeffs.size(); i++) {
    w.weights[i] = 1.0 / (std::abs(coeffs[i]) + epsilon);
  }
  return w;
}

double default_epsilon(std::span<double const> coeffs)
{
  double m = 0.0;
  for (double c : coeffs) {
    m = std::max(m, std::abs(c));
  }
  return std::max(1e-3 * m, 1e-8);
}

} // namespace pic
