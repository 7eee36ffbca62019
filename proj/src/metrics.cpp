#include "pic/metrics.h"

#include "pic/error.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace pic {

namespace {

std::vector<double> gaussian_taps(int size, double sigma)
{
  int const r = size / 2;
  std::vector<double> t(static_cast<std::size_t>(size));
  double s = 0.0;
  for (int i = -r; i <= r; i++) {
    t[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    s += t[i + r];
  }
  for (auto &v : t) {
    v /= s;
  }
  return t;
}

// Separable filtering restricted to outputs whose window lies inside the image.
std::vector<double> filter_valid(std::vector<double> const &x, Index h, Index w, std::vector<double> const &taps)
{
  Index const n = static_cast<Index>(taps.size());
  Index const oh = h - n + 1;
  Index const ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * ow));
  for (Index r = 0; r < h; r++) {
    for (Index c = 0; c < ow; c++) {
      double s = 0.0;
      for (Index t = 0; t < n; t++) {
        s += taps[t] * x[r * w + c + t];
      }
      rows[r * ow + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (Index r = 0; r < oh; r++) {
    for (Index c = 0; c < ow; c++) {
      double s = 0.0;
      for (Index t = 0; t < n; t++) {
        s += taps[t] * rows[(r + t) * ow + c];
      }
      out[r * ow + c] = s;
    }
  }
  return out;
}

} // namespace

void SsimParams::validate() const
{
  if (window < 1 || window % 2 == 0) {
    throw ParameterError("ssim window size must be odd and positive, got " + std::to_string(window));
  }
  if (!(sigma > 0.0)) {
    throw ParameterError("ssim window sigma must be positive");
  }
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw ParameterError("ssim dynamic range must be positive and finite");
  }
}

double rmse(RealGrid const &a, RealGrid const &b)
{
  require_same_shape(a, b, "rmse");
  if (a.size() == 0) {
    throw ContractError("rmse: empty images");
  }
  double s = 0.0;
  for (Index i = 0; i < a.size(); i++) {
    double const d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

double dynamic_range(RealGrid const &f)
{
  auto const v = f.values();
  auto const [lo, hi] = std::minmax_element(v.begin(), v.end());
  return v.empty() ? 0.0 : *hi - *lo;
}

double ssim(RealGrid const &a, RealGrid const &b, SsimParams const &params)
{
  params.validate();
  if (!a.same_shape(b)) {
    throw ParameterError("ssim: image shapes differ");
  }
  Index const h = a.height();
  Index const w = a.width();
  if (h < params.window || w < params.window) {
    throw ParameterError("ssim: image smaller than the " + std::to_string(params.window) + "-pixel window");
  }
  auto const taps = gaussian_taps(params.window, params.sigma);
  std::vector<double> const x(a.values().begin(), a.values().end());
  std::vector<double> const y(b.values().begin(), b.values().end());
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); i++) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  auto const mx = filter_valid(x, h, w, taps);
  auto const my = filter_valid(y, h, w, taps);
  auto const mxx = filter_valid(xx, h, w, taps);
  auto const myy = filter_valid(yy, h, w, taps);
  auto const mxy = filter_valid(xy, h, w, taps);

  double const c1 = (params.k1 * params.range) * (params.k1 * params.range);
  double const c2 = (params.k2 * params.range) * (params.k2 * params.range);
  double s = 0.0;
  for (std::size_t i = 0; i < mx.size(); i++) {
    double const vx = mxx[i] - mx[i] * mx[i];
    double const vy = myy[i] - my[i] * my[i];
    double const cxy = mxy[i] - mx[i] * my[i];
    double const num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2);
    double const den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    s += num / den;
  }
  return s / static_cast<double>(mx.size());
}

} // namespace pic
