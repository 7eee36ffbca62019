#include "pic/grid.h"

#include "pic/error.h"

#include <cmath>
#include <string>

namespace pic {

namespace {
void check_dims(Index height, Index width)
{
  if (height <= 0 || width <= 0) {
    throw ContractError("grid dimensions must be positive");
  }
}
} // namespace

RealGrid::RealGrid(Index height, Index width, double fill)
    : height_{height}
    , width_{width}
{
  check_dims(height, width);
  if (!std::isfinite(fill)) {
    throw ContractError("grid fill value is not finite");
  }
  data_.assign(static_cast<std::size_t>(height * width), fill);
}

RealGrid::RealGrid(Index height, Index width, std::vector<double> data)
    : height_{height}
    , width_{width}
    , data_{std::move(data)}
{
  check_dims(height, width);
  if (static_cast<Index>(data_.size()) != height * width) {
    throw ContractError("grid data length does not match height*width");
  }
  for (std::size_t i = 0; i < data_.size(); i++) {
    if (!std::isfinite(data_[i])) {
      throw ContractError("grid entry " + std::to_string(i) + " is not finite");
    }
  }
}

bool RealGrid::same_shape(RealGrid const &other) const
{
  return height_ == other.height_ && width_ == other.width_;
}

ComplexGrid::ComplexGrid(Index height, Index width, Cx fill)
    : height_{height}
    , width_{width}
{
  check_dims(height, width);
  data_.assign(static_cast<std::size_t>(height * width), fill);
}

ComplexGrid::ComplexGrid(Index height, Index width, std::vector<Cx> data)
    : height_{height}
    , width_{width}
    , data_{std::move(data)}
{
  check_dims(height, width);
  if (static_cast<Index>(data_.size()) != height * width) {
    throw ContractError("complex grid data length does not match height*width");
  }
  for (auto const &z : data_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw ContractError("complex grid entry is not finite");
    }
  }
}

ComplexGrid to_complex(RealGrid const &f)
{
  ComplexGrid z(f.height(), f.width());
  for (Index i = 0; i < f.size(); i++) {
    z[i] = f[i];
  }
  return z;
}

RealGrid real_part(ComplexGrid const &z)
{
  RealGrid f(z.height(), z.width());
  for (Index i = 0; i < z.size(); i++) {
    f[i] = z[i].real();
  }
  return f;
}

double dot(std::span<double const> a, std::span<double const> b)
{
  if (a.size() != b.size()) {
    throw ContractError("dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); i++) {
    s += a[i] * b[i];
  }
  return s;
}

double norm2(std::span<double const> a)
{
  double s = 0.0;
  for (double x : a) {
    s += x * x;
  }
  return std::sqrt(s);
}

double norm2(std::span<Cx const> a)
{
  double s = 0.0;
  for (auto const &z : a) {
    s += std::norm(z);
  }
  return std::sqrt(s);
}

double real_dot(std::span<Cx const> a, std::span<Cx const> b)
{
  if (a.size() != b.size()) {
    throw ContractError("real_dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); i++) {
    s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  }
  return s;
}

double sum_abs(std::span<double const> a)
{
  double s = 0.0;
  for (double x : a) {
    s += std::abs(x);
  }
  return s;
}

void require_same_shape(RealGrid const &a, RealGrid const &b, char const *what)
{
  if (!a.same_shape(b)) {
    throw ContractError(std::string(what) + ": grid shape mismatch");
  }
}

RealGrid operator+(RealGrid const &a, RealGrid const &b)
{
  require_same_shape(a, b, "operator+");
  RealGrid out = a;
  for (Index i = 0; i < a.size(); i++) {
    out[i] += b[i];
  }
  return out;
}

RealGrid operator-(RealGrid const &a, RealGrid const &b)
{
  require_same_shape(a, b, "operator-");
  RealGrid out = a;
  for (Index i = 0; i < a.size(); i++) {
    out[i] -= b[i];
  }
  return out;
}

RealGrid operator*(double s, RealGrid const &a)
{
  RealGrid out = a;
  for (auto &x : out.values()) {
    x *= s;
  }
  return out;
}

} // namespace pic
