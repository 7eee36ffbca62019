#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace pic {

using Index = std::ptrdiff_t;
using Cx = std::complex<double>;

// Row-major real image, 64-bit. Entries are checked finite on construction from data.
class RealGrid
{
public:
  RealGrid() = default;
  RealGrid(Index height, Index width, double fill = 0.0);
  RealGrid(Index height, Index width, std::vector<double> data);

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index size() const { return height_ * width_; }

  double operator()(Index r, Index c) const { return data_[r * width_ + c]; }
  double &operator()(Index r, Index c) { return data_[r * width_ + c]; }
  double operator[](Index i) const { return data_[i]; }
  double &operator[](Index i) { return data_[i]; }

  std::span<double const> values() const { return data_; }
  std::span<double> values() { return data_; }
  std::vector<double> const &vector() const { return data_; }

  bool same_shape(RealGrid const &other) const;
  bool operator==(RealGrid const &other) const = default;

private:
  Index height_ = 0;
  Index width_ = 0;
  std::vector<double> data_;
};

class ComplexGrid
{
public:
  ComplexGrid() = default;
  ComplexGrid(Index height, Index width, Cx fill = {});
  ComplexGrid(Index height, Index width, std::vector<Cx> data);

  Index height() const { return height_; }
  Index width() const { return width_; }
  Index size() const { return height_ * width_; }

  Cx operator()(Index r, Index c) const { return data_[r * width_ + c]; }
  Cx &operator()(Index r, Index c) { return data_[r * width_ + c]; }
  Cx operator[](Index i) const { return data_[i]; }
  Cx &operator[](Index i) { return data_[i]; }

  std::span<Cx const> values() const { return data_; }
  std::span<Cx> values() { return data_; }

  bool operator==(ComplexGrid const &other) const = default;

private:
  Index height_ = 0;
  Index width_ = 0;
  std::vector<Cx> data_;
};

ComplexGrid to_complex(RealGrid const &f);
RealGrid real_part(ComplexGrid const &z);

double dot(std::span<double const> a, std::span<double const> b);
double norm2(std::span<double const> a);
double norm2(std::span<Cx const> a);
// Re<a, b> with the conjugate on a.
double real_dot(std::span<Cx const> a, std::span<Cx const> b);
double sum_abs(std::span<double const> a);

RealGrid operator+(RealGrid const &a, RealGrid const &b);
RealGrid operator-(RealGrid const &a, RealGrid const &b);
RealGrid operator*(double s, RealGrid const &a);

void require_same_shape(RealGrid const &a, RealGrid const &b, char const *what);

} // namespace pic
