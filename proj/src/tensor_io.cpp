#include "pic/tensor_io.h"

#include "pic/error.h"
#include "le.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pic {

namespace {
constexpr char Magic[4] = {'T', 'N', 'S', 'R'};

} // namespace

std::size_t Tensor::element_count() const
{
  std::size_t n = 1;
  for (auto d : dims) {
    n *= d;
  }
  return n;
}

std::vector<double> const &Tensor::real() const
{
  if (auto const *p = std::get_if<0>(&payload)) {
    return *p;
  }
  throw IoError("TNSR: expected a real tensor, found complex");
}

std::vector<Cx> const &Tensor::complex() const
{
  if (auto const *p = std::get_if<1>(&payload)) {
    return *p;
  }
  throw IoError("TNSR: expected a complex tensor, found real");
}

std::string encode_tensor(Tensor const &t)
{
  if (t.dims.size() > 255) {
    throw ContractError("TNSR: too many dimensions");
  }
  std::size_t const n = t.element_count();
  std::string out(Magic, 4);
  le::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype()));
  le::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) {
    le::put<std::uint32_t>(out, d);
  }
  if (t.dtype() == DType::Real64) {
    auto const &v = t.real();
    if (v.size() != n) {
      throw ContractError("TNSR: payload length does not match dims");
    }
    for (double x : v) {
      le::put<double>(out, x);
    }
  } else {
    auto const &v = t.complex();
    if (v.size() != n) {
      throw ContractError("TNSR: payload length does not match dims");
    }
    for (auto const &z : v) {
      le::put<double>(out, z.real());
      le::put<double>(out, z.imag());
    }
  }
  return out;
}

Tensor decode_tensor(std::string const &bytes)
{
  if (bytes.size() < 6 || std::memcmp(bytes.data(), Magic, 4) != 0) {
    throw IoError("TNSR: bad magic");
  }
  std::size_t pos = 4;
  auto const tag = le::get<std::uint8_t>(bytes, pos);
  auto const ndim = le::get<std::uint8_t>(bytes, pos);
  Tensor t;
  for (int i = 0; i < ndim; i++) {
    t.dims.push_back(le::get<std::uint32_t>(bytes, pos));
  }
  std::size_t const n = t.element_count();
  if (tag == 0) {
    std::vector<double> v(n);
    for (auto &x : v) {
      x = le::get<double>(bytes, pos);
    }
    t.payload = std::move(v);
  } else if (tag == 1) {
    std::vector<Cx> v(n);
    for (auto &z : v) {
      double const re = le::get<double>(bytes, pos);
      double const im = le::get<double>(bytes, pos);
      z = Cx(re, im);
    }
    t.payload = std::move(v);
  } else {
    throw IoError("TNSR: unknown dtype tag " + std::to_string(tag));
  }
  if (pos != bytes.size()) {
    throw IoError("TNSR: trailing bytes after payload");
  }
  return t;
}

std::string read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(std::filesystem::path const &path, std::string const &bytes)
{
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

void write_tensor(std::filesystem::path const &path, Tensor const &t)
{
  write_file(path, encode_tensor(t));
}

Tensor read_tensor(std::filesystem::path const &path)
{
  try {
    return decode_tensor(read_file(path));
  } catch (IoError const &e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_grid(std::filesystem::path const &path, RealGrid const &g)
{
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(g.height()), static_cast<std::uint32_t>(g.width())};
  t.payload = g.vector();
  write_tensor(path, t);
}

RealGrid read_grid(std::filesystem::path const &path)
{
  auto t = read_tensor(path);
  if (t.dims.size() != 2) {
    throw IoError(path.string() + ": expected a 2D real tensor");
  }
  return RealGrid(t.dims[0], t.dims[1], t.real());
}

void write_vector(std::filesystem::path const &path, std::vector<double> const &v)
{
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.payload = v;
  write_tensor(path, t);
}

std::vector<double> read_vector(std::filesystem::path const &path)
{
  auto t = read_tensor(path);
  if (t.dims.size() != 1) {
    throw IoError(path.string() + ": expected a 1D real tensor");
  }
  return t.real();
}

void write_complex_vector(std::filesystem::path const &path, std::vector<Cx> const &v)
{
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.payload = v;
  write_tensor(path, t);
}

std::vector<Cx> read_complex_vector(std::filesystem::path const &path)
{
  auto t = read_tensor(path);
  if (t.dims.size() != 1) {
    throw IoError(path.string() + ": expected a 1D complex tensor");
  }
  return t.complex();
}

} // namespace pic
