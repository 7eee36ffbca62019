#pragma once

#include "pic/grid.h"

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace pic {

// TNSR container: "TNSR", u8 dtype (0 real64, 1 complex as interleaved re,im float64),
// u8 ndim, ndim x u32 dims, then the little-endian payload.
enum class DType : std::uint8_t
{
  Real64 = 0,
  Complex64Pairs = 1,
};

struct Tensor
{
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<double>, std::vector<Cx>> payload;

  DType dtype() const { return payload.index() == 0 ? DType::Real64 : DType::Complex64Pairs; }
  std::size_t element_count() const;
  std::vector<double> const &real() const;
  std::vector<Cx> const &complex() const;
};

std::string encode_tensor(Tensor const &t);
Tensor decode_tensor(std::string const &bytes);

void write_tensor(std::filesystem::path const &path, Tensor const &t);
Tensor read_tensor(std::filesystem::path const &path);

void write_grid(std::filesystem::path const &path, RealGrid const &g);
RealGrid read_grid(std::filesystem::path const &path);
void write_vector(std::filesystem::path const &path, std::vector<double> const &v);
std::vector<double> read_vector(std::filesystem::path const &path);
void write_complex_vector(std::filesystem::path const &path, std::vector<Cx> const &v);
std::vector<Cx> read_complex_vector(std::filesystem::path const &path);

// Whole-file helpers shared by the other on-disk formats.
std::string read_file(std::filesystem::path const &path);
void write_file(std::filesystem::path const &path, std::string const &bytes);

} // namespace pic
