#include "helpers.h"

#include "pic/error.h"
#include "pic/grid.h"
#include "pic/tensor_io.h"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace pic;

TEST_CASE("grids reject non-finite data and bad sizes")
{
  CHECK_THROWS_AS(RealGrid(2, 2, std::vector<double>{1, 2, 3}), ContractError);
  CHECK_THROWS_AS(RealGrid(1, 2, std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()}), ContractError);
  CHECK_THROWS_AS(ComplexGrid(1, 1, std::vector<Cx>{Cx(std::numeric_limits<double>::infinity(), 0)}), ContractError);
  RealGrid const g(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(g(1, 0) == 4.0);
  CHECK(g.size() == 6);
}

TEST_CASE("grid arithmetic")
{
  auto const a = test::random_grid(4, 5, 1);
  auto const b = test::random_grid(4, 5, 2);
  auto const s = a + b;
  auto const d = s - b;
  for (Index i = 0; i < a.size(); i++) {
    CHECK(d[i] == doctest::Approx(a[i]));
  }
  CHECK(norm2((2.0 * a).values()) == doctest::Approx(2.0 * norm2(a.values())));
  CHECK_THROWS_AS(a + RealGrid(5, 4), ContractError);
}

TEST_CASE("TNSR real round trip is bit exact")
{
  auto const dir = test::scratch_dir("tnsr");
  RealGrid g = test::random_grid(7, 5, 3);
  g[0] = -0.0;
  g[1] = std::numeric_limits<double>::denorm_min();
  write_grid(dir / "g.tnsr", g);
  auto const back = read_grid(dir / "g.tnsr");
  CHECK(back.height() == 7);
  CHECK(back.width() == 5);
  for (Index i = 0; i < g.size(); i++) {
    CHECK(std::signbit(back[i]) == std::signbit(g[i]));
    CHECK(back[i] == g[i]);
  }
  auto const bytes = read_file(dir / "g.tnsr");
  CHECK(bytes.substr(0, 4) == "TNSR");
  CHECK(static_cast<int>(bytes[4]) == 0);
  CHECK(static_cast<int>(bytes[5]) == 2);
  CHECK(bytes.size() == 4 + 1 + 1 + 2 * 4 + 35 * 8);
  CHECK(encode_tensor(decode_tensor(bytes)) == bytes);
}

TEST_CASE("TNSR complex round trip stores interleaved pairs")
{
  auto const v = test::random_complex(9, 4);
  auto const dir = test::scratch_dir("tnsrc");
  write_complex_vector(dir / "c.tnsr", v);
  CHECK(read_complex_vector(dir / "c.tnsr") == v);
  auto const bytes = read_file(dir / "c.tnsr");
  CHECK(static_cast<int>(bytes[4]) == 1);
  CHECK(bytes.size() == 4 + 1 + 1 + 4 + 9 * 16);
}

TEST_CASE("TNSR decoding rejects malformed input")
{
  Tensor t{{2, 2}, std::vector<double>{1, 2, 3, 4}};
  auto const bytes = encode_tensor(t);
  CHECK_THROWS_AS(decode_tensor("XXXX" + bytes.substr(4)), IoError);
  CHECK_THROWS_AS(decode_tensor(bytes.substr(0, bytes.size() - 1)), IoError);
  CHECK_THROWS_AS(decode_tensor(bytes + "x"), IoError);
  std::string bad_dtype = bytes;
  bad_dtype[4] = 7;
  CHECK_THROWS_AS(decode_tensor(bad_dtype), IoError);
  CHECK_THROWS_AS(read_file("/nonexistent/dir/file.tnsr"), IoError);
}
