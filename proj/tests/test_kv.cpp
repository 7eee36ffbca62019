#include "pic/error.h"
#include "pic/kv.h"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace pic;

TEST_CASE("key-value text with tables, comments and arrays")
{
  auto const kv = KeyValues::parse("# experiment\n"
                                   "method = \"picgm\"  # trailing\n"
                                   "R = 4\n"
                                   "lambda_grid = [1e-4, 0.01, 1]\n"
                                   "[adam]\n"
                                   "iters = 250\n"
                                   "step = 0.05\n");
  CHECK(kv.get_string("method") == "picgm");
  CHECK(kv.get_double("R") == 4.0);
  CHECK(kv.get_doubles("lambda_grid") == std::vector<double>{1e-4, 0.01, 1.0});
  CHECK(kv.get_int("adam.iters") == 250);
  CHECK(kv.get_double("adam.step") == 0.05);
  CHECK(kv.get_double("missing", 3.5) == 3.5);
  CHECK_THROWS_AS(kv.get_double("missing"), ParameterError);
  CHECK_THROWS_AS(kv.get_int("method"), ParameterError);
}

TEST_CASE("malformed key-value text reports the line")
{
  CHECK_THROWS_WITH_AS(KeyValues::parse("a = 1\nnot a pair\n"), doctest::Contains("line 2"), ParameterError);
  CHECK_THROWS_AS(KeyValues::parse("[broken\n"), ParameterError);
}

TEST_CASE("doubles survive a dump and parse round trip")
{
  KeyValues kv;
  double const vals[] = {0.1, 1.0 / 3.0, 1e-300, -2.5, 1e22, std::numeric_limits<double>::infinity()};
  for (int i = 0; i < 6; i++) {
    kv.set("v" + std::to_string(i), vals[i]);
  }
  kv.set("name", std::string("a \"quoted\" value"));
  auto const back = KeyValues::parse(kv.dump());
  for (int i = 0; i < 6; i++) {
    CHECK(back.get_double("v" + std::to_string(i)) == vals[i]);
  }
  CHECK(back.get_string("name") == "a \"quoted\" value");
  CHECK(format_double(2.0) == "2.0");
  CHECK(std::isnan(parse_double("nan")));
}
