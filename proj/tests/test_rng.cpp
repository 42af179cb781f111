#include <cmath>
#include <vector>

#include "doctest.h"
#include "nestmax/rng.hpp"
#include "testutil.hpp"

using namespace nestmax;

TEST_CASE("rng streams are deterministic and key-separated") {
  RngStream a(42, 1, 2, 3), b(42, 1, 2, 3), c(42, 1, 2, 4);
  bool all_equal = true, any_equal_c = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_equal_c = any_equal_c || va == c.next_u64();
  }
  CHECK(all_equal);
  CHECK_FALSE(any_equal_c);
}

TEST_CASE("uniform stays in the open unit interval") {
  RngStream rng(7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal moments") {
  RngStream rng(11);
  const int n = 200000;
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  CHECK(std::abs(testutil::mean(x)) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(testutil::sd(x) - 1.0) < 0.01);
}

TEST_CASE("exponential mean") {
  RngStream rng(13);
  const int n = 100000;
  std::vector<double> x(n);
  for (auto& v : x) v = rng.exponential();
  CHECK(std::abs(testutil::mean(x) - 1.0) < 0.02);
}
