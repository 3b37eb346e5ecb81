#include <cmath>
#include <vector>
#include <set>

#include "doctest.h"
#include "egpd/rng.hpp"

using egpd::Rng;

TEST_CASE("same seed and stream give the same sequence") {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams and seeds are distinct") {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (std::uint64_t stream = 0; stream < 20; ++stream) firsts.insert(Rng(seed, stream).next_u64());
  CHECK(firsts.size() == 400);
  CHECK(Rng::derive(1, 0) != Rng::derive(1, 1));
  CHECK(Rng::derive(1, 0) != Rng::derive(2, 0));
}

TEST_CASE("uniform lies in [0,1) with the right moments") {
  Rng r(7);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum2 / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("poisson mean and variance across both samplers") {
  for (double mean : {0.0, 0.3, 1.2, 4.0, 9.5, 10.5, 30.0, 250.0}) {
    CAPTURE(mean);
    Rng r(11, static_cast<std::uint64_t>(mean * 10));
    const int n = 100000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
      const double k = static_cast<double>(r.poisson(mean));
      sum += k;
      sum2 += k * k;
    }
    const double m = sum / n, var = sum2 / n - m * m;
    // Five standard errors of the sample mean.
    CHECK(std::fabs(m - mean) <= 5.0 * std::sqrt(std::max(mean, 1e-12) / n) + 1e-12);
    if (mean > 0) CHECK(var == doctest::Approx(mean).epsilon(0.05));
  }
}

TEST_CASE("poisson probabilities match the pmf for a small mean") {
  const double mean = 2.0;
  Rng r(5);
  const int n = 200000;
  std::vector<int> counts(12, 0);
  for (int i = 0; i < n; ++i) {
    const auto k = r.poisson(mean);
    if (k < counts.size()) ++counts[k];
  }
  double p = std::exp(-mean);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::fabs(counts[k] / static_cast<double>(n) - p) <= 5 * se + 1e-6);
    p *= mean / static_cast<double>(k + 1);
  }
}
