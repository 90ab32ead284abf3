#include <doctest.h>

#include <cmath>

#include "swlrt/normal.hpp"

using namespace swlrt;

TEST_CASE("normal cdf at reference points") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-13));
  CHECK(norm_cdf(-1.959963984540054) == doctest::Approx(0.025).epsilon(1e-13));
  CHECK(norm_cdf(1.2815515655446004) == doctest::Approx(0.9).epsilon(1e-13));
}

TEST_CASE("normal quantile matches published values") {
  CHECK(std::fabs(norm_quantile(0.975) - 1.959963984540054) < 1e-12);
  CHECK(std::fabs(norm_quantile(0.9) - 1.2815515655446004) < 1e-12);
  CHECK(std::fabs(norm_quantile(0.5)) < 1e-15);
  CHECK(std::fabs(norm_quantile(0.025) + 1.959963984540054) < 1e-12);
}

TEST_CASE("quantile/cdf round trip") {
  for (double p = 0.0005; p < 1.0; p += 0.0132) {
    const double z = norm_quantile(p);
    CHECK(std::fabs(norm_cdf(z) - p) < 1e-13);
    CHECK(std::fabs(norm_quantile(1.0 - p) + z) < 1e-10);
  }
  // deep tails
  for (double p : {1e-8, 1e-12, 1e-15}) {
    CHECK(std::fabs(norm_cdf(norm_quantile(p)) - p) / p < 1e-9);
  }
}

TEST_CASE("quantile domain errors") {
  CHECK_THROWS_AS(norm_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(-0.5), std::domain_error);
}

TEST_CASE("p-value conventions") {
  const double z = -2.3;
  CHECK(one_sided_p(z) == doctest::Approx(norm_cdf(z)).epsilon(1e-15));
  CHECK(two_sided_p(z) ==
        doctest::Approx(2.0 * (1.0 - norm_cdf(2.3))).epsilon(1e-12));
  CHECK(two_sided_p(0.0) == doctest::Approx(1.0));
  CHECK(two_sided_p(9.0) >= 0.0);
  CHECK(two_sided_p(9.0) <= 1.0);
}
