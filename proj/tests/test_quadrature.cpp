#include "doctest.h"
#include "scatdeg/quadrature.hpp"

using namespace scatdeg;

TEST_CASE("Gauss-Kronrod on smooth and endpoint-singular integrands") {
  const auto a = integrate_gk<double>([](double x) { return std::sin(x); }, 0.0, kPi, 1e-14, 1e-14);
  CHECK(a.value == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(a.converged);
  // integrable log singularity at 0: int_0^1 ln x = -1
  const auto b = integrate_gk<double>([](double x) { return std::log(x); }, 0.0, 1.0, 1e-12, 1e-12);
  CHECK(b.value == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("semi-infinite integrals, scalar and vector") {
  const auto a = integrate_gk_to_infinity<double>([](double s) { return 1.0 / (1.0 + s * s); }, 0.0,
                                                  1.0, 1e-14, 1e-13);
  CHECK(a.value == doctest::Approx(kPi / 2).epsilon(1e-12));
  const auto v = integrate_gk_to_infinity<Vec>(
      [](double s) { return Vec(vec2(std::exp(-s), 2.0 / ((1 + s) * (1 + s)))); }, 0.0, 3.0, 1e-14,
      1e-13);
  CHECK(v.value(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.value(1) == doctest::Approx(2.0).epsilon(1e-12));
}
