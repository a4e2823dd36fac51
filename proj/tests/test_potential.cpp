#include <random>

#include "doctest.h"
#include "scatdeg/potential.hpp"

using namespace scatdeg;

namespace {

PotentialModel gaussian2(double A = 2.0, double sigma = 1.0) {
  return PotentialModel(2, {PotentialTerm::gaussian(A, sigma, vec2(0, 0))});
}

PotentialModel kepler2(double Z = 1.0, double alpha = 1.0) {
  return PotentialModel(2, {PotentialTerm::singular(Z, alpha, vec2(0, 0))});
}

// Independent radial oracle: largest r where max(|V|, |r V'|) reaches E/2.
double radial_virial_oracle(double (*v)(double), double (*rdv)(double), double E) {
  double hi = 1e3, lo = 1e-3;
  // scan downward for the outermost violation
  double r = hi;
  while (r > lo && std::max(std::abs(v(r)), std::abs(rdv(r))) < 0.5 * E) r /= 1.001;
  double a = r, b = r * 1.001;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    (std::max(std::abs(v(m)), std::abs(rdv(m))) >= 0.5 * E ? a : b) = m;
  }
  return b;
}

}  // namespace

TEST_CASE("eval matches closed forms") {
  const auto kep = kepler2();
  CHECK(kep.value(vec2(2, 0)) == doctest::Approx(-0.5).epsilon(1e-15));

  const auto empty = PotentialModel::free(2);
  const Evaluation e0 = empty.eval(vec2(0.3, -1.2));
  CHECK(e0.value == 0.0);
  CHECK(e0.grad.norm() == 0.0);

  const Evaluation eg = gaussian2().eval(vec2(0, 0));
  CHECK(eg.value == doctest::Approx(2.0));
  CHECK(eg.grad.norm() == 0.0);

  CHECK_THROWS_AS(kep.eval(vec2(0, 0)), Error);
  try {
    kep.eval(vec2(0, 0));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EvaluationAtSingularity);
  }
}

TEST_CASE("term construction validates parameters") {
  CHECK_THROWS_AS(PotentialTerm::singular(1.0, 2.0, vec2(0, 0)), Error);
  CHECK_THROWS_AS(PotentialTerm::singular(1.0, 0.0, vec2(0, 0)), Error);
  CHECK_THROWS_AS(PotentialTerm::gaussian(1.0, -1.0, vec2(0, 0)), Error);
  CHECK_THROWS_AS(PotentialModel(2, {PotentialTerm::gaussian(1.0, 1.0, vec3(0, 0, 0))}), Error);
  CHECK_THROWS_AS(PotentialModel(4, {}), Error);
}

TEST_CASE("poly bump has compact support") {
  const PotentialModel m(2, {PotentialTerm::poly(1.5, 2.0, vec2(1, 0))});
  CHECK(m.value(vec2(3.0, 0.0)) == 0.0);
  CHECK(m.value(vec2(1.0, 2.5)) == 0.0);
  CHECK(m.value(vec2(1.0, 0.0)) == doctest::Approx(1.5));
  CHECK(m.eval(vec2(3.0, 0.0)).grad.norm() == 0.0);
}

TEST_CASE("analytic gradients and hessians agree with central differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-4, 4);
  const std::vector<PotentialModel> models = {
      PotentialModel(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(0.5, -0.2)),
                         PotentialTerm::poly(1.0, 2.5, vec2(-1, 1)),
                         PotentialTerm::singular(0.7, 4.0 / 3.0, vec2(1, 1))}),
      PotentialModel(3, {PotentialTerm::gaussian(1.0, 0.7, vec3(0, 0, 1)),
                         PotentialTerm::singular(1.0, 1.0, vec3(0.2, 0, 0))}),
  };
  const double h = 1e-5;
  for (const auto& m : models) {
    const int d = m.dimension();
    int checked = 0;
    while (checked < 100) {
      Vec q(d);
      for (int i = 0; i < d; ++i) q(i) = U(rng);
      if (m.distance_to_singularity(q) < 0.1) continue;
      ++checked;
      const Evaluation ev = m.eval(q);
      const Mat H = m.hessian(q);
      for (int i = 0; i < d; ++i) {
        Vec dq = Vec::Zero(d);
        dq(i) = h;
        const double fd = (m.value(q + dq) - m.value(q - dq)) / (2 * h);
        CHECK(std::abs(fd - ev.grad(i)) <= 1e-6 * std::max(1.0, std::abs(ev.grad(i))));
        const Vec gd = (m.eval(q + dq).grad - m.eval(q - dq).grad) / (2 * h);
        for (int j = 0; j < d; ++j)
          CHECK(std::abs(gd(j) - H(j, i)) <= 1e-5 * std::max(1.0, std::abs(H(j, i))));
      }
    }
  }
}

TEST_CASE("vmax") {
  CHECK(PotentialModel::free(2).vmax() == 0.0);
  CHECK(gaussian2().vmax() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(kepler2().vmax() == 0.0);

  // two overlapping gaussians: brute-force grid at spacing 1e-3 along the axis
  // (the maximum lies on the symmetry axis y = 0)
  const PotentialModel two(2, {PotentialTerm::gaussian(1.5, 1.0, vec2(-1, 0)),
                               PotentialTerm::gaussian(1.5, 1.0, vec2(1, 0))});
  double grid_max = 0.0;
  for (double x = -3; x <= 3; x += 1e-3) grid_max = std::max(grid_max, two.value(vec2(x, 0)));
  CHECK(two.vmax() >= grid_max - 1e-9);
  CHECK(two.vmax() <= grid_max + 1e-5);
}

TEST_CASE("regularizable exponents") {
  CHECK(regularizable_index(1.0) == 1);
  CHECK(regularizable_index(4.0 / 3.0) == 2);
  CHECK(regularizable_index(1.5) == 3);
  CHECK_FALSE(regularizable_index(0.5).has_value());
  CHECK_FALSE(regularizable_index(1.2).has_value());
}

TEST_CASE("virial radius") {
  CHECK(virial_radius(PotentialModel::free(2), 0.7).radius == doctest::Approx(1.0));

  const VirialData kd = virial_radius(kepler2(), 1.0);
  CHECK(kd.radius == doctest::Approx(2.0 * kd.safety_factor).epsilon(1e-6));

  auto v = [](double r) { return 2.0 * std::exp(-r * r); };
  auto rdv = [](double r) { return -4.0 * r * r * std::exp(-r * r); };
  const double oracle = radial_virial_oracle(+v, +rdv, 1.0);
  const VirialData gd = virial_radius(gaussian2(), 1.0);
  CHECK(gd.radius / gd.safety_factor == doctest::Approx(oracle).epsilon(0.05));

  CHECK_THROWS_AS(virial_radius(gaussian2(), 0.0), Error);
  VirialConfig tight;
  tight.ceiling = 5.0;
  try {
    virial_radius(kepler2(), 1e-3, tight);
    FAIL("expected NoVirialRadius");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoVirialRadius);
  }
}

TEST_CASE("virial certificate survives denser resampling") {
  const std::vector<PotentialModel> models = {
      gaussian2(),
      kepler2(),
      PotentialModel(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(-3, 0)),
                         PotentialTerm::gaussian(2.0, 1.0, vec2(3, 0))}),
      PotentialModel(3, {PotentialTerm::gaussian(2.0, 1.0, vec3(0, 0, 0))}),
  };
  for (const auto& m : models) {
    for (double E : {0.5, 1.0, 3.0}) {
      const VirialData vd = virial_radius(m, E);
      const int dirs = 4 * (m.dimension() == 2 ? 256 : 1024);
      for (double f : {1.0, 1.3, 2.0, 10.0, 100.0})
        CHECK(virial_margin(m, E, f * vd.radius, dirs) < 0.0);
    }
  }
}

TEST_CASE("long-range decay proxy") {
  const std::vector<PotentialModel> models = {gaussian2(), kepler2(), kepler2(1.0, 4.0 / 3.0),
                                              PotentialModel(2, {PotentialTerm::poly(1.0, 2.0, vec2(0, 0))})};
  for (const auto& m : models) {
    const double R = virial_radius(m, 1.0).radius;
    double prev = std::numeric_limits<double>::infinity();
    for (double r = R; r <= 1e3 * R; r *= 2.0) {
      double sup = 0.0;
      for (const Vec& dir : sphere_directions(2, 64))
        for (double s = 1.0; s < 4.0; s *= 1.25) sup = std::max(sup, m.eval(r * s * dir).grad.norm());
      const double v = r * sup;
      CHECK(v <= prev + 1e-15);
      prev = v;
    }
    CHECK(prev < 1e-2);
  }
}

TEST_CASE("star-shaped sampling") {
  CHECK(star_shaped_sampled(gaussian2(), 5.0));
  CHECK(star_shaped_sampled(kepler2(), 5.0) == false);
  const PotentialModel off(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(2, 0))});
  CHECK_FALSE(star_shaped_sampled(off, 5.0));
}
