#include <random>
#include <sstream>

#include "doctest.h"
#include "scatdeg/scattering.hpp"

using namespace scatdeg;

namespace {

PotentialModel kepler(double Z = 1.0, double alpha = 1.0) {
  return PotentialModel(2, {PotentialTerm::singular(Z, alpha, vec2(0, 0))});
}
PotentialModel bump(double A = 2.0) { return PotentialModel(2, {PotentialTerm::gaussian(A, 1.0, vec2(0, 0))}); }

double angle_between(const Vec& a, const Vec& b) { return std::atan2(cross2<double>(a, b), a.dot(b)); }

// Rutherford: tan(chi/2) = Z / (2 E b), deflection toward the attracting center.
double kepler_chi(double Z, double E, double b) { return 2.0 * std::atan(Z / (2.0 * E * b)); }

}  // namespace

TEST_CASE("free scattering is the identity") {
  const auto m = PotentialModel::free(2);
  for (double b : {-3.0, 0.0, 0.7}) {
    const Vec th = unit_angle(0.4);
    const auto r = scatter_one(m, 1.3, th, impact_vector(th, b));
    CHECK(r.status == ScatterStatus::Scattered);
    CHECK((r.theta_out - th).norm() < 1e-12);
    CHECK(impact_scalar(r.theta_out, r.b_out) == doctest::Approx(b).epsilon(1e-10));
    CHECK(std::abs(r.theta_out.norm() - 1.0) < 1e-12);
    CHECK(std::abs(r.b_out.dot(r.theta_out)) < 1e-12);
  }
}

TEST_CASE("launch reproduces the requested asymptote") {
  // free flight: exact
  const ScatterContext free_ctx(PotentialModel::free(2), 1.0);
  const Vec th = unit_angle(1.1);
  const PhaseState x = free_ctx.launch_state(th, impact_vector(th, 2.0));
  CHECK((x.q - (-free_ctx.launch_radius() * th + impact_vector(th, 2.0))).norm() == 0.0);

  // gaussian: no force at the launch distance
  const ScatterContext g(bump(), 1.0);
  const PhaseState xg = g.launch_state(th, impact_vector(th, 2.0));
  CHECK(impact_scalar(th, xg.q) == doctest::Approx(2.0).epsilon(1e-15));

  // Kepler: reversing the launch state and extracting its asymptote recovers
  // (-theta, b); compare launch radii 10^2 and 10^3
  for (double R : {100.0, 1000.0}) {
    ScatterConfig cfg;
    cfg.launch_radius = R;
    const ScatterContext k(kepler(), 1.0, cfg);
    const Vec thk = vec2(1, 0);
    PhaseState xl = k.launch_state(thk, vec2(0, 2));
    xl.p = -xl.p;
    auto [dir, bvec] = k.asymptote(xl);
    CHECK((dir + thk).norm() < 1e-4);
    CHECK((bvec - vec2(0, 2)).norm() < 1e-4);
  }
  ScatterConfig bad;
  bad.launch_radius = 0.5;
  CHECK_THROWS_AS(ScatterContext(kepler(), 1.0, bad), Error);
}

TEST_CASE("Kepler deflection matches Rutherford") {
  const auto m = kepler();
  const Vec th = vec2(1, 0);
  const auto r = scatter_one(m, 0.5, th, impact_vector(th, 1.0));
  CHECK(r.status == ScatterStatus::Scattered);
  // attraction toward the center: positive b is bent clockwise
  CHECK(angle_between(th, r.theta_out) == doctest::Approx(-kPi / 2).epsilon(1e-4));
  CHECK(std::abs(angle_between(th, r.theta_out) + kPi / 2) < 1e-4);
}

TEST_CASE("head-on gaussian is reflected") {
  const auto r = scatter_one(bump(), 1.0, vec2(1, 0), vec2(0, 0));
  CHECK((r.theta_out + vec2(1, 0)).norm() < 1e-6);
}

TEST_CASE("small-angle Kepler limit at large impact parameter") {
  const ScatterContext ctx(kepler(), 1.0);
  const Vec th = vec2(1, 0);
  const auto r = ctx.scatter(th, impact_vector(th, 1e3));
  CHECK(std::abs(angle_between(th, r.theta_out)) <= 2e-3);
  CHECK(std::abs(angle_between(th, r.theta_out)) == doctest::Approx(kepler_chi(1, 1, 1e3)).epsilon(1e-4));
}

TEST_CASE("gaussian sweep closes up at both ends") {
  const ScatterContext ctx(bump(), 1.0);
  const Vec th = vec2(1, 0);
  std::vector<double> bs;
  for (int i = 0; i <= 40; ++i) bs.push_back(-5.0 + 0.25 * i);
  const auto map = final_direction_map(ctx, th, bs);
  CHECK(map.complete);
  CHECK_FALSE(map.discontinuous);
  CHECK(std::abs(angle_between(th, map.records.front().theta_out)) < 1e-6);
  CHECK(std::abs(angle_between(th, map.records.back().theta_out)) < 1e-6);
  for (std::size_t i = 0; i + 1 < map.records.size(); ++i)
    CHECK(std::abs(angle_between(map.records[i].theta_out, map.records[i + 1].theta_out)) <= kPi / 8);
  for (std::size_t i = 0; i + 1 < map.records.size(); ++i) CHECK(map.records[i].u < map.records[i + 1].u);
}

TEST_CASE("trapping scan") {
  SamplePlan plan;
  plan.directions = 2;
  plan.grid = 16;
  plan.random = 8;
  const auto free_rep = trapping_scan(PotentialModel::free(2), {0.5, 2.0}, plan);
  for (const auto& e : free_rep.entries) CHECK(e.classification == TrappingClass::NontrappingEvidence);

  const auto bump_rep = trapping_scan(bump(), {0.5, 1.0, 1.9}, plan);
  for (const auto& e : bump_rep.entries) {
    CHECK(e.classification == TrappingClass::NontrappingEvidence);
    CHECK(*e.hill == HillClass::SingleLoop);
  }

  const PotentialModel two(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(-3, 0)),
                               PotentialTerm::gaussian(2.0, 1.0, vec2(3, 0))});
  const auto two_rep = trapping_scan(two, {1.0}, plan);
  CHECK(two_rep.entries[0].classification == TrappingClass::TrappingDetected);
  CHECK(two_rep.entries[0].evidence == "hill_multi_component");
  CHECK(two_rep.entries[0].timeouts == 0);
  std::ostringstream os;
  write_scan_json(os, two_rep);
  CHECK(os.str().find("\"trapping_detected\"") != std::string::npos);
}

TEST_CASE("S_E is area preserving in (angle, b)") {
  const PotentialModel m(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(0.2, 0.1)),
                             PotentialTerm::gaussian(1.0, 0.6, vec2(-0.8, 0.5))});
  const ScatterContext ctx(m, 1.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ua(-kPi, kPi), ub(-2.5, 2.5);
  const double h = 1e-5;
  auto S = [&](double phi, double b) {
    const Vec th = unit_angle(phi);
    const auto r = ctx.scatter(th, impact_vector(th, b));
    return std::pair{std::atan2(r.theta_out(1), r.theta_out(0)), impact_scalar(r.theta_out, r.b_out)};
  };
  for (int k = 0; k < 20; ++k) {
    const double phi = ua(rng), b = ub(rng);
    auto [p1, b1] = S(phi + h, b);
    auto [p0, b0] = S(phi - h, b);
    auto [q1, c1] = S(phi, b + h);
    auto [q0, c0] = S(phi, b - h);
    const double dpp = wrap_angle(p1 - p0) / (2 * h), dbp = (b1 - b0) / (2 * h);
    const double dpb = wrap_angle(q1 - q0) / (2 * h), dbb = (c1 - c0) / (2 * h);
    CHECK(std::abs(dpp * dbb - dpb * dbp - 1.0) < 1e-3);
  }
}

TEST_CASE("rotation invariance of a central model") {
  const ScatterContext ctx(bump(), 1.0);
  for (double b : {0.3, 1.0, 2.2}) {
    const auto r0 = ctx.scatter(unit_angle(0.0), impact_vector(unit_angle(0.0), b));
    const auto r1 = ctx.scatter(unit_angle(2.0), impact_vector(unit_angle(2.0), b));
    const double d0 = angle_between(r0.theta_in, r0.theta_out);
    const double d1 = angle_between(r1.theta_in, r1.theta_out);
    CHECK(std::abs(d0 - d1) < 1e-8);
  }
}

TEST_CASE("extraction radius independence") {
  for (const auto& m : {bump(), kepler()}) {
    ScatterConfig a, b;
    const ScatterContext base(m, 1.0);
    a.launch_radius = base.launch_radius();
    b.launch_radius = 2 * base.launch_radius();
    const Vec th = vec2(1, 0);
    const auto ra = ScatterContext(m, 1.0, a).scatter(th, impact_vector(th, 0.8));
    const auto rb = ScatterContext(m, 1.0, b).scatter(th, impact_vector(th, 0.8));
    CHECK(std::abs(angle_between(ra.theta_out, rb.theta_out)) <= 1e-5);
  }
}

TEST_CASE("sweep CSV") {
  const ScatterContext ctx(PotentialModel::free(2), 1.0);
  std::vector<ScatterRecord> recs{ctx.scatter(vec2(1, 0), vec2(0, 1))};
  std::ostringstream os;
  write_scatter_csv(os, recs);
  CHECK(os.str().rfind("E,theta_angle,b,u,theta_out_angle,b_out,status,min_radius,flight_time\n", 0) == 0);
  CHECK(os.str().find(",scattered,") != std::string::npos);
}
