#include <sstream>

#include "doctest.h"
#include "scatdeg/io.hpp"
#include "scatdeg/symbolic.hpp"

using namespace scatdeg;

namespace {

PotentialModel bumps(const std::vector<Vec>& centers) {
  std::vector<PotentialTerm> terms;
  for (const auto& c : centers) terms.push_back(PotentialTerm::gaussian(2.0, 1.0, c));
  return PotentialModel(2, terms);
}

std::vector<Vec> triangle(double side) {
  const double r = side / std::sqrt(3.0);
  return {r * unit_angle(kPi / 2), r * unit_angle(kPi / 2 + 2 * kPi / 3), r * unit_angle(kPi / 2 + 4 * kPi / 3)};
}

std::vector<int> centers_of(const std::vector<Visit>& log) {
  std::vector<int> out;
  for (const auto& v : log) out.push_back(v.center);
  return out;
}

// Distance from a point to the line {x : n.x = s}.
double line_distance(const Vec& c, double angle, double offset) { return std::abs(unit_angle(angle).dot(c) - offset); }

}  // namespace

TEST_CASE("itinerary construction") {
  CHECK(Itinerary({1, 2, 1}, 2).size() == 3);
  CHECK_THROWS_AS(Itinerary({1, 1, 2}, 2), Error);
  CHECK_THROWS_AS(Itinerary({1, 3}, 2), Error);
  CHECK_THROWS_AS(Itinerary({}, 2), Error);
  CHECK(Itinerary::parse("1,2,3,1", 3).str() == "1,2,3,1");
  CHECK_THROWS_AS(Itinerary::parse("1,,2", 3), Error);
  CHECK_THROWS_AS(Itinerary::parse("1,2x", 3), Error);
  CHECK(admissible_words(3, 5).size() == 48);
  CHECK(admissible_words(2, 4).size() == 2);
}

TEST_CASE("non-shadowing certificate") {
  std::vector<Support> tri;
  for (const auto& c : triangle(10)) tri.push_back({c, 1.0});
  const auto ok = check_nonshadowing(tri);
  CHECK(ok.pass);
  // oracle: the best line through an equilateral triangle keeps half the altitude from some vertex
  CHECK(ok.margin == doctest::Approx(0.5 * 10 * std::sqrt(3.0) / 2 - 1.0).epsilon(1e-9));

  const std::vector<Support> row{{vec2(-5, 0), 1.0}, {vec2(0, 0), 1.0}, {vec2(5, 0), 1.0}};
  const auto bad = check_nonshadowing(row);
  CHECK_FALSE(bad.pass);
  REQUIRE(bad.violation);
  CHECK((*bad.violation == std::array<int, 3>{1, 2, 3}));
  for (const auto& s : row) CHECK(line_distance(s.center, bad.line_angle, bad.line_offset) <= s.radius + 1e-9);

  const std::vector<Support> two{{vec2(-5, 0), 1.0}, {vec2(7, 1), 3.0}};
  CHECK(check_nonshadowing(two).pass);
}

TEST_CASE("visit logs") {
  const auto m = bumps({vec2(-5, 0), vec2(5, 0)});
  const auto sup = supports_of(m);
  CHECK(sup[0].radius == 3.0);
  const ScatterContext ctx(m, 1.0);
  // a line far above both supports
  CHECK(visit_log(ctx.trajectory(vec2(1, 0), vec2(0, 10)), sup).empty());
  // head-on along the axis reflects off bump 1 only
  const auto head = visit_log(ctx.trajectory(vec2(1, 0), vec2(0, 0)), sup);
  REQUIRE(head.size() == 1);
  CHECK(head[0].center == 1);
  // turning point of the axial orbit: 2 exp(-r^2) = 1
  CHECK(head[0].closest == doctest::Approx(std::sqrt(std::log(2.0))).epsilon(1e-3));
}

TEST_CASE("two-center itinerary matches a forward sweep") {
  const auto m = bumps({vec2(-5, 0), vec2(5, 0)});
  const Vec th = unit_angle(0.3);
  ItineraryRealizer r(m, 1.0, th);
  const auto w = r.realize(Itinerary({1, 2}, 2));
  CHECK(centers_of(w.visits) == std::vector<int>{1, 2});
  for (std::size_t i = 0; i < w.visits.size(); ++i) CHECK(w.visits[i].closest <= r.supports()[i == 0 ? 0 : 1].radius);

  // oracle: a plain sweep finds parameters with log [1, 2] inside the first bracket
  const ScatterContext ctx(m, 1.0);
  const auto sup = supports_of(m);
  int hits = 0;
  for (int i = 0; i < 2000; ++i) {
    const double b = -9.0 + 18.0 * (i + 0.5) / 2000;
    if (centers_of(visit_log(ctx.trajectory(th, impact_vector(th, b)), sup)) == std::vector<int>{1, 2}) {
      ++hits;
      CHECK(b >= w.nested[0].lo - 1e-9);
      CHECK(b <= w.nested[0].hi + 1e-9);
    }
  }
  CHECK(hits > 0);
}

TEST_CASE("three-center words nest and are robust to tolerance") {
  const auto m = bumps(triangle(12));
  const Vec th = unit_angle(0.1);
  ItineraryRealizer r(m, 1.0, th);
  const auto w3 = r.realize(Itinerary({1, 2, 1}, 3));
  CHECK(centers_of(w3.visits) == std::vector<int>{1, 2, 1});
  const auto w4 = r.realize(Itinerary({1, 2, 1, 3}, 3));
  CHECK(centers_of(w4.visits) == std::vector<int>{1, 2, 1, 3});
  // brackets nest
  for (std::size_t i = 1; i < w4.nested.size(); ++i) {
    CHECK(w4.nested[i].lo >= w4.nested[i - 1].lo);
    CHECK(w4.nested[i].hi <= w4.nested[i - 1].hi);
    CHECK(w4.nested[i].width() < w4.nested[i - 1].width());
  }
  CHECK(w4.nested[2].lo == w3.nested[2].lo);
  CHECK(w4.b >= w3.nested[2].lo);
  CHECK(w4.b <= w3.nested[2].hi);

  ScatterConfig tight;
  tight.integrator.rtol /= 10;
  tight.integrator.atol /= 10;
  const ScatterContext fine(m, 1.0, tight);
  CHECK(centers_of(visit_log(fine.trajectory(th, impact_vector(th, w4.b)), r.supports())) ==
        std::vector<int>{1, 2, 1, 3});
}

TEST_CASE("words unreachable from the given direction use another one") {
  const auto m = bumps(triangle(12));
  // launched almost parallel to the edge 2-3, the beam grazes 2 before 3 and
  // cannot be turned back towards 1
  SymbolicOptions fixed;
  fixed.directions = 1;
  ItineraryRealizer only(m, 1.0, unit_angle(0.1), fixed);
  CHECK_THROWS_AS(only.realize(Itinerary({2, 3, 1}, 3)), Error);

  ItineraryRealizer r(m, 1.0, unit_angle(0.1));
  const auto w = r.realize(Itinerary({2, 3, 1}, 3));
  CHECK(centers_of(w.visits) == std::vector<int>{2, 3, 1});
  CHECK((w.theta - unit_angle(0.1)).norm() > 0.1);
  const ScatterContext ctx(m, 1.0);
  CHECK(centers_of(visit_log(ctx.trajectory(w.theta, impact_vector(w.theta, w.b)), r.supports())) ==
        std::vector<int>{2, 3, 1});
}

TEST_CASE("realization preconditions") {
  CHECK_THROWS_AS(ItineraryRealizer(bumps({vec2(-5, 0), vec2(0, 0), vec2(5, 0)}), 1.0, vec2(1, 0)), Error);
  CHECK_THROWS_AS(ItineraryRealizer(bumps({vec2(-5, 0), vec2(5, 0)}), 3.0, vec2(1, 0)), Error);
  ItineraryRealizer r(bumps({vec2(-5, 0), vec2(5, 0)}), 1.0, vec2(1, 0));
  CHECK_THROWS_AS(r.realize(Itinerary({1, 2, 3}, 3)), Error);
}

TEST_CASE("witness JSON") {
  ItineraryWitness w;
  w.energy = 1.0;
  w.theta = vec2(1, 0);
  w.b = 0.25;
  w.visits = {{1, 0.8, 3.0}, {2, 0.9, 9.0}};
  w.bracket_width = 1e-3;
  std::ostringstream os;
  write_witness_json(os, Itinerary({1, 2}, 2), w);
  const auto j = nlohmann::json::parse(os.str());
  CHECK(j["b"] == 0.25);
  CHECK(j["visit_log"].size() == 2);
  CHECK(j["visit_log"][1]["center"] == 2);
  CHECK(j["bracket_width"] == 1e-3);
}
