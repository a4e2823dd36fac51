#include <cmath>
#include <sstream>

#include "doctest.h"
#include "scatdeg/dynamics.hpp"

using namespace scatdeg;

namespace {

PhaseState state(Vec q, Vec p, double t = 0.0) { return PhaseState{t, std::move(q), std::move(p)}; }

PotentialModel kepler(double alpha = 1.0, double Z = 1.0, int d = 2) {
  return PotentialModel(d, {PotentialTerm::singular(Z, alpha, Vec::Zero(d))});
}

double max_energy_drift(const PotentialModel& m, const Trajectory& tr) {
  double worst = 0;
  for (const auto& x : tr.states) worst = std::max(worst, std::abs(hamiltonian(m, x) - tr.energy));
  return worst;
}

}  // namespace

TEST_CASE("free motion is a straight line and escapes immediately") {
  const auto m = PotentialModel::free(2);
  StopCondition stop;
  stop.r_escape = 1.0;
  stop.t_max = 5.0;
  const auto tr = integrate(m, state(vec2(0, 1), vec2(1, 0)), stop);
  REQUIRE(escape_time(tr).has_value());
  CHECK(*escape_time(tr) == 0.0);
  for (const auto& x : tr.states) {
    CHECK(x.q(0) == doctest::Approx(x.t).epsilon(1e-12));
    CHECK(x.q(1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(tr.stop_reason == StopReason::Timeout);
  CHECK(tr.final_state().t == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("circular Kepler orbit keeps its radius and times out") {
  const auto m = kepler();
  StopCondition stop;
  stop.r_escape = 10.0;
  stop.t_max = 50.0;
  const auto tr = integrate(m, state(vec2(1, 0), vec2(0, 1)), stop);
  CHECK(tr.stop_reason == StopReason::Timeout);
  CHECK_FALSE(escape_time(tr).has_value());
  CHECK(tr.count(EventKind::Timeout) == 1);
  for (const auto& x : tr.states) CHECK(std::abs(x.q.norm() - 1.0) <= 1e-6);
  for (double t = 0.1; t < 50; t += 0.37) CHECK(std::abs(tr.state_at(t).q.norm() - 1.0) <= 1e-6);
  CHECK(tr.state_at(kPi).q(0) == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("head-on gaussian reflection") {
  const PotentialModel m(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(0, 0))});
  const double R = 20.0;
  StopCondition stop;
  stop.r_escape = 5.0;
  stop.r_extract = R;
  stop.t_max = 1e3;
  const auto tr = integrate(m, state(vec2(-R, 0), vec2(std::sqrt(2.0), 0)), stop);
  CHECK(tr.stop_reason == StopReason::Extracted);
  const Vec phat = tr.final_state().p.normalized();
  CHECK(std::abs(phat(0) + 1.0) < 1e-6);
  CHECK(std::abs(phat(1)) < 1e-6);
  CHECK(tr.final_state().q.norm() == doctest::Approx(R).epsilon(1e-10));
}

TEST_CASE("pericentre of free motion") {
  const auto m = PotentialModel::free(2);
  StopCondition stop;
  stop.t_max = 10.0;
  const auto tr = integrate(m, state(vec2(-5, 1), vec2(1, 0)), stop);
  const auto pd = pericentre(tr, vec2(0, 0));
  CHECK(pd.t == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(pd.direction(0) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(pd.direction(1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(pd.angular_momentum == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(pd.angular_momentum) == doctest::Approx(1.0));

  StopCondition short_stop;
  short_stop.t_max = 2.0;
  const auto tr2 = integrate(m, state(vec2(-5, 1), vec2(1, 0)), short_stop);
  CHECK_THROWS_AS(pericentre(tr2, vec2(0, 0)), Error);
}

TEST_CASE("Kepler hyperbola pericentral radius") {
  const auto m = kepler();
  const double E = 0.5, b = 1.0, R = 200.0;
  const double v = std::sqrt(2 * E);
  const double speed = std::sqrt(2 * (E + 1.0 / std::hypot(R, b)));
  StopCondition stop;
  stop.t_max = 4 * R / v;
  const auto tr = integrate(m, state(vec2(-R, b), vec2(speed, 0)), stop);
  const auto pd = pericentre(tr, vec2(0, 0));
  const double l = std::abs(pd.angular_momentum);
  const double rmin = (-1.0 + std::sqrt(1.0 + 2 * E * l * l)) / (2 * E);
  CHECK(pd.radius == doctest::Approx(rmin).epsilon(1e-9));
  CHECK(tr.count(EventKind::Pericentre) == 1);
}

TEST_CASE("energy and angular momentum conservation") {
  const PotentialModel m(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(0, 0)),
                             PotentialTerm::singular(0.5, 1.0, vec2(0, 0))});
  StopCondition stop;
  stop.r_escape = 6.0;
  stop.r_extract = 30.0;
  stop.t_max = 1e3;
  const auto tr = integrate(m, state(vec2(-30, 0.4), vec2(1.2, 0)), stop);
  const double l0 = angular_momentum(tr.states.front().q, tr.states.front().p);
  CHECK(max_energy_drift(m, tr) <= 1e-8 * (1 + std::abs(tr.energy)));
  for (const auto& x : tr.states) CHECK(std::abs(angular_momentum(x.q, x.p) - l0) <= 1e-8);
}

TEST_CASE("reversibility") {
  const PotentialModel m(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(0.3, 0)),
                             PotentialTerm::gaussian(1.0, 0.7, vec2(-1, 1))});
  StopCondition stop;
  stop.t_max = 12.0;
  const PhaseState x0 = state(vec2(-6, 0.5), vec2(1.0, 0.1));
  const auto fwd = integrate(m, x0, stop);
  PhaseState back = fwd.final_state();
  back.p = -back.p;
  back.t = 0;
  const auto bwd = integrate(m, back, stop);
  CHECK((bwd.final_state().q - x0.q).norm() < 1e-6);
}

TEST_CASE("virial monotonicity beyond the virial radius") {
  const PotentialModel m(2, {PotentialTerm::gaussian(2.0, 1.0, vec2(0, 0))});
  const double E = 1.0;
  const double R = virial_radius(m, E).radius;
  StopCondition stop;
  stop.r_escape = R;
  stop.r_extract = 10 * R;
  stop.t_max = 1e3;
  const auto tr = integrate(m, state(vec2(-10 * R, 0.3), vec2(std::sqrt(2 * E), 0)), stop);
  const auto te = escape_time(tr);
  REQUIRE(te.has_value());
  double prev = -1e300;
  for (const auto& x : tr.states) {
    if (x.t < *te) continue;
    CHECK(x.q.norm() >= R * (1 - 1e-12));
    const double qp = x.q.dot(x.p);
    CHECK(qp > prev);
    prev = qp;
  }
  // escape bound |q(t)|^2 >= |q0|^2 + E t^2 / 2 after the escape point
  const PhaseState xe = tr.state_at(*te);
  for (const auto& x : tr.states)
    if (x.t > *te)
      CHECK(x.q.squaredNorm() >= xe.q.squaredNorm() + 0.5 * E * (x.t - *te) * (x.t - *te) - 1e-9);
}

TEST_CASE("non-regularizable collision underflows") {
  const auto m = kepler(0.5);
  StopCondition stop;
  stop.t_max = 10;
  CHECK_THROWS_AS(integrate_regularized(m, state(vec2(1, 0), vec2(-1, 0)), stop), Error);
  try {
    integrate_regularized(m, state(vec2(1, 0), vec2(-1, 0)), stop);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotRegularizable);
  }
  IntegratorConfig cfg;
  cfg.max_steps = 200000;
  try {
    integrate(m, state(vec2(1, 0), vec2(-1, 0)), stop, cfg);
    FAIL("expected a dynamics failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StepSizeUnderflow);
  }
}

TEST_CASE("radial collision, n = 1: momentum reversed, same ray") {
  const auto m = kepler(1.0);
  const double E = 0.5;
  const double speed = std::sqrt(2 * (E + 1.0));
  const PhaseState x0 = state(vec2(1, 0), vec2(-speed, 0));
  StopCondition stop;
  stop.t_max = 1.0;
  // time to fall in, by quadrature of dt = dr / sqrt(2(E + 1/r))
  double t0 = 0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double r = (i + 0.5) / N;
    t0 += (1.0 / N) / std::sqrt(2 * (E + 1 / r));
  }
  stop.t_max = 2 * t0;
  const auto tr = integrate_regularized(m, x0, stop);
  REQUIRE(tr.count(EventKind::Collision) == 1);
  const auto col = *tr.first(EventKind::Collision);
  CHECK(col.t == doctest::Approx(t0).epsilon(1e-7));
  // F = (-1)^{(n+1)/2} q0-hat
  CHECK(col.direction(0) == doctest::Approx(-1.0).epsilon(1e-9));
  const auto& xf = tr.final_state();
  CHECK(xf.q(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::abs(xf.q(1)) < 1e-9);
  CHECK(xf.p(0) == doctest::Approx(speed).epsilon(1e-6));
  CHECK(tr.max_energy_error <= 1e-8 * 1.5);
  // symmetric about the collision time
  for (double dt : {0.05, 0.2, 0.5}) {
    const auto a = tr.state_at(t0 - dt), b = tr.state_at(t0 + dt);
    CHECK((a.q - b.q).norm() < 1e-7);
    CHECK((a.p + b.p).norm() < 1e-6);
  }
}

TEST_CASE("radial collision, n = 2: momentum kept, position reflected") {
  const double alpha = 4.0 / 3.0;
  const auto m = kepler(alpha);
  const double E = 0.5;
  const double speed = std::sqrt(2 * (E + 1.0));
  const PhaseState x0 = state(vec2(0, 1), vec2(0, -speed));
  double t0 = 0;
  const int N = 400000;
  for (int i = 0; i < N; ++i) {
    const double r = (i + 0.5) / N;
    t0 += (1.0 / N) / std::sqrt(2 * (E + std::pow(r, -alpha)));
  }
  StopCondition stop;
  stop.t_max = 2 * t0;
  const auto tr = integrate_regularized(m, x0, stop);
  REQUIRE(tr.count(EventKind::Collision) == 1);
  const auto& xf = tr.final_state();
  CHECK(xf.q(1) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(std::abs(xf.q(0)) < 1e-8);
  CHECK(xf.p(1) == doctest::Approx(-speed).epsilon(1e-5));
  for (double dt : {0.05, 0.2}) {
    const auto a = tr.state_at(t0 - dt), b = tr.state_at(t0 + dt);
    CHECK((a.q + b.q).norm() < 1e-7);
    CHECK((a.p - b.p).norm() < 1e-6);
  }
}

TEST_CASE("three-dimensional radial collision through the KS chart") {
  const auto m = kepler(1.0, 1.0, 3);
  const double E = 0.5;
  const double speed = std::sqrt(2 * (E + 1.0));
  const Vec dir = vec3(1, -2, 0.5).normalized();
  StopCondition stop;
  stop.t_max = 1.5;
  const auto tr = integrate_regularized(m, state(dir, -speed * dir), stop);
  REQUIRE(tr.count(EventKind::Collision) == 1);
  CHECK(tr.first(EventKind::Collision)->direction.dot(dir) == doctest::Approx(-1.0).epsilon(1e-9));
  const auto& xf = tr.final_state();
  CHECK((xf.q.normalized() - dir).norm() < 1e-8);
  CHECK(xf.p.dot(dir) > 0);
  CHECK(std::abs(hamiltonian(m, xf) - E) < 1e-8);
}

TEST_CASE("regularized and plain integration agree away from collision") {
  const PotentialModel m(2, {PotentialTerm::singular(1.0, 1.0, vec2(0, 0)),
                             PotentialTerm::gaussian(0.5, 1.0, vec2(0.5, 0))});
  StopCondition stop;
  stop.t_max = 30.0;
  const PhaseState x0 = state(vec2(-8, 0.02), vec2(1.1, 0));
  const auto a = integrate(m, x0, stop);
  const auto b = integrate_regularized(m, x0, stop);
  CHECK(b.frames.size() > 1);  // the chart was used
  CHECK((a.final_state().q - b.final_state().q).norm() < 1e-6);
  CHECK((a.final_state().p - b.final_state().p).norm() < 1e-6);
}

TEST_CASE("angular momentum is conserved through regularized segments") {
  const auto m = kepler(1.0);
  StopCondition stop;
  stop.t_max = 40.0;
  const PhaseState x0 = state(vec2(-10, 1e-3), vec2(1.0, 0));
  const auto tr = integrate_regularized(m, x0, stop);
  const double l0 = angular_momentum(x0.q, x0.p);
  for (const auto& x : tr.states) CHECK(std::abs(angular_momentum(x.q, x.p) - l0) <= 1e-8);
}

TEST_CASE("collision limit is continuous in l") {
  // outgoing direction after passing the center with shrinking impact parameter
  const auto m = kepler(1.0);
  const double E = 0.5;
  StopCondition stop;
  stop.t_max = 20.0;
  std::vector<Vec> dirs;
  for (double l : {1e-2, 1e-3, 1e-4, 0.0}) {
    const auto tr = integrate_regularized(m, state(vec2(-5, l), vec2(std::sqrt(2 * E + 2.0 / std::hypot(5, l)), 0)), stop);
    dirs.push_back(tr.final_state().p.normalized());
  }
  const double d1 = (dirs[0] - dirs[1]).norm(), d2 = (dirs[1] - dirs[2]).norm(),
               d3 = (dirs[2] - dirs[3]).norm();
  CHECK(d2 < d1);
  CHECK(d3 < d2);
  CHECK(d3 < 1e-2);
}

TEST_CASE("trajectory writers") {
  const auto m = PotentialModel::free(2);
  StopCondition stop;
  stop.t_max = 1.0;
  const auto tr = integrate(m, state(vec2(0, 1), vec2(1, 0)), stop);
  std::ostringstream csv, js;
  write_trajectory_csv(csv, m, tr);
  write_events_json(js, tr);
  CHECK(csv.str().rfind("t,q1,q2,p1,p2,H\n", 0) == 0);
  CHECK(js.str().find("\"kind\":\"timeout\"") != std::string::npos);
}
