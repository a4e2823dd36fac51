#include "scatdeg/scattering.hpp"

#include <algorithm>
#include <ostream>
#include <random>

#include "scatdeg/io.hpp"
#include "scatdeg/parallel.hpp"
#include "scatdeg/quadrature.hpp"

namespace scatdeg {

const char* to_string(ScatterStatus s) {
  switch (s) {
    case ScatterStatus::Scattered: return "scattered";
    case ScatterStatus::TrappedTimeout: return "trapped_timeout";
    case ScatterStatus::CollisionRegularized: return "collision_regularized";
    case ScatterStatus::Failed: return "failed";
  }
  return "unknown";
}

const char* to_string(TrappingClass c) {
  switch (c) {
    case TrappingClass::NontrappingEvidence: return "nontrapping_evidence";
    case TrappingClass::TrappingDetected: return "trapping_detected";
    case TrappingClass::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

namespace {

bool can_regularize(const PotentialModel& model) {
  if (model.singular_count() != 1) return false;
  const auto n = regularizable_index(model.singular_term().alpha);
  return n && (model.dimension() == 2 || *n == 1);
}

Vec perpendicular_part(const Vec& v, const Vec& unit) { return v - v.dot(unit) * unit; }

Vec nan_vec(int d) { return Vec::Constant(d, std::numeric_limits<double>::quiet_NaN()); }

}  // namespace

ScatterContext::ScatterContext(PotentialModel model, double energy, ScatterConfig config)
    : model_(std::move(model)), energy_(energy), config_(std::move(config)) {
  if (!(energy > 0.0) || !std::isfinite(energy))
    fail(ErrorKind::InvalidArgument, "scattering needs a finite energy E > 0");
  virial_ = virial_radius(model_, energy, config_.virial);
  const double factor = model_.has_power_law_tail() ? config_.long_range_factor : config_.launch_factor;
  r_launch_ = config_.launch_radius > 0 ? config_.launch_radius : factor * virial_.radius;
  if (r_launch_ < virial_.radius)
    fail(ErrorKind::LaunchInsideInteractionZone, "launch radius is inside the virial radius");
  regularize_ = can_regularize(model_);
}

StopCondition ScatterContext::stop_condition() const {
  StopCondition s;
  s.r_escape = virial_.radius;
  s.r_extract = r_launch_;
  s.t_max = std::max(config_.t_max_factor * virial_.radius / speed(), 4.0 * r_launch_ / speed());
  return s;
}

PhaseState ScatterContext::launch_state(const Vec& theta_raw, const Vec& b_raw) const {
  const int d = model_.dimension();
  if (theta_raw.size() != d || b_raw.size() != d)
    fail(ErrorKind::InvalidArgument, "theta and b must match the model dimension");
  const double tn = theta_raw.norm();
  if (!(tn > 0)) fail(ErrorKind::InvalidArgument, "theta must be nonzero");
  const Vec theta = theta_raw / tn;
  if (std::abs(b_raw.dot(theta)) > 1e-9 * (1.0 + b_raw.norm()))
    fail(ErrorKind::InvalidArgument, "impact parameter must be orthogonal to theta");
  const Vec b = perpendicular_part(b_raw, theta);

  const double R = r_launch_;
  const double v = speed();
  PhaseState x;
  x.q = b - R * theta;
  if (x.q.norm() < virial_.radius)
    fail(ErrorKind::LaunchInsideInteractionZone, "launch point inside the virial radius");
  Vec pdir = v * theta;

  if (config_.asymptotic_correction && !model_.terms().empty()) {
    // First-order response to the force along the free incoming line
    // x(sigma) = b - (R + sigma) theta, sigma >= 0 behind the launch point.
    auto force = [&](double sigma) -> Vec { return model_.eval(Vec(b - (R + sigma) * theta)).grad; };
    auto lever = [&](double sigma) -> Vec {
      return sigma * perpendicular_part(model_.eval(Vec(b - (R + sigma) * theta)).grad, theta);
    };
    const auto dp = integrate_gk_to_infinity<Vec>(force, 0.0, R, 1e-16, 1e-10);
    const auto dq = integrate_gk_to_infinity<Vec>(lever, 0.0, R, 1e-16, 1e-10);
    pdir -= dp.value / v;
    x.q -= dq.value / (v * v);
  }
  const double kinetic = energy_ - model_.value(x.q);
  if (!(kinetic > 0.0))
    fail(ErrorKind::LaunchInsideInteractionZone, "launch point is not energetically accessible");
  x.p = pdir.normalized() * std::sqrt(2.0 * kinetic);
  x.t = 0.0;
  return x;
}

std::pair<Vec, Vec> ScatterContext::asymptote(const PhaseState& x) const {
  const double speed_now = x.p.norm();
  const Vec phat = x.p / speed_now;
  Vec pinf = x.p;
  Vec offset = Vec::Zero(model_.dimension());
  if (config_.asymptotic_correction && !model_.terms().empty()) {
    const double scale = std::max(x.q.norm(), 1.0);
    auto force = [&](double s) -> Vec { return model_.eval(Vec(x.q + s * phat)).grad; };
    auto lever = [&](double s) -> Vec {
      return s * perpendicular_part(model_.eval(Vec(x.q + s * phat)).grad, phat);
    };
    pinf -= integrate_gk_to_infinity<Vec>(force, 0.0, scale, 1e-16, 1e-10).value / speed_now;
    offset = integrate_gk_to_infinity<Vec>(lever, 0.0, scale, 1e-16, 1e-10).value /
             (speed_now * speed_now);
  }
  const Vec theta_out = pinf.normalized();
  return {theta_out, perpendicular_part(x.q + offset, theta_out)};
}

Trajectory ScatterContext::trajectory(const Vec& theta, const Vec& b) const {
  const PhaseState x0 = launch_state(theta, b);
  return regularize_ ? integrate_regularized(model_, x0, stop_condition(), config_.integrator)
                     : integrate(model_, x0, stop_condition(), config_.integrator);
}

ScatterRecord ScatterContext::scatter(const Vec& theta_raw, const Vec& b) const {
  const int d = model_.dimension();
  ScatterRecord rec;
  rec.energy = energy_;
  rec.theta_in = theta_raw.normalized();
  rec.b_in = perpendicular_part(b, rec.theta_in);
  rec.theta_out = nan_vec(d);
  rec.b_out = nan_vec(d);
  if (d == 2) rec.u = u_from_b(impact_scalar(rec.theta_in, rec.b_in));
  try {
    const Trajectory tr = trajectory(rec.theta_in, rec.b_in);
    const Vec ref = model_.singular_count() == 1 ? model_.singular_term().center : Vec::Zero(d);
    for (const auto& x : tr.states) rec.min_radius = std::min(rec.min_radius, (x.q - ref).norm());
    for (const auto& e : tr.events)
      if (e.kind == EventKind::Pericentre || e.kind == EventKind::Collision)
        rec.min_radius = std::min(rec.min_radius, (e.q - ref).norm());
    rec.pericentre_count = tr.count(EventKind::Pericentre) + tr.count(EventKind::Collision);
    rec.flight_time = tr.final_state().t;
    if (tr.stop_reason == StopReason::Timeout) {
      rec.status = ScatterStatus::TrappedTimeout;
      return rec;
    }
    auto [dir, bout] = asymptote(tr.final_state());
    rec.theta_out = dir;
    rec.b_out = bout;
    rec.status = tr.count(EventKind::Collision) > 0 ? ScatterStatus::CollisionRegularized
                                                    : ScatterStatus::Scattered;
  } catch (const Error& e) {
    if (!e.is_dynamics_failure()) throw;
    rec.status = ScatterStatus::Failed;
    rec.failure = e.what();
  }
  return rec;
}

ScatterRecord scatter_one(const PotentialModel& model, double energy, const Vec& theta,
                          const Vec& b, const ScatterConfig& config) {
  return ScatterContext(model, energy, config).scatter(theta, b);
}

double b_from_u(double u) {
  if (!(u > -1.0 && u < 1.0)) fail(ErrorKind::InvalidArgument, "u must lie in (-1, 1)");
  return std::tan(0.5 * kPi * u);
}

double u_from_b(double b) { return 2.0 * std::atan(b) / kPi; }

Vec impact_vector(const Vec& theta, double b) { return b * rotate90<double>(theta.normalized()); }

double impact_scalar(const Vec& theta, const Vec& b) {
  return b.dot(rotate90<double>(theta.normalized()));
}

std::vector<double> compactified_grid(int count) {
  if (count < 2) fail(ErrorKind::InvalidArgument, "grid needs at least 2 points");
  std::vector<double> u;
  for (int i = 1; i < count; ++i) u.push_back(-1.0 + 2.0 * i / count);
  const double umax = u.back();
  for (double tail : {1e-2, 1e-3, 1e-4})
    if (1.0 - tail > umax) {
      u.push_back(1.0 - tail);
      u.push_back(-(1.0 - tail));
    }
  std::sort(u.begin(), u.end());
  std::vector<double> b;
  for (double x : u) b.push_back(x == 0.0 ? 0.0 : b_from_u(x));
  return b;
}

namespace {

double direction_gap(const ScatterRecord& a, const ScatterRecord& b) {
  if (!a.escaped() || !b.escaped()) return 0.0;
  return std::abs(std::atan2(cross2<double>(a.theta_out, b.theta_out), a.theta_out.dot(b.theta_out)));
}

}  // namespace

DirectionMap final_direction_map(const ScatterContext& ctx, const Vec& theta_raw,
                                 const std::vector<double>& b_values, const RefineOptions& opt) {
  if (ctx.model().dimension() != 2)
    fail(ErrorKind::InvalidArgument, "final_direction_map on a line needs d = 2");
  const Vec theta = theta_raw.normalized();
  const int threads = ctx.config().threads;
  auto run = [&](const std::vector<double>& us) {
    return parallel_map(
        us.size(), [&](std::size_t i) {
          ScatterRecord r = ctx.scatter(theta, impact_vector(theta, std::tan(0.5 * kPi * us[i])));
          r.u = us[i];
          return r;
        },
        threads);
  };

  std::vector<double> us;
  for (double b : b_values) us.push_back(u_from_b(b));
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());

  DirectionMap out;
  out.records = run(us);
  out.evaluations = static_cast<int>(us.size());

  for (;;) {
    std::vector<double> mids;
    bool jump = false;
    for (std::size_t i = 0; i + 1 < out.records.size(); ++i) {
      const auto& a = out.records[i];
      const auto& b = out.records[i + 1];
      if (direction_gap(a, b) <= opt.max_gap) continue;
      if (b.u - a.u < opt.min_du) {
        jump = true;
        continue;
      }
      mids.push_back(0.5 * (a.u + b.u));
    }
    out.discontinuous = jump;
    if (mids.empty()) break;
    if (out.evaluations + static_cast<int>(mids.size()) > opt.budget) {
      out.complete = false;
      out.note = "refinement budget exhausted";
      break;
    }
    auto fresh = run(mids);
    out.evaluations += static_cast<int>(mids.size());
    ++out.rounds;
    std::vector<ScatterRecord> merged;
    merged.reserve(out.records.size() + fresh.size());
    std::merge(std::make_move_iterator(out.records.begin()), std::make_move_iterator(out.records.end()),
               std::make_move_iterator(fresh.begin()), std::make_move_iterator(fresh.end()),
               std::back_inserter(merged),
               [](const ScatterRecord& a, const ScatterRecord& b) { return a.u < b.u; });
    out.records = std::move(merged);
  }
  if (out.discontinuous && out.note.empty()) out.note = "angular gap persists below the minimum spacing";
  return out;
}

EnergyScanReport trapping_scan(const PotentialModel& model, const std::vector<double>& energies,
                               const SamplePlan& plan, const ScatterConfig& config) {
  EnergyScanReport report;
  report.energies = energies;
  const int d = model.dimension();
  for (double E : energies) {
    if (!(E > 0.0)) fail(ErrorKind::InvalidArgument, "scan energies must be positive");
    EnergyScanEntry entry;
    entry.energy = E;
    if (d == 2) {
      entry.hill = hill_analysis(model, E).classification;
      if (*entry.hill == HillClass::MultiComponent) {
        entry.classification = TrappingClass::TrappingDetected;
        entry.evidence = "hill_multi_component";
        entry.confidence = "theorem";
        report.entries.push_back(entry);
        continue;
      }
    }

    const ScatterContext ctx(model, E, config);
    std::vector<std::pair<Vec, Vec>> launches;
    const auto dirs = sphere_directions(d, std::max(1, plan.directions));
    const auto grid = compactified_grid(std::max(2, plan.grid));
    for (const Vec& th : dirs) {
      Vec perp = d == 2 ? rotate90<double>(th) : Vec(th.unitOrthogonal());
      for (double b : grid) launches.emplace_back(th, b * perp);
    }
    std::mt19937_64 rng(plan.seed);
    const double bmax = plan.b_max > 0 ? plan.b_max : 1.5 * ctx.virial().radius;
    std::uniform_real_distribution<double> ub(-bmax, bmax);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < plan.random; ++k) {
      Vec th(d);
      for (int i = 0; i < d; ++i) th(i) = gauss(rng);
      th.normalize();
      Vec r(d);
      for (int i = 0; i < d; ++i) r(i) = gauss(rng);
      Vec perp = perpendicular_part(r, th);
      perp.normalize();
      launches.emplace_back(th, ub(rng) * perp);
    }

    const auto recs = parallel_map(
        launches.size(), [&](std::size_t i) { return ctx.scatter(launches[i].first, launches[i].second); },
        config.threads);
    entry.launches = static_cast<int>(recs.size());
    for (const auto& r : recs) {
      entry.timeouts += r.status == ScatterStatus::TrappedTimeout ? 1 : 0;
      entry.failures += r.status == ScatterStatus::Failed ? 1 : 0;
      entry.max_flight_time = std::max(entry.max_flight_time, r.flight_time);
    }
    entry.timeout_fraction = entry.launches ? double(entry.timeouts) / entry.launches : 0.0;
    if (entry.timeouts > 0) {
      entry.classification = TrappingClass::TrappingDetected;
      entry.evidence = "timeout";
      entry.confidence = "numerical_timeout";
    } else if (entry.failures > 0) {
      entry.classification = TrappingClass::Inconclusive;
      entry.evidence = "failures";
      entry.confidence = "sampled";
    } else {
      entry.classification = TrappingClass::NontrappingEvidence;
      entry.evidence = "all_escaped";
      entry.confidence = "sampled";
    }
    report.entries.push_back(entry);
  }
  return report;
}

void write_scatter_csv(std::ostream& os, const std::vector<ScatterRecord>& records) {
  os << "E,theta_angle,b,u,theta_out_angle,b_out,status,min_radius,flight_time\n";
  for (const auto& r : records) {
    const double th = std::atan2(r.theta_in(1), r.theta_in(0));
    const double tout = std::atan2(r.theta_out(1), r.theta_out(0));
    const double b = impact_scalar(r.theta_in, r.b_in);
    const double bout = r.escaped() ? impact_scalar(r.theta_out, r.b_out)
                                    : std::numeric_limits<double>::quiet_NaN();
    os << format_number(r.energy) << ',' << format_number(th) << ',' << format_number(b) << ','
       << format_number(r.u) << ',' << format_number(tout) << ',' << format_number(bout) << ','
       << to_string(r.status) << ',' << format_number(r.min_radius) << ','
       << format_number(r.flight_time) << '\n';
  }
}

void write_scan_json(std::ostream& os, const EnergyScanReport& report) {
  nlohmann::json j;
  j["timeout_as_trapped"] = report.timeout_as_trapped;
  j["energies"] = report.energies;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json x;
    x["E"] = e.energy;
    x["hill"] = e.hill ? nlohmann::json(to_string(*e.hill)) : nlohmann::json(nullptr);
    x["launches"] = e.launches;
    x["timeouts"] = e.timeouts;
    x["failures"] = e.failures;
    x["timeout_fraction"] = e.timeout_fraction;
    x["max_flight_time"] = e.max_flight_time;
    x["classification"] = to_string(e.classification);
    x["evidence"] = e.evidence;
    x["confidence"] = e.confidence;
    j["entries"].push_back(x);
  }
  os << dump_json(j);
}

}  // namespace scatdeg
