#include "scatdeg/degree.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <random>

#include "scatdeg/io.hpp"
#include "scatdeg/parallel.hpp"
#include "scatdeg/quadrature.hpp"

namespace scatdeg {

const char* to_string(DegreeMethod m) {
  switch (m) {
    case DegreeMethod::Winding2d: return "winding2d";
    case DegreeMethod::Sphere3d: return "sphere3d";
    case DegreeMethod::QuadratureCentral: return "quadrature_central";
    case DegreeMethod::LagrangeProjection: return "lagrange_projection";
  }
  return "unknown";
}

namespace {

Vec cross(const Vec& a, const Vec& b) {
  const Eigen::Vector3d c = Eigen::Vector3d(a(0), a(1), a(2)).cross(Eigen::Vector3d(b(0), b(1), b(2)));
  return vec3(c(0), c(1), c(2));
}

double angle_between(const Vec& a, const Vec& b) {
  if (a.size() == 2) return std::abs(std::atan2(cross2(a, b), a.dot(b)));
  return std::atan2(cross(a, b).norm(), a.dot(b));
}

Vec unit_or_throw(const Vec& theta, int dim) {
  if (theta.size() != dim) fail(ErrorKind::InvalidArgument, "theta must match the model dimension");
  const double n = theta.norm();
  if (!(n > 0) || !std::isfinite(n)) fail(ErrorKind::InvalidArgument, "theta must be nonzero");
  return theta / n;
}

void finish(DegreeEstimate& est) {
  est.value = static_cast<int>(std::lround(est.raw));
  est.residual = std::abs(est.raw - est.value);
}

}  // namespace

// ---------------------------------------------------------------- d = 2 winding

DegreeEstimate winding_of(const DirectionMap& map, const Vec& theta_raw) {
  const Vec theta = unit_or_throw(theta_raw, 2);
  if (map.records.size() < 2) fail(ErrorKind::InvalidArgument, "direction map has fewer than 2 samples");
  for (const auto& r : map.records)
    if (!r.escaped())
      fail(ErrorKind::DiscontinuityDetected,
           std::string("sample at b = ") + format_number(impact_scalar(theta, r.b_in)) + " is " +
               to_string(r.status) + (r.failure.empty() ? "" : " (" + r.failure + ")"));
  if (map.discontinuous) fail(ErrorKind::DiscontinuityDetected, map.note);
  if (!map.complete) fail(ErrorKind::RefinementBudgetExceeded, map.note);

  // Unwrapped angle of theta_out relative to theta along increasing b; both
  // ends sit near theta, so their offsets bound the residual.
  double prev = std::atan2(cross2(theta, map.records.front().theta_out),
                           theta.dot(map.records.front().theta_out));
  double turned = 0.0;
  for (std::size_t i = 1; i < map.records.size(); ++i) {
    const Vec& y = map.records[i].theta_out;
    const double a = std::atan2(cross2(theta, y), theta.dot(y));
    turned += wrap_angle(a - prev);
    prev = a;
  }
  DegreeEstimate est;
  est.method = DegreeMethod::Winding2d;
  est.theta = theta;
  est.samples = static_cast<int>(map.records.size());
  est.refinement_level = map.rounds;
  est.raw = -turned / (2 * kPi);
  finish(est);
  return est;
}

DegreeEstimate degree_winding(const PotentialModel& model, double energy, const Vec& theta_raw,
                              const DegreeOptions& opt) {
  if (model.dimension() != 2) fail(ErrorKind::InvalidArgument, "winding degree needs d = 2");
  const Vec theta = unit_or_throw(theta_raw, 2);
  ScatterContext ctx(model, energy, opt.scatter);
  const DirectionMap map = final_direction_map(ctx, theta, compactified_grid(opt.grid), opt.refine);
  return winding_of(map, theta);
}

int signed_preimage_count(const DirectionMap& map, const Vec& y_raw) {
  const Vec y = unit_or_throw(y_raw, 2);
  if (map.records.empty()) return 0;
  const Vec theta = map.records.front().theta_in;
  // The compactified line closes at theta on both ends.
  std::vector<Vec> path;
  path.push_back(theta);
  for (const auto& r : map.records) {
    if (!r.escaped()) fail(ErrorKind::DiscontinuityDetected, "direction map has non-escaping samples");
    path.push_back(r.theta_out);
  }
  path.push_back(theta);
  int count = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double a = std::atan2(cross2(y, path[i]), y.dot(path[i]));
    const double b = std::atan2(cross2(y, path[i + 1]), y.dot(path[i + 1]));
    if ((a < 0) == (b < 0)) continue;
    if (std::abs(b - a) >= kPi) continue;  // crossed the antipode
    // counterclockwise passage is a negative contribution
    count += b > a ? -1 : 1;
  }
  return count;
}

// ---------------------------------------------------------------- d = 3 sphere

double signed_solid_angle(const Vec& a, const Vec& b, const Vec& c) {
  const double num = a.dot(cross(b, c));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

namespace {

struct SphereMesh {
  struct Leaf {
    int a, b, c;
    int depth;
  };
  std::vector<Vec> verts;
  std::vector<Vec> images;
  std::map<std::pair<int, int>, int> mid;
  std::vector<Leaf> leaves;

  static std::pair<int, int> key(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

  int midpoint(int i, int j) {
    const auto k = key(i, j);
    const auto it = mid.find(k);
    if (it != mid.end()) return it->second;
    verts.push_back((verts[i] + verts[j]).normalized());
    const int id = static_cast<int>(verts.size()) - 1;
    mid.emplace(k, id);
    return id;
  }

  std::vector<Leaf> split(const Leaf& f) {
    const int ab = midpoint(f.a, f.b), bc = midpoint(f.b, f.c), ca = midpoint(f.c, f.a);
    const int d = f.depth + 1;
    return {{f.a, ab, ca, d}, {ab, f.b, bc, d}, {ca, bc, f.c, d}, {ab, bc, ca, d}};
  }

  void walk(int i, int j, std::vector<int>& out) const {
    const auto it = mid.find(key(i, j));
    if (it == mid.end()) {
      out.push_back(i);
      return;
    }
    walk(i, it->second, out);
    walk(it->second, j, out);
  }

  // Leaf boundary including hanging midpoints of refined neighbours.
  std::vector<int> polygon(const Leaf& f) const {
    std::vector<int> out;
    walk(f.a, f.b, out);
    walk(f.b, f.c, out);
    walk(f.c, f.a, out);
    return out;
  }

  double image_diameter(const std::vector<int>& poly) const {
    double d = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
      for (std::size_t j = i + 1; j < poly.size(); ++j)
        d = std::max(d, angle_between(images[poly[i]], images[poly[j]]));
    return d;
  }
};

// Icosahedron with two vertices on the z axis, faces oriented outward.
SphereMesh icosahedron() {
  SphereMesh m;
  m.verts.push_back(vec3(0, 0, 1));
  m.verts.push_back(vec3(0, 0, -1));
  const double z = 1.0 / std::sqrt(5.0), rho = 2.0 / std::sqrt(5.0);
  for (int k = 0; k < 5; ++k) {
    const double a = 2 * kPi * k / 5;
    m.verts.push_back(vec3(rho * std::cos(a), rho * std::sin(a), z));
  }
  for (int k = 0; k < 5; ++k) {
    const double a = 2 * kPi * k / 5 + kPi / 5;
    m.verts.push_back(vec3(rho * std::cos(a), rho * std::sin(a), -z));
  }
  const double edge = (m.verts[0] - m.verts[2]).norm();
  auto adjacent = [&](int i, int j) { return std::abs((m.verts[i] - m.verts[j]).norm() - edge) < 1e-9; };
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j)
      for (int k = j + 1; k < 12; ++k) {
        if (!(adjacent(i, j) && adjacent(j, k) && adjacent(i, k))) continue;
        const Vec n = cross(m.verts[j] - m.verts[i], m.verts[k] - m.verts[i]);
        if (n.dot(m.verts[i]) > 0)
          m.leaves.push_back({i, j, k, 0});
        else
          m.leaves.push_back({i, k, j, 0});
      }
  return m;
}

}  // namespace

SphereDegree sphere_map_degree(const SphereMap& map, int mesh_level, double max_image_diameter,
                               int budget) {
  if (mesh_level < 0) fail(ErrorKind::InvalidArgument, "mesh level must be nonnegative");
  SphereMesh mesh = icosahedron();
  for (int l = 0; l < mesh_level; ++l) {
    std::vector<SphereMesh::Leaf> next;
    for (const auto& f : mesh.leaves)
      for (const auto& g : mesh.split(f)) next.push_back(g);
    mesh.leaves = std::move(next);
  }
  SphereDegree out;
  auto evaluate_new = [&]() {
    const std::size_t from = mesh.images.size();
    std::vector<Vec> pts(mesh.verts.begin() + static_cast<long>(from), mesh.verts.end());
    if (pts.empty()) return;
    auto imgs = map(pts);
    if (imgs.size() != pts.size()) fail(ErrorKind::InvalidArgument, "sphere map returned a wrong count");
    for (auto& y : imgs) {
      const double n = y.norm();
      if (!(n > 0) || !std::isfinite(n)) fail(ErrorKind::DiscontinuityDetected, "sphere map image is not a direction");
      mesh.images.push_back(y / n);
    }
    out.evaluations += static_cast<int>(pts.size());
  };
  evaluate_new();

  constexpr int kMaxDepth = 40;
  while (true) {
    std::vector<SphereMesh::Leaf> keep, coarse;
    for (const auto& f : mesh.leaves) {
      if (mesh.image_diameter(mesh.polygon(f)) > max_image_diameter && f.depth < kMaxDepth)
        coarse.push_back(f);
      else
        keep.push_back(f);
    }
    if (coarse.empty()) break;
    if (out.evaluations + 3 * static_cast<int>(coarse.size()) > budget) {
      out.budget_exhausted = true;
      break;
    }
    for (const auto& f : coarse)
      for (const auto& g : mesh.split(f)) keep.push_back(g);
    mesh.leaves = std::move(keep);
    evaluate_new();
  }

  double total = 0.0;
  for (const auto& f : mesh.leaves) {
    const auto poly = mesh.polygon(f);
    out.max_image_diameter = std::max(out.max_image_diameter, mesh.image_diameter(poly));
    out.level = std::max(out.level, f.depth);
    for (std::size_t i = 1; i + 1 < poly.size(); ++i)
      total += signed_solid_angle(mesh.images[poly[0]], mesh.images[poly[i]], mesh.images[poly[i + 1]]);
  }
  out.raw = total / (4 * kPi);
  return out;
}

DegreeEstimate degree_sphere(const PotentialModel& model, double energy, const Vec& theta_raw,
                             const DegreeOptions& opt) {
  if (model.dimension() != 3) fail(ErrorKind::InvalidArgument, "sphere degree needs d = 3");
  const Vec theta = unit_or_throw(theta_raw, 3);
  ScatterContext ctx(model, energy, opt.scatter);
  const Vec e1 = theta.unitOrthogonal();
  const Vec e2 = cross(theta, e1);
  const int threads = opt.scatter.threads > 0 ? opt.scatter.threads : default_thread_count();

  SphereMap map = [&](const std::vector<Vec>& ws) {
    return parallel_map(
        ws.size(),
        [&](std::size_t i) -> Vec {
          const Vec& w = ws[i];
          const double den = 1.0 + w(2);
          if (den < 1e-12) return theta;  // the point at infinity
          const Vec b = (w(0) * e1 - w(1) * e2) / den;
          const ScatterRecord r = ctx.scatter(theta, b);
          if (!r.escaped())
            fail(ErrorKind::DiscontinuityDetected,
                 std::string("sphere sample is ") + to_string(r.status) +
                     (r.failure.empty() ? "" : " (" + r.failure + ")"));
          return r.theta_out;
        },
        threads);
  };
  const SphereDegree sd = sphere_map_degree(map, opt.mesh_level, opt.max_image_diameter, opt.mesh_budget);
  if (sd.max_image_diameter > kPi / 2)
    fail(ErrorKind::MeshTooCoarse, "image triangles of diameter " + format_number(sd.max_image_diameter) +
                                       " remain after " + std::to_string(sd.evaluations) + " evaluations");
  DegreeEstimate est;
  est.method = DegreeMethod::Sphere3d;
  est.theta = theta;
  est.raw = sd.raw;
  est.samples = sd.evaluations;
  est.refinement_level = sd.level;
  if (sd.budget_exhausted) est.note = "mesh budget exhausted";
  finish(est);
  return est;
}

// ---------------------------------------------------------------- central quadrature

namespace {

constexpr double kQuadRel = 1e-12;
constexpr double kQuadAbs = 1e-13;

}  // namespace

DeflectionResult deflection_quadrature(const PotentialModel& model, double energy, double l_signed) {
  if (model.dimension() != 2) fail(ErrorKind::InvalidArgument, "deflection quadrature needs d = 2");
  if (!model.symmetry_center()) fail(ErrorKind::InvalidArgument, "deflection quadrature needs a central model");
  if (!(energy > 0) || !std::isfinite(energy)) fail(ErrorKind::InvalidArgument, "energy must be positive");
  if (!(l_signed != 0) || !std::isfinite(l_signed)) fail(ErrorKind::InvalidArgument, "angular momentum must be nonzero");
  const double l = std::abs(l_signed);
  auto veff = [&](double r) { return model.radial_profile(r) + l * l / (2 * r * r); };

  // Largest root of V_l = E: walk inward from a radius where V_l < E.
  const double rv = virial_radius(model, energy).radius;
  double hi = 2.0 * std::max(rv, 2.0 * l / std::sqrt(2 * energy));
  double lo = hi;
  constexpr double kStep = 1.01;
  while (veff(lo) < energy) {
    hi = lo;
    lo /= kStep;
    if (lo < 1e-200)
      fail(ErrorKind::NoPericentre, "no turning point of the effective potential");
  }
  for (int i = 0; i < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++i) {
    const double m = 0.5 * (lo + hi);
    (veff(m) < energy ? hi : lo) = m;
  }
  const double rmin = hi;
  const double vtop = veff(rmin);  // E up to rounding; keeps the radicand exact at r_min

  const double r1 = 2.0 * rmin;
  auto near = [&](double u) {
    const double r = rmin + u * u;
    const double gap = vtop - veff(r);
    if (!(gap > 0)) return 0.0;
    return 2.0 * u * (l / (r * r)) / std::sqrt(2.0 * gap);
  };
  auto far = [&](double x) {
    if (x <= 0) return l / r1 / std::sqrt(2.0 * (energy - model.radial_profile(1e300)));
    const double r = r1 / x;
    return (l / r1) / std::sqrt(2.0 * (energy - veff(r)));
  };
  const auto a = integrate_gk<double>(near, 0.0, std::sqrt(r1 - rmin), kQuadAbs, kQuadRel, 4000);
  const auto b = integrate_gk<double>(far, 0.0, 1.0, kQuadAbs, kQuadRel, 4000);

  DeflectionResult out;
  out.energy = energy;
  out.l = l_signed;
  out.r_min = rmin;
  const double sgn = l_signed > 0 ? 1.0 : -1.0;
  out.delta_phi = sgn * 2.0 * (a.value + b.value);
  out.deflection = out.delta_phi - sgn * kPi;
  out.error = 2.0 * (a.error + b.error);
  out.converged = a.converged && b.converged && std::isfinite(out.delta_phi);
  return out;
}

DeflectionResult deflection_power_law(double Z, double alpha, double energy, double l_signed) {
  if (!(Z > 0) || !(alpha > 0 && alpha < 2) || !(energy > 0) || !(l_signed != 0) ||
      !std::isfinite(Z + alpha + energy + l_signed))
    fail(ErrorKind::InvalidArgument, "power-law deflection needs Z > 0, 0 < alpha < 2, E > 0, l != 0");
  const double l = std::abs(l_signed);
  // r = c / v with c^(2 - alpha) = l^2 / (2 Z) scales the radicand to kappa + v^a - v^2.
  const double c = std::pow(l * l / (2 * Z), 1.0 / (2 - alpha));
  const double kappa = energy * std::pow(c, alpha) / Z;
  auto f = [&](double v) { return kappa + std::pow(v, alpha) - v * v; };
  double lo = 0.0, hi = 1.0;
  while (f(hi) > 0) {
    lo = hi;
    hi *= 2;
  }
  for (int i = 0; i < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * hi; ++i) {
    const double m = 0.5 * (lo + hi);
    (f(m) > 0 ? lo : hi) = m;
  }
  const double vmax = lo;
  const double fmax = f(vmax);

  // v = w^k tames the v^(alpha - 1) derivative at 0; v = vmax - u^2 the square-root edge.
  const int k = static_cast<int>(std::ceil(2.0 / (2.0 - alpha))) + 1;
  auto lower = [&](double w) {
    const double v = std::pow(w, k);
    return k * std::pow(w, k - 1) / std::sqrt(f(v));
  };
  auto upper = [&](double u) {
    const double g = f(vmax - u * u) - fmax;
    if (!(g > 0)) return 0.0;
    return 2.0 * u / std::sqrt(g);
  };
  const double split = 0.5 * vmax;
  const auto a = integrate_gk<double>(lower, 0.0, std::pow(split, 1.0 / k), kQuadAbs, kQuadRel, 4000);
  const auto b = integrate_gk<double>(upper, 0.0, std::sqrt(vmax - split), kQuadAbs, kQuadRel, 4000);

  DeflectionResult out;
  out.energy = energy;
  out.l = l_signed;
  out.r_min = c / vmax;
  const double sgn = l_signed > 0 ? 1.0 : -1.0;
  out.delta_phi = sgn * 2.0 * (a.value + b.value);
  out.deflection = out.delta_phi - sgn * kPi;
  out.error = 2.0 * (a.error + b.error);
  out.converged = a.converged && b.converged && std::isfinite(out.delta_phi);
  return out;
}

CentralDegree degree_central(const PotentialModel& model, double energy) {
  if (model.dimension() != 2) fail(ErrorKind::InvalidArgument, "central degree needs d = 2");
  if (!model.symmetry_center()) fail(ErrorKind::InvalidArgument, "central degree needs a central model");
  const bool pure_power = model.terms().size() == 1 && model.terms()[0].is_singular();
  auto deflect = [&](double l) {
    if (pure_power) {
      const auto& t = model.terms()[0];
      return deflection_power_law(t.strength, t.alpha, energy, l);
    }
    return deflection_quadrature(model, energy, l);
  };
  CentralDegree out;
  for (double l : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) out.limit_sequence.push_back(deflect(l));
  const auto& seq = out.limit_sequence;
  const double last = seq.back().delta_phi, prev = seq[seq.size() - 2].delta_phi;
  // Linear-in-l Richardson step on the decade sequence.
  out.collision_limit = (10.0 * last - prev) / 9.0;

  DegreeEstimate& est = out.estimate;
  est.method = DegreeMethod::QuadratureCentral;
  est.theta = vec2(1, 0);
  est.samples = static_cast<int>(seq.size());
  est.refinement_level = static_cast<int>(seq.size());
  est.raw = -(out.collision_limit - kPi) / kPi;
  finish(est);
  const bool ok = std::all_of(seq.begin(), seq.end(), [](const auto& d) { return d.converged; });
  if (!ok) est.note = "quadrature did not reach tolerance";
  return out;
}

// ---------------------------------------------------------------- Lagrange projection

std::vector<Vec> random_accessible_points(const PotentialModel& model, double energy, int count,
                                          double radius, unsigned long long seed) {
  if (model.dimension() != 2) fail(ErrorKind::InvalidArgument, "accessible points are sampled in d = 2");
  if (count < 0) fail(ErrorKind::InvalidArgument, "count must be nonnegative");
  const double rv = virial_radius(model, energy).radius;
  if (!(radius > 0)) radius = rv;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> out;
  const double margin = 1e-3 * std::abs(energy);
  const int max_tries = 1000 * std::max(count, 1);
  for (int tries = 0; static_cast<int>(out.size()) < count && tries < max_tries; ++tries) {
    const double r = radius * std::sqrt(unif(rng));
    const Vec q = r * unit_angle(2 * kPi * unif(rng));
    if (model.distance_to_singularity(q) < 0.05) continue;
    bool ok = true;
    const double reach = std::max(rv, r) + 1.0;
    const Vec dir = r > 0 ? Vec(q / r) : vec2(1, 0);
    for (double s = 0.0; s <= reach && ok; s += 0.01 * reach) ok = model.value(Vec(q + s * dir)) < energy - margin;
    if (ok) out.push_back(q);
  }
  if (static_cast<int>(out.size()) < count)
    fail(ErrorKind::InvalidArgument, "too few accessible points in the sampling disk");
  return out;
}

namespace {

// Position on the (possibly free-flight extended) trajectory at time t.
struct Track {
  Trajectory tr;
  Vec at(double t) const {
    const PhaseState& e = tr.final_state();
    if (t >= e.t) return e.q + (t - e.t) * e.p;
    return tr.state_at(std::max(t, 0.0)).q;
  }
  Vec momentum(double t) const {
    const PhaseState& e = tr.final_state();
    if (t >= e.t) return e.p;
    return tr.state_at(std::max(t, 0.0)).p;
  }
};

Track track(const ScatterContext& ctx, const Vec& theta, double b) {
  Track t{ctx.trajectory(theta, impact_vector(theta, b))};
  if (t.tr.stop_reason != StopReason::Extracted)
    fail(ErrorKind::DiscontinuityDetected, "trajectory did not escape during the Lagrange sweep");
  return t;
}

struct Root {
  double t, b, residual, det;
};

Root newton(const ScatterContext& ctx, const Vec& theta, const Vec& target, double t, double b,
            double b_scale) {
  const double tol = 1e-11 * std::max(1.0, target.norm());
  Root out{t, b, std::numeric_limits<double>::infinity(), 0.0};
  for (int it = 0; it < 40; ++it) {
    const Track c = track(ctx, theta, b);
    const double h = 1e-6 * std::max(1.0, std::abs(b));
    const Track up = track(ctx, theta, b + h), dn = track(ctx, theta, b - h);
    const Vec F = c.at(t) - target;
    Eigen::Matrix2d J;
    J.col(0) = c.momentum(t);
    J.col(1) = (up.at(t) - dn.at(t)) / (2 * h);
    out = {t, b, F.norm(), J.determinant()};
    if (out.residual <= tol) return out;
    if (std::abs(out.det) < 1e-12 * J.norm() * J.norm())
      fail(ErrorKind::SingularJacobian, "Jacobian of the Lagrange projection is singular at a preimage");
    Eigen::Vector2d step = J.partialPivLu().solve(-Eigen::Vector2d(F(0), F(1)));
    const double cap = 0.1 * b_scale;  // keep the iteration local to its seed cell
    if (step.norm() > cap) step *= cap / step.norm();
    t = std::max(0.0, t + step(0));
    b += step(1);
  }
  return out;
}

}  // namespace

LagrangeResult lagrange_degree(const PotentialModel& model, double energy, const Vec& theta_raw,
                               const Vec& target_raw, const LagrangeOptions& opt) {
  if (model.dimension() != 2) fail(ErrorKind::InvalidArgument, "Lagrange projection needs d = 2");
  const Vec theta = unit_or_throw(theta_raw, 2);
  if (target_raw.size() != 2) fail(ErrorKind::InvalidArgument, "target must be a point of the plane");
  if (opt.b_samples < 4 || opt.t_samples < 4) fail(ErrorKind::InvalidArgument, "Lagrange grid too small");
  ScatterContext ctx(model, energy, opt.scatter);
  const double rv = ctx.virial().radius;
  const int threads = opt.scatter.threads > 0 ? opt.scatter.threads : default_thread_count();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);

  LagrangeResult res;
  Vec target = target_raw;
  for (int attempt = 0;; ++attempt) {
    if (!(model.value(target) < energy))
      fail(ErrorKind::InvalidArgument, "target point is not in the accessible region");
    try {
      const double bmax = 2.0 * std::max(target.norm(), rv) + 1.0;
      const int nb = opt.b_samples;
      std::vector<double> bs(nb);
      for (int j = 0; j < nb; ++j) bs[j] = -bmax + 2.0 * bmax * j / (nb - 1);
      const auto tracks = parallel_map(bs.size(), [&](std::size_t j) { return track(ctx, theta, bs[j]); }, threads);

      // Time window in which any trajectory is near the target.
      const double reach = 2.0 * (target.norm() + 1.0);
      double ta = std::numeric_limits<double>::infinity(), tb = 0.0;
      for (const auto& tk : tracks) {
        const auto& st = tk.tr.states;
        for (std::size_t i = 0; i < st.size(); ++i) {
          if (st[i].q.norm() > reach) continue;
          ta = std::min(ta, i > 0 ? st[i - 1].t : st[i].t);
          tb = std::max(tb, i + 1 < st.size() ? st[i + 1].t : st[i].t);
        }
      }
      if (!(ta < tb)) fail(ErrorKind::InvalidArgument, "no trajectory passes near the target");
      const int nt = opt.t_samples;
      std::vector<double> ts(nt);
      for (int i = 0; i < nt; ++i) ts[i] = ta + (tb - ta) * i / (nt - 1);
      const auto grid = parallel_map(
          bs.size(),
          [&](std::size_t j) {
            std::vector<Vec> col(nt);
            for (int i = 0; i < nt; ++i) col[i] = tracks[j].at(ts[i]) - target;
            return col;
          },
          threads);

      // Seeds: grid triangles whose image contains the target.
      std::vector<std::pair<double, double>> seeds;
      auto test = [&](int i0, int j0, int i1, int j1, int i2, int j2) {
        const Vec& A = grid[j0][i0];
        const Vec& B = grid[j1][i1];
        const Vec& C = grid[j2][i2];
        const double s1 = cross2(Vec(B - A), Vec(-A)), s2 = cross2(Vec(C - B), Vec(-B)), s3 = cross2(Vec(A - C), Vec(-C));
        const bool inside = (s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0);
        if (!inside) return;
        const double area = s1 + s2 + s3;
        if (area == 0) return;
        const double wa = s2 / area, wb = s3 / area, wc = s1 / area;
        seeds.emplace_back(wa * ts[i0] + wb * ts[i1] + wc * ts[i2], wa * bs[j0] + wb * bs[j1] + wc * bs[j2]);
      };
      for (int j = 0; j + 1 < nb; ++j)
        for (int i = 0; i + 1 < nt; ++i) {
          test(i, j, i + 1, j, i + 1, j + 1);
          test(i, j, i + 1, j + 1, i, j + 1);
        }

      const double db = bs[1] - bs[0], dt = ts[1] - ts[0];
      auto polished = parallel_map(
          seeds.size(), [&](std::size_t k) { return newton(ctx, theta, target, seeds[k].first, seeds[k].second, db); },
          threads);
      std::vector<LagrangePreimage> roots;
      for (const auto& r : polished) {
        if (!(r.residual <= 1e-8 * std::max(1.0, target.norm()))) continue;
        const bool dup = std::any_of(roots.begin(), roots.end(), [&](const LagrangePreimage& p) {
          return std::abs(p.t - r.t) < 1e-6 * std::max(1.0, dt) && std::abs(p.b - r.b) < 1e-6 * std::max(1.0, db);
        });
        if (dup) continue;
        roots.push_back({r.t, r.b, r.residual, r.det > 0 ? 1 : -1});
        if (static_cast<int>(roots.size()) > opt.max_roots)
          fail(ErrorKind::RootBudgetExceeded, "more than " + std::to_string(opt.max_roots) + " preimages");
      }
      std::sort(roots.begin(), roots.end(), [](const auto& a, const auto& b) { return a.t < b.t; });

      res.target = target;
      res.preimages = roots;
      res.projection_degree = 0;
      for (const auto& r : roots) res.projection_degree += r.sign;
      res.resamples = attempt;
      DegreeEstimate& est = res.estimate;
      est.method = DegreeMethod::LagrangeProjection;
      est.theta = theta;
      est.samples = nb * nt;
      est.value = 1 - res.projection_degree;
      est.raw = est.value;
      est.residual = 0.0;
      return res;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularJacobian || attempt >= opt.max_resamples) throw;
      target = target_raw + 1e-3 * std::max(1.0, target_raw.norm()) * vec2(jitter(rng), jitter(rng));
    }
  }
}

// ---------------------------------------------------------------- output

void write_degree_json(std::ostream& os, double energy, const DegreeEstimate& est) {
  nlohmann::json j;
  j["E"] = energy;
  j["method"] = to_string(est.method);
  j["value"] = est.value;
  j["residual"] = est.residual;
  j["theta"] = std::vector<double>(est.theta.data(), est.theta.data() + est.theta.size());
  j["samples"] = est.samples;
  j["raw"] = est.raw;
  j["refinement_level"] = est.refinement_level;
  if (!est.note.empty()) j["note"] = est.note;
  os << dump_json(j);
}

void write_deflection_json(std::ostream& os, const DeflectionResult& d) {
  nlohmann::json j;
  j["E"] = d.energy;
  j["l"] = d.l;
  j["r_min"] = d.r_min;
  j["delta_phi"] = d.delta_phi;
  j["deflection"] = d.deflection;
  j["converged"] = d.converged;
  j["error"] = d.error;
  os << dump_json(j);
}

}  // namespace scatdeg
