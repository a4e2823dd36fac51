#include "scatdeg/potential.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace scatdeg {

const char* to_string(TermKind kind) {
  switch (kind) {
    case TermKind::GaussianBump: return "gaussian_bump";
    case TermKind::PolyBump: return "poly_bump";
    case TermKind::SingularPower: return "singular_power";
  }
  return "unknown";
}

PotentialTerm PotentialTerm::gaussian(double A, double sigma, Vec center) {
  if (!(sigma > 0.0)) fail(ErrorKind::InvalidArgument, "gaussian_bump needs sigma > 0");
  PotentialTerm t;
  t.kind = TermKind::GaussianBump;
  t.amplitude = A;
  t.width = sigma;
  t.center = std::move(center);
  return t;
}

PotentialTerm PotentialTerm::poly(double A, double rho, Vec center) {
  if (!(rho > 0.0)) fail(ErrorKind::InvalidArgument, "poly_bump needs rho > 0");
  PotentialTerm t;
  t.kind = TermKind::PolyBump;
  t.amplitude = A;
  t.width = rho;
  t.center = std::move(center);
  return t;
}

PotentialTerm PotentialTerm::singular(double Z, double alpha, Vec center) {
  if (!(Z > 0.0)) fail(ErrorKind::InvalidArgument, "singular_power needs Z > 0");
  if (!(alpha > 0.0 && alpha < 2.0))
    fail(ErrorKind::InvalidArgument, "singular_power needs alpha in (0,2)");
  PotentialTerm t;
  t.kind = TermKind::SingularPower;
  t.strength = Z;
  t.alpha = alpha;
  t.center = std::move(center);
  return t;
}

double PotentialTerm::effective_radius() const {
  switch (kind) {
    case TermKind::GaussianBump: return 3.0 * width;
    case TermKind::PolyBump: return width;
    case TermKind::SingularPower: return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

std::optional<int> regularizable_index(double alpha) {
  // alpha = 2n/(n+1)  <=>  n = alpha / (2 - alpha)
  if (!(alpha > 0.0 && alpha < 2.0)) return std::nullopt;
  const double n = alpha / (2.0 - alpha);
  const double rounded = std::round(n);
  if (rounded >= 1.0 && std::abs(n - rounded) < 1e-9 * std::max(1.0, rounded))
    return static_cast<int>(rounded);
  return std::nullopt;
}

namespace {

void accumulate(const PotentialTerm& t, const Vec& q, double& value, Vec& grad) {
  const Vec d = q - t.center;
  const double r2 = d.squaredNorm();
  switch (t.kind) {
    case TermKind::GaussianBump: {
      const double s2 = t.width * t.width;
      const double e = t.amplitude * std::exp(-r2 / s2);
      value += e;
      grad.noalias() += (-2.0 * e / s2) * d;
      break;
    }
    case TermKind::PolyBump: {
      const double x = r2 / (t.width * t.width);
      if (x < 1.0) {
        const double w = 1.0 - x;
        value += t.amplitude * w * w * w;
        grad.noalias() += (-6.0 * t.amplitude * w * w / (t.width * t.width)) * d;
      }
      break;
    }
    case TermKind::SingularPower: {
      if (r2 == 0.0)
        fail(ErrorKind::EvaluationAtSingularity, "potential evaluated at a singular center");
      const double r = std::sqrt(r2);
      const double ra = std::pow(r, -t.alpha);
      value -= t.strength * ra;
      grad.noalias() += (t.alpha * t.strength * ra / r2) * d;
      break;
    }
  }
}

}  // namespace

PotentialModel::PotentialModel(int dimension, std::vector<PotentialTerm> terms)
    : dim_(dimension), terms_(std::move(terms)) {
  if (dim_ != 2 && dim_ != 3) fail(ErrorKind::InvalidArgument, "dimension must be 2 or 3");
  for (const auto& t : terms_) {
    if (t.center.size() != dim_)
      fail(ErrorKind::InvalidArgument, "term center dimension does not match model");
  }
  vmax_ = compute_vmax();
}

Evaluation PotentialModel::eval(const Vec& q) const {
  Evaluation out;
  out.grad = Vec::Zero(dim_);
  for (const auto& t : terms_) accumulate(t, q, out.value, out.grad);
  return out;
}

double PotentialModel::value(const Vec& q) const { return eval(q).value; }

Evaluation PotentialModel::eval_regular_part(const Vec& q) const {
  Evaluation out;
  out.grad = Vec::Zero(dim_);
  for (const auto& t : terms_)
    if (!t.is_singular()) accumulate(t, q, out.value, out.grad);
  return out;
}

Mat PotentialModel::hessian(const Vec& q) const {
  Mat h = Mat::Zero(dim_, dim_);
  const Mat id = Mat::Identity(dim_, dim_);
  for (const auto& t : terms_) {
    const Vec d = q - t.center;
    const double r2 = d.squaredNorm();
    switch (t.kind) {
      case TermKind::GaussianBump: {
        const double s2 = t.width * t.width;
        const double e = t.amplitude * std::exp(-r2 / s2);
        h += e * ((-2.0 / s2) * id + (4.0 / (s2 * s2)) * d * d.transpose());
        break;
      }
      case TermKind::PolyBump: {
        const double p2 = t.width * t.width;
        const double x = r2 / p2;
        if (x < 1.0) {
          const double w = 1.0 - x;
          h += (-6.0 * t.amplitude * w * w / p2) * id +
               (24.0 * t.amplitude * w / (p2 * p2)) * d * d.transpose();
        }
        break;
      }
      case TermKind::SingularPower: {
        if (r2 == 0.0)
          fail(ErrorKind::EvaluationAtSingularity, "hessian evaluated at a singular center");
        const double r = std::sqrt(r2);
        const double ra = std::pow(r, -t.alpha);
        h += t.alpha * t.strength * ra / r2 *
             (id - ((t.alpha + 2.0) / r2) * d * d.transpose());
        break;
      }
    }
  }
  return h;
}

int PotentialModel::singular_count() const {
  return static_cast<int>(std::count_if(terms_.begin(), terms_.end(),
                                        [](const PotentialTerm& t) { return t.is_singular(); }));
}

const PotentialTerm& PotentialModel::singular_term() const {
  if (singular_count() != 1)
    fail(ErrorKind::InvalidArgument, "model must have exactly one singular term");
  for (const auto& t : terms_)
    if (t.is_singular()) return t;
  fail(ErrorKind::InvalidArgument, "no singular term");
}

std::optional<Vec> PotentialModel::symmetry_center() const {
  if (terms_.empty()) return Vec(Vec::Zero(dim_));
  const Vec& c = terms_.front().center;
  for (const auto& t : terms_)
    if ((t.center - c).norm() > 1e-14 * (1.0 + c.norm())) return std::nullopt;
  return c;
}

double PotentialModel::radial_profile(double r) const {
  const auto c = symmetry_center();
  if (!c) fail(ErrorKind::InvalidArgument, "radial profile requires a central model");
  Vec q = *c;
  q(0) += r;
  return value(q);
}

double PotentialModel::distance_to_singularity(const Vec& q) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : terms_)
    if (t.is_singular()) best = std::min(best, (q - t.center).norm());
  return best;
}

double PotentialModel::compute_vmax() const {
  // Singular terms only pull V down, so the supremum is attained at a local
  // maximum of V (or is the limit 0 at infinity).
  std::vector<Vec> seeds;
  double lo = 0.0, hi = 0.0;
  bool any_bump = false;
  for (const auto& t : terms_) {
    if (t.is_singular()) continue;
    seeds.push_back(t.center);
    const double reach = t.kind == TermKind::GaussianBump ? 3.0 * t.width : t.width;
    const double mn = t.center.minCoeff() - reach, mx = t.center.maxCoeff() + reach;
    lo = any_bump ? std::min(lo, mn) : mn;
    hi = any_bump ? std::max(hi, mx) : mx;
    any_bump = true;
  }
  if (!any_bump) return 0.0;

  const int per_axis = dim_ == 2 ? 24 : 10;
  const double step = (hi - lo) / (per_axis - 1);
  if (dim_ == 2) {
    for (int i = 0; i < per_axis; ++i)
      for (int j = 0; j < per_axis; ++j) seeds.push_back(vec2(lo + i * step, lo + j * step));
  } else {
    for (int i = 0; i < per_axis; ++i)
      for (int j = 0; j < per_axis; ++j)
        for (int k = 0; k < per_axis; ++k)
          seeds.push_back(vec3(lo + i * step, lo + j * step, lo + k * step));
  }

  double best = 0.0;
  for (Vec q : seeds) {
    if (distance_to_singularity(q) < 1e-6) continue;
    Evaluation ev = eval(q);
    double step_len = 0.1 * std::max(1e-3, hi - lo);
    for (int it = 0; it < 500 && step_len > 1e-13; ++it) {
      const double gnorm = ev.grad.norm();
      if (gnorm < 1e-13) break;
      const Vec trial = q + (step_len / gnorm) * ev.grad;
      if (distance_to_singularity(trial) < 1e-9) {
        step_len *= 0.5;
        continue;
      }
      Evaluation ev_trial = eval(trial);
      if (ev_trial.value > ev.value) {
        q = trial;
        ev = std::move(ev_trial);
        step_len *= 1.5;
      } else {
        step_len *= 0.5;
      }
    }
    // Newton polish where the Hessian is negative definite.
    for (int it = 0; it < 20; ++it) {
      const Mat h = hessian(q);
      Eigen::SelfAdjointEigenSolver<Mat> es(h);
      if (es.eigenvalues().maxCoeff() >= 0.0) break;
      const Vec dq = -h.ldlt().solve(ev.grad);
      if (dq.norm() > 1e-2) break;
      const Vec trial = q + dq;
      Evaluation ev_trial = eval(trial);
      if (ev_trial.value < ev.value - 1e-15 * std::abs(ev.value)) break;
      q = trial;
      ev = std::move(ev_trial);
      if (dq.norm() < 1e-15) break;
    }
    best = std::max(best, ev.value);
  }
  return best;
}

std::vector<Vec> sphere_directions(int dimension, int count) {
  std::vector<Vec> dirs;
  dirs.reserve(count);
  if (dimension == 2) {
    for (int i = 0; i < count; ++i) dirs.push_back(unit_angle(2.0 * kPi * i / count));
  } else {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / count;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      dirs.push_back(vec3(rho * std::cos(phi), rho * std::sin(phi), z));
    }
  }
  return dirs;
}

double virial_margin(const PotentialModel& model, double energy, double r, int directions) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const Vec& dir : sphere_directions(model.dimension(), directions)) {
    const Vec q = r * dir;
    if (model.distance_to_singularity(q) == 0.0) return std::numeric_limits<double>::infinity();
    const Evaluation ev = model.eval(q);
    worst = std::max({worst, std::abs(ev.value), std::abs(q.dot(ev.grad))});
  }
  return worst - 0.5 * energy;
}

VirialData virial_radius(const PotentialModel& model, double energy, const VirialConfig& config) {
  if (!(energy > 0.0)) fail(ErrorKind::InvalidArgument, "virial radius needs E > 0");
  const int dirs = model.dimension() == 2 ? config.directions_2d : config.directions_3d;

  double min_radius = config.r_floor;
  for (const auto& t : model.terms())
    if (t.is_singular()) min_radius = std::max(min_radius, 2.0 * t.center.norm());

  // Largest failing radius on the geometric grid.
  std::vector<double> radii;
  for (double r = min_radius; r <= config.ceiling; r *= config.growth) radii.push_back(r);
  int last_fail = -1;
  for (int i = 0; i < static_cast<int>(radii.size()); ++i)
    if (virial_margin(model, energy, radii[i], dirs) >= 0.0) last_fail = i;

  VirialData out;
  out.energy = energy;
  out.safety_factor = config.safety_factor;
  if (last_fail < 0) {
    out.radius = min_radius;
    return out;
  }
  if (last_fail + 1 >= static_cast<int>(radii.size()))
    fail(ErrorKind::NoVirialRadius,
         "virial inequalities violated up to radius " + std::to_string(config.ceiling));

  double lo = radii[last_fail], hi = radii[last_fail + 1];
  for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (virial_margin(model, energy, mid, dirs) >= 0.0 ? lo : hi) = mid;
  }
  out.radius = std::max(min_radius, config.safety_factor * hi);
  return out;
}

bool star_shaped_sampled(const PotentialModel& model, double radius, int samples) {
  const int d = model.dimension();
  // deterministic low-discrepancy fill of the ball
  const auto dirs = sphere_directions(d, samples);
  for (int i = 1; i <= samples; ++i) {
    const double frac = std::pow(static_cast<double>(i) / samples, 1.0 / d);
    const Vec& dir = dirs[(static_cast<std::size_t>(i) * 7919) % dirs.size()];
    const Vec q = radius * frac * dir;
    if (model.distance_to_singularity(q) < 1e-9) continue;
    if (q.dot(model.eval(q).grad) > 1e-12) return false;
  }
  return true;
}

}  // namespace scatdeg
