#include "scatdeg/dynamics.hpp"

#include <algorithm>
#include <complex>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>

namespace scatdeg {

using cplx = std::complex<double>;

double hamiltonian(const PotentialModel& model, const Vec& q, const Vec& p) {
  return 0.5 * p.squaredNorm() + model.value(q);
}

double angular_momentum(const Vec& q, const Vec& p) {
  if (q.size() == 2) return q(0) * p(1) - q(1) * p(0);
  const Eigen::Vector3d a(q(0), q(1), q(2)), b(p(0), p(1), p(2));
  return a.cross(b).norm();
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Pericentre: return "pericentre";
    case EventKind::Collision: return "collision";
    case EventKind::Escape: return "escape";
    case EventKind::Timeout: return "timeout";
  }
  return "unknown";
}

double switch_radius(const PotentialTerm& singular, double energy) {
  if (!(energy > 0.0)) return 0.05;
  return 0.05 * std::min(1.0, std::pow(singular.strength / energy, 1.0 / singular.alpha));
}

namespace {

// ---------------------------------------------------------------------------
// Chart geometry. State layout: [position-like, momentum-like, t].

Eigen::Matrix4d ks_matrix(const double* u) {
  Eigen::Matrix4d L;
  L << u[0], -u[1], -u[2], u[3],
       u[1], u[0], -u[3], -u[2],
       u[2], u[3], u[0], u[1],
       u[3], -u[2], u[1], -u[0];
  return L;
}

Eigen::Vector4d ks_u(const State& y) { return y.segment<4>(0); }
Eigen::Vector4d ks_P(const State& y) { return y.segment<4>(4); }

// Exact integer power (std::pow on complex goes through log and fails at 0).
cplx ipow(cplx w, int k) {
  cplx r(1.0, 0.0);
  for (int i = 0; i < k; ++i) r *= w;
  return r;
}

cplx lc_w(const State& y) { return {y(0), y(1)}; }
cplx lc_P(const State& y) { return {y(2), y(3)}; }

int time_index(const ChartFrame& f, int dim) {
  switch (f.chart) {
    case Chart::Cartesian: return 2 * dim;
    case Chart::LeviCivita: return 4;
    case Chart::KustaanheimoStiefel: return 8;
  }
  return 0;
}

// |q - s|
double chart_radius(const ChartFrame& f, const State& y, int dim) {
  switch (f.chart) {
    case Chart::Cartesian: return (y.head(dim) - f.center).norm();
    case Chart::LeviCivita: return std::pow(std::norm(lc_w(y)), 0.5 * f.power);
    case Chart::KustaanheimoStiefel: return ks_u(y).squaredNorm();
  }
  return 0.0;
}

// <q - s, p>
double chart_radial(const ChartFrame& f, const State& y, int dim) {
  switch (f.chart) {
    case Chart::Cartesian: return (y.head(dim) - f.center).dot(y.segment(dim, dim));
    case Chart::LeviCivita: {
      const cplx w = lc_w(y), P = lc_P(y);
      return (w.real() * P.real() + w.imag() * P.imag()) / f.power;
    }
    case Chart::KustaanheimoStiefel: return 0.5 * ks_u(y).dot(ks_P(y));
  }
  return 0.0;
}

Vec chart_position(const ChartFrame& f, const State& y, int dim) {
  switch (f.chart) {
    case Chart::Cartesian: return y.head(dim);
    case Chart::LeviCivita: {
      const cplx z = ipow(lc_w(y), f.power);
      return f.center + vec2(z.real(), z.imag());
    }
    case Chart::KustaanheimoStiefel: {
      const Eigen::Vector4d u = ks_u(y);
      const Eigen::Vector4d x = ks_matrix(u.data()) * u;
      return f.center + vec3(x(0), x(1), x(2));
    }
  }
  return {};
}

PhaseState chart_to_phase(const ChartFrame& f, const State& y, int dim) {
  PhaseState x;
  x.t = y(time_index(f, dim));
  x.q = chart_position(f, y, dim);
  switch (f.chart) {
    case Chart::Cartesian: x.p = y.segment(dim, dim); break;
    case Chart::LeviCivita: {
      const cplx w = lc_w(y);
      const cplx fp = double(f.power) * ipow(w, f.power - 1);
      const cplx p = lc_P(y) / std::conj(fp);
      x.p = vec2(p.real(), p.imag());
      break;
    }
    case Chart::KustaanheimoStiefel: {
      const Eigen::Vector4d u = ks_u(y);
      const Eigen::Vector4d p = ks_matrix(u.data()) * ks_P(y) / (2.0 * u.squaredNorm());
      x.p = vec3(p(0), p(1), p(2));
      break;
    }
  }
  return x;
}

State phase_to_chart(const ChartFrame& f, const PhaseState& x, int dim) {
  State y;
  switch (f.chart) {
    case Chart::Cartesian:
      y.resize(2 * dim + 1);
      y << x.q, x.p, x.t;
      return y;
    case Chart::LeviCivita: {
      const Vec d = x.q - f.center;
      const cplx z(d(0), d(1));
      // principal branch; every root is an equivalent chart point
      const cplx w = std::polar(std::pow(std::abs(z), 1.0 / f.power), std::arg(z) / f.power);
      const cplx P = std::conj(double(f.power) * ipow(w, f.power - 1)) * cplx(x.p(0), x.p(1));
      y.resize(5);
      y << w.real(), w.imag(), P.real(), P.imag(), x.t;
      return y;
    }
    case Chart::KustaanheimoStiefel: {
      const Vec d = x.q - f.center;
      const double r = d.norm();
      Eigen::Vector4d u;
      if (d(0) >= 0.0) {
        const double u1 = std::sqrt(0.5 * (r + d(0)));
        u << u1, d(1) / (2 * u1), d(2) / (2 * u1), 0.0;
      } else {
        const double u2 = std::sqrt(0.5 * (r - d(0)));
        u << d(1) / (2 * u2), u2, 0.0, d(2) / (2 * u2);
      }
      const Eigen::Vector4d p4(x.p(0), x.p(1), x.p(2), 0.0);
      const Eigen::Vector4d P = 2.0 * ks_matrix(u.data()).transpose() * p4;
      y.resize(9);
      y << u, P, x.t;
      return y;
    }
  }
  return y;
}

// Angular momentum about the chart center (signed in d=2).
double chart_angular_momentum(const ChartFrame& f, const State& y, int dim) {
  switch (f.chart) {
    case Chart::Cartesian: return angular_momentum(y.head(dim) - f.center, y.segment(dim, dim));
    case Chart::LeviCivita: {
      const cplx w = lc_w(y), P = lc_P(y);
      return (w.real() * P.imag() - w.imag() * P.real()) / f.power;
    }
    case Chart::KustaanheimoStiefel: {
      const Eigen::Vector4d u = ks_u(y);
      if (u.squaredNorm() == 0.0) return 0.0;
      const PhaseState x = chart_to_phase(f, y, dim);
      return angular_momentum(x.q - f.center, x.p);
    }
  }
  return 0.0;
}

// Regularized Hamiltonian K (zero on the energy shell).
double chart_K(const ChartFrame& f, const PotentialModel& model, const State& y, int dim) {
  const Vec q = chart_position(f, y, dim);
  const double W = model.eval_regular_part(q).value;
  if (f.chart == Chart::LeviCivita) {
    const double m = f.power;
    const double rho2 = std::norm(lc_w(y));
    return std::norm(lc_P(y)) / (2 * m * m) - f.strength + std::pow(rho2, m - 1) * (W - f.energy);
  }
  const double r = ks_u(y).squaredNorm();
  return ks_P(y).squaredNorm() / 8.0 - f.strength + r * (W - f.energy);
}

void chart_rhs(const ChartFrame& f, const PotentialModel& model, int dim, const State& y,
               State& dy) {
  switch (f.chart) {
    case Chart::Cartesian: {
      const Evaluation e = model.eval(y.head(dim));
      dy.head(dim) = y.segment(dim, dim);
      dy.segment(dim, dim) = -e.grad;
      dy(2 * dim) = 1.0;
      return;
    }
    case Chart::LeviCivita: {
      const int m = f.power;
      const cplx w = lc_w(y), P = lc_P(y);
      const cplx z = ipow(w, m);
      const Evaluation e = model.eval_regular_part(f.center + vec2(z.real(), z.imag()));
      const cplx g(e.grad(0), e.grad(1));
      const double rho2 = std::norm(w);
      const double scale = std::pow(rho2, m - 1);  // |w|^(2m-2) = r^alpha
      const cplx fp = double(m) * ipow(w, m - 1);
      // grad_w of W(s + w^m) is conj(f'(w)) grad W for the holomorphic chart map
      const cplx dP = -(double(2 * m - 2) * std::pow(rho2, m - 2) * (e.value - f.energy) * w +
                        scale * std::conj(fp) * g);
      const cplx dw = P / double(m * m);
      dy(0) = dw.real();
      dy(1) = dw.imag();
      dy(2) = dP.real();
      dy(3) = dP.imag();
      dy(4) = scale;
      return;
    }
    case Chart::KustaanheimoStiefel: {
      const Eigen::Vector4d u = ks_u(y);
      const Eigen::Matrix4d L = ks_matrix(u.data());
      const Eigen::Vector4d x = L * u;
      const Evaluation e = model.eval_regular_part(f.center + vec3(x(0), x(1), x(2)));
      const Eigen::Vector4d g4(e.grad(0), e.grad(1), e.grad(2), 0.0);
      const double r = u.squaredNorm();
      dy.segment<4>(0) = ks_P(y) / 4.0;
      dy.segment<4>(4) = -2.0 * (e.value - f.energy) * u - 2.0 * r * (L.transpose() * g4);
      dy(8) = r;
      return;
    }
  }
}

// Direction of the pericentre; at an exact collision the limit of the
// pericentre directions as l -> 0.
Vec chart_pericentre_direction(const ChartFrame& f, const State& y, int dim, bool collision) {
  if (collision && f.chart == Chart::LeviCivita) {
    const cplx P = lc_P(y);
    const cplx d = ipow(cplx(0, 1) * P / std::abs(P), f.power);
    return vec2(d.real(), d.imag());
  }
  if (collision && f.chart == Chart::KustaanheimoStiefel) {
    const Eigen::Vector4d P = ks_P(y).normalized();
    const Eigen::Vector4d x = ks_matrix(P.data()) * P;
    return -vec3(x(0), x(1), x(2)).normalized();
  }
  const Vec d = chart_position(f, y, dim) - f.center;
  return d / d.norm();
}

// Root of g on [a, b] with g(a) and g(b) of opposite sign (or g(b) == 0).
double find_root(const std::function<double(double)>& g, double a, double b, double ga) {
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const double gm = g(m);
    if ((gm > 0) == (ga > 0) && gm != 0.0) {
      a = m;
      ga = gm;
    } else {
      b = m;
    }
  }
  return b;
}

// Earliest tau in (a, b] where pred holds, given !pred(a) and pred(b).
double find_first(const std::function<bool(double)>& pred, double a, double b) {
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    (pred(m) ? b : a) = m;
  }
  return b;
}

enum class Terminal { None, ChartEntry, ChartExit, Timeout, Extracted };

class Engine {
 public:
  Engine(const PotentialModel& model, const StopCondition& stop, const IntegratorConfig& cfg,
         bool regularize)
      : model_(model), stop_(stop), cfg_(cfg), regularize_(regularize), dim_(model.dimension()) {
    if (model.singular_count() == 1) {
      singular_ = &model.singular_term();
    }
    for (const auto& t : model.terms()) {
      centers_.push_back(t.center);
      if (!t.is_singular()) feature_width_ = std::min(feature_width_, t.width);
    }
    if (!std::isfinite(feature_width_)) feature_width_ = 0.0;
    if (regularize_) {
      if (model.singular_count() != 1)
        fail(ErrorKind::NotRegularizable, "regularized integration needs exactly one singular term");
      const auto n = regularizable_index(singular_->alpha);
      if (!n) fail(ErrorKind::NotRegularizable, "singular exponent is not of the form 2n/(n+1)");
      if (dim_ == 3 && *n != 1)
        fail(ErrorKind::NotRegularizable, "three-dimensional regularization is implemented for n = 1 only");
      n_ = *n;
    }
  }

  Trajectory run(const PhaseState& x0) {
    if (x0.q.size() != dim_ || x0.p.size() != dim_)
      fail(ErrorKind::InvalidArgument, "initial state has the wrong dimension");
    Trajectory tr;
    tr.energy = hamiltonian(model_, x0);
    if (!std::isfinite(tr.energy)) fail(ErrorKind::InvalidArgument, "initial energy is not finite");
    tr.regularized = regularize_;

    ChartFrame cart;
    cart.chart = Chart::Cartesian;
    cart.center = singular_ ? singular_->center : Vec::Zero(dim_);
    tr.frames.push_back(cart);

    if (regularize_) {
      r_switch_ = cfg_.r_switch > 0 ? cfg_.r_switch : switch_radius(*singular_, tr.energy);
      r_exit_ = cfg_.exit_factor * r_switch_;
      c_alpha_ = (2.0 + singular_->alpha) / 2.0;
    }

    tr.states.push_back(x0);
    bool escaped = false;
    if (escape_pred(x0.q, x0.p)) {
      escaped = true;
      push_event(tr, EventKind::Escape, x0);
      if (x0.q.norm() >= stop_.r_extract) {
        tr.stop_reason = StopReason::Extracted;
        return tr;
      }
    }

    PhaseState cur = x0;
    int frame = 0;
    if (regularize_ && in_zone(cur)) frame = open_chart(tr, cur);

    for (;;) {
      const Terminal term = run_frame(tr, frame, cur, escaped);
      if (term == Terminal::Timeout) {
        push_event(tr, EventKind::Timeout, cur);
        tr.stop_reason = StopReason::Timeout;
        return tr;
      }
      if (term == Terminal::Extracted) {
        tr.stop_reason = StopReason::Extracted;
        return tr;
      }
      frame = term == Terminal::ChartEntry ? open_chart(tr, cur) : 0;
    }
  }

 private:
  bool escape_pred(const Vec& q, const Vec& p) const {
    return q.norm() >= stop_.r_escape && q.dot(p) >= 0.0;
  }

  bool in_zone(const PhaseState& x) const {
    const double r = (x.q - singular_->center).norm();
    return r < r_switch_ && x.p.squaredNorm() > c_alpha_ * singular_->strength / std::pow(r, singular_->alpha);
  }

  int open_chart(Trajectory& tr, const PhaseState& x) {
    ChartFrame f;
    f.chart = dim_ == 2 ? Chart::LeviCivita : Chart::KustaanheimoStiefel;
    f.center = singular_->center;
    f.power = n_ + 1;
    f.energy = hamiltonian(model_, x);
    f.strength = singular_->strength;
    f.alpha = singular_->alpha;
    tr.frames.push_back(f);
    entry_energy_offset_ = std::abs(f.energy - tr.energy);
    return static_cast<int>(tr.frames.size()) - 1;
  }

  void push_event(Trajectory& tr, EventKind kind, const PhaseState& x) {
    TrajectoryEvent ev;
    ev.t = x.t;
    ev.kind = kind;
    ev.q = x.q;
    ev.p = x.p;
    ev.angular_momentum = angular_momentum(x.q, x.p);
    tr.events.push_back(std::move(ev));
  }

  void record_sample(Trajectory& tr, const ChartFrame& f, const State& y) {
    double err;
    if (f.chart == Chart::Cartesian) {
      const PhaseState x = chart_to_phase(f, y, dim_);
      err = std::abs(hamiltonian(model_, x) - tr.energy);
      tr.states.push_back(x);
    } else {
      // K = r^alpha (H - E_entry); scale by the zone boundary where H is measured
      err = entry_energy_offset_ + std::abs(chart_K(f, model_, y, dim_)) / std::pow(r_exit_, f.alpha);
      if (chart_radius(f, y, dim_) > 0.0) tr.states.push_back(chart_to_phase(f, y, dim_));
    }
    if (std::isfinite(err)) tr.max_energy_error = std::max(tr.max_energy_error, err);
    else tr.max_energy_error = std::numeric_limits<double>::infinity();
  }

  Terminal run_frame(Trajectory& tr, int frame_id, PhaseState& cur, bool& escaped) {
    const ChartFrame f = tr.frames[frame_id];
    const bool chart = f.chart != Chart::Cartesian;
    const int ti = time_index(f, dim_);
    auto rhs = [this, &f](double, const State& y, State& dy) { chart_rhs(f, model_, dim_, y, dy); };
    Dopri5Options<double> opt;
    opt.rtol = cfg_.rtol;
    opt.atol = cfg_.atol;
    Dopri5<double, decltype(rhs)> stepper(rhs, opt);
    const State y0 = phase_to_chart(f, cur, dim_);
    const double tau0 = chart ? 0.0 : cur.t;
    stepper.reset(tau0, y0);
    const bool track_peri = singular_ != nullptr;

    for (;;) {
      if (++tr.steps > cfg_.max_steps)
        fail(ErrorKind::StepSizeUnderflow, "step budget exhausted");
      double h_time = std::numeric_limits<double>::infinity();
      double h_limit = h_time;
      if (!chart) {
        if (std::isfinite(stop_.t_max)) h_time = stop_.t_max - stepper.tau();
        h_limit = std::min(h_time, geometric_step_cap(stepper.state()));
      }
      const DenseStep<double>& ds = stepper.step(h_limit);
      const double ta = ds.tau0, tb = ds.tau0 + ds.h;
      const State ya = ds.start(), yb = ds.end();
      auto at = [&ds](double tau) { return ds(tau); };

      Terminal term = Terminal::None;
      double tau_term = tb;
      auto propose = [&](Terminal kind, double tau) {
        if (tau < tau_term || (term == Terminal::None && tau <= tau_term)) {
          term = kind;
          tau_term = tau;
        }
      };

      double tau_escape = std::numeric_limits<double>::infinity();
      if (!chart) {
        if (regularize_) {
          auto g = [&](double tau) { return chart_radius(f, at(tau), dim_) - r_switch_; };
          const double ga = g(ta), gb = g(tb);
          if (ga > 0 && gb <= 0) {
            const double te = find_root(g, ta, tb, ga);
            if (in_zone_relaxed(chart_to_phase(f, at(te), dim_))) propose(Terminal::ChartEntry, te);
          }
        }
        if (!escaped) {
          auto pred = [&](double tau) {
            const State y = at(tau);
            return escape_pred(y.head(dim_), y.segment(dim_, dim_));
          };
          if (pred(tb)) tau_escape = find_first(pred, ta, tb);
        }
        const double tau_from = std::min(tau_escape, escaped ? ta : tb);
        if ((escaped || std::isfinite(tau_escape)) && yb.head(dim_).norm() >= stop_.r_extract) {
          auto g = [&](double tau) { return at(tau).head(dim_).norm() - stop_.r_extract; };
          const double a = std::max(ta, tau_from);
          const double ga = g(a);
          propose(Terminal::Extracted, ga >= 0 ? a : find_root(g, a, tb, ga));
        }
        if (ds.h == h_time || yb(ti) >= stop_.t_max) propose(Terminal::Timeout, tb);
      } else {
        auto g = [&](double tau) { return chart_radius(f, at(tau), dim_) - r_exit_; };
        const double ga = g(ta), gb = g(tb);
        if (ga < 0 && gb >= 0) propose(Terminal::ChartExit, find_root(g, ta, tb, ga));
        if (yb(ti) >= stop_.t_max) {
          auto gt = [&](double tau) { return at(tau)(ti) - stop_.t_max; };
          propose(Terminal::Timeout, find_root(gt, ta, tb, gt(ta)));
        }
      }

      if (track_peri) {
        auto g = [&](double tau) { return chart_radial(f, at(tau), dim_); };
        const double ga = g(ta), gb = g(tau_term);
        if (ga < 0 && gb >= 0) {
          const double tp = find_root(g, ta, tau_term, ga);
          const State yp = at(tp);
          TrajectoryEvent ev;
          ev.angular_momentum = chart_angular_momentum(f, yp, dim_);
          const bool collision = chart && std::abs(ev.angular_momentum) < cfg_.l_coll;
          ev.kind = collision ? EventKind::Collision : EventKind::Pericentre;
          ev.t = yp(ti);
          if (collision) {
            ev.q = f.center;
            ev.p = Vec::Zero(dim_);
          } else {
            const PhaseState x = chart_to_phase(f, yp, dim_);
            ev.q = x.q;
            ev.p = x.p;
          }
          ev.direction = chart_pericentre_direction(f, yp, dim_, collision);
          tr.events.push_back(std::move(ev));
        }
      }

      if (tau_escape <= tau_term) {
        escaped = true;
        push_event(tr, EventKind::Escape, chart_to_phase(f, at(tau_escape), dim_));
      }

      ChartSegment seg;
      seg.frame = frame_id;
      seg.dense = ds;
      seg.tau_end = tau_term;
      seg.t_begin = ya(ti);
      const State yend = term == Terminal::None ? yb : at(tau_term);
      seg.t_end = yend(ti);
      tr.segments.push_back(seg);
      record_sample(tr, f, yend);

      if (term != Terminal::None) {
        cur = chart_to_phase(f, yend, dim_);
        return term;
      }
    }
  }

  // A force-free stretch gives a zero error estimate and unbounded step growth;
  // cap the displacement at half the distance to the nearest term center (or
  // the smallest feature width) so no feature can be stepped over.
  double geometric_step_cap(const State& y) const {
    if (centers_.empty()) return std::numeric_limits<double>::infinity();
    const Vec q = y.head(dim_);
    const double speed = y.segment(dim_, dim_).norm();
    double near = std::numeric_limits<double>::infinity();
    for (const Vec& c : centers_) near = std::min(near, (q - c).norm());
    const double cap = 0.5 * std::max(feature_width_, near) / speed;
    if (!(cap > 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y(2 * dim_)))))
      fail(ErrorKind::StepSizeUnderflow, "approach to a singular center below step resolution");
    return cap;
  }

  // Entry test at the zone boundary (r == r_switch up to root tolerance).
  bool in_zone_relaxed(const PhaseState& x) const {
    const double r = (x.q - singular_->center).norm();
    return x.p.squaredNorm() > c_alpha_ * singular_->strength / std::pow(r, singular_->alpha);
  }

  const PotentialModel& model_;
  StopCondition stop_;
  IntegratorConfig cfg_;
  bool regularize_;
  int dim_;
  const PotentialTerm* singular_ = nullptr;
  int n_ = 1;
  double r_switch_ = 0.0, r_exit_ = 0.0, c_alpha_ = 0.0;
  double entry_energy_offset_ = 0.0;
  std::vector<Vec> centers_;
  double feature_width_ = std::numeric_limits<double>::infinity();
};

Trajectory run_with_retries(const PotentialModel& model, const PhaseState& x0,
                            const StopCondition& stop, const IntegratorConfig& config,
                            bool regularize) {
  IntegratorConfig cfg = config;
  for (int attempt = 0;; ++attempt) {
    Trajectory tr = Engine(model, stop, cfg, regularize).run(x0);
    const double bound = cfg.tol_energy * (1.0 + std::abs(tr.energy));
    if (!cfg.check_energy || tr.max_energy_error <= bound) return tr;
    if (attempt >= cfg.retries || cfg.rtol <= 1e-14) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "energy drift %.3g exceeds %.3g", tr.max_energy_error, bound);
      fail(ErrorKind::EnergyDriftExceeded, buf);
    }
    cfg.rtol = std::max(cfg.rtol * 0.1, 1e-14);
    cfg.atol *= 0.1;
  }
}

}  // namespace

int Trajectory::count(EventKind kind) const {
  return static_cast<int>(std::count_if(events.begin(), events.end(),
                                        [kind](const TrajectoryEvent& e) { return e.kind == kind; }));
}

std::optional<TrajectoryEvent> Trajectory::first(EventKind kind) const {
  for (const auto& e : events)
    if (e.kind == kind) return e;
  return std::nullopt;
}

PhaseState Trajectory::state_at(double t) const {
  if (segments.empty()) return states.front();
  const int dim = static_cast<int>(states.front().q.size());
  auto it = std::lower_bound(segments.begin(), segments.end(), t,
                             [](const ChartSegment& s, double v) { return s.t_end < v; });
  if (it == segments.end()) --it;
  const ChartFrame& f = frames[it->frame];
  const int ti = time_index(f, dim);
  if (f.chart == Chart::Cartesian) return chart_to_phase(f, it->dense(std::clamp(t, it->dense.tau0, it->tau_end)), dim);
  double a = it->dense.tau0, b = it->tau_end;
  for (int k = 0; k < 200; ++k) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    (it->dense(m)(ti) < t ? a : b) = m;
  }
  PhaseState x = chart_to_phase(f, it->dense(0.5 * (a + b)), dim);
  x.t = t;
  return x;
}

Trajectory integrate(const PotentialModel& model, const PhaseState& x0, const StopCondition& stop,
                     const IntegratorConfig& config) {
  if (model.distance_to_singularity(x0.q) == 0.0)
    fail(ErrorKind::EvaluationAtSingularity, "initial position is a singular center");
  return run_with_retries(model, x0, stop, config, false);
}

Trajectory integrate_regularized(const PotentialModel& model, const PhaseState& x0,
                                 const StopCondition& stop, const IntegratorConfig& config) {
  if (model.distance_to_singularity(x0.q) == 0.0)
    fail(ErrorKind::EvaluationAtSingularity, "initial position is a singular center");
  return run_with_retries(model, x0, stop, config, true);
}

std::vector<PericentreData> pericentres(const Trajectory& traj, const Vec& center) {
  std::vector<PericentreData> out;
  if (traj.segments.empty()) return out;
  const int dim = static_cast<int>(traj.states.front().q.size());
  for (const auto& seg : traj.segments) {
    ChartFrame f = traj.frames[seg.frame];
    const bool native = f.chart == Chart::Cartesian || (f.center - center).norm() == 0.0;
    auto radial = [&](double tau) {
      const State y = seg.dense(tau);
      if (f.chart == Chart::Cartesian) {
        return (y.head(dim) - center).dot(y.segment(dim, dim));
      }
      if (native) return chart_radial(f, y, dim);
      const PhaseState x = chart_to_phase(f, y, dim);
      return (x.q - center).dot(x.p);
    };
    const double a = seg.dense.tau0, b = seg.tau_end;
    const double ga = radial(a), gb = radial(b);
    if (!(ga < 0 && gb >= 0)) continue;
    const double tp = find_root(radial, a, b, ga);
    const State y = seg.dense(tp);
    PericentreData d;
    d.t = y(time_index(f, dim));
    if (f.chart == Chart::Cartesian) {
      f.center = center;
      d.angular_momentum = chart_angular_momentum(f, y, dim);
      d.radius = chart_radius(f, y, dim);
      d.direction = d.radius > 0 ? Vec((y.head(dim) - center) / d.radius) : Vec::Zero(dim);
    } else if (native) {
      d.angular_momentum = chart_angular_momentum(f, y, dim);
      d.radius = chart_radius(f, y, dim);
      d.direction = chart_pericentre_direction(f, y, dim, d.radius == 0.0 || std::abs(d.angular_momentum) < 1e-9);
    } else {
      const PhaseState x = chart_to_phase(f, y, dim);
      d.angular_momentum = angular_momentum(x.q - center, x.p);
      d.radius = (x.q - center).norm();
      d.direction = (x.q - center) / d.radius;
    }
    out.push_back(std::move(d));
  }
  return out;
}

PericentreData pericentre(const Trajectory& traj, const Vec& center) {
  auto all = pericentres(traj, center);
  if (all.empty()) fail(ErrorKind::NoPericentre, "trajectory has no radial minimum about the center");
  return all.front();
}

std::optional<double> escape_time(const Trajectory& traj) {
  if (auto e = traj.first(EventKind::Escape)) return e->t;
  return std::nullopt;
}

namespace {
void put(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}
}  // namespace

void write_trajectory_csv(std::ostream& os, const PotentialModel& model, const Trajectory& traj) {
  const int d = model.dimension();
  os << "t";
  for (int i = 1; i <= d; ++i) os << ",q" << i;
  for (int i = 1; i <= d; ++i) os << ",p" << i;
  os << ",H\n";
  for (const auto& x : traj.states) {
    put(os, x.t);
    for (int i = 0; i < d; ++i) os << ',', put(os, x.q(i));
    for (int i = 0; i < d; ++i) os << ',', put(os, x.p(i));
    os << ',';
    put(os, hamiltonian(model, x));
    os << '\n';
  }
}

void write_events_json(std::ostream& os, const Trajectory& traj) {
  auto vec = [&os](const Vec& v) {
    os << '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) os << ',';
      put(os, v(i));
    }
    os << ']';
  };
  os << "{\"energy\":";
  put(os, traj.energy);
  os << ",\"stop\":\"" << (traj.stop_reason == StopReason::Extracted ? "extracted" : "timeout")
     << "\",\"max_energy_error\":";
  put(os, traj.max_energy_error);
  os << ",\"events\":[";
  for (std::size_t i = 0; i < traj.events.size(); ++i) {
    const auto& e = traj.events[i];
    if (i) os << ',';
    os << "{\"t\":";
    put(os, e.t);
    os << ",\"kind\":\"" << to_string(e.kind) << "\",\"q\":";
    vec(e.q);
    os << ",\"p\":";
    vec(e.p);
    os << ",\"angular_momentum\":";
    put(os, e.angular_momentum);
    if (e.direction.size() > 0) {
      os << ",\"direction\":";
      vec(e.direction);
    }
    os << '}';
  }
  os << "]}\n";
}

}  // namespace scatdeg
