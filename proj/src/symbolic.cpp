#include "scatdeg/symbolic.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "scatdeg/io.hpp"
#include "scatdeg/parallel.hpp"

namespace scatdeg {

std::vector<Support> supports_of(const PotentialModel& model, double singular_radius) {
  std::vector<Support> out;
  for (const auto& t : model.terms())
    out.push_back({t.center, t.is_singular() ? singular_radius : t.effective_radius()});
  return out;
}

Itinerary::Itinerary(std::vector<int> symbols, int alphabet) : symbols_(std::move(symbols)), alphabet_(alphabet) {
  if (alphabet < 2) fail(ErrorKind::InvalidArgument, "an itinerary needs at least two symbols");
  if (symbols_.empty()) fail(ErrorKind::InvalidArgument, "empty itinerary");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] < 1 || symbols_[i] > alphabet)
      fail(ErrorKind::InvalidArgument, "symbol " + std::to_string(symbols_[i]) + " outside 1.." + std::to_string(alphabet));
    if (i > 0 && symbols_[i] == symbols_[i - 1])
      fail(ErrorKind::InvalidArgument, "repeated adjacent symbol " + std::to_string(symbols_[i]));
  }
}

Itinerary Itinerary::parse(const std::string& text, int alphabet) {
  std::vector<int> s;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) fail(ErrorKind::InvalidArgument, "malformed itinerary '" + text + "'");
    s.push_back(v);
  }
  return Itinerary(std::move(s), alphabet);
}

std::string Itinerary::str() const {
  std::string out;
  for (std::size_t i = 0; i < symbols_.size(); ++i) out += (i ? "," : "") + std::to_string(symbols_[i]);
  return out;
}

std::vector<Itinerary> admissible_words(int alphabet, int length) {
  if (length < 1) fail(ErrorKind::InvalidArgument, "word length must be positive");
  std::vector<std::vector<int>> words;
  for (int a = 1; a <= alphabet; ++a) words.push_back({a});
  for (int l = 1; l < length; ++l) {
    std::vector<std::vector<int>> next;
    for (const auto& w : words)
      for (int a = 1; a <= alphabet; ++a)
        if (a != w.back()) {
          next.push_back(w);
          next.back().push_back(a);
        }
    words = std::move(next);
  }
  std::vector<Itinerary> out;
  for (auto& w : words) out.emplace_back(std::move(w), alphabet);
  return out;
}

namespace {

// For a line with unit normal at angle phi, the offsets meeting disk m form
// [n.c_m - R_m, n.c_m + R_m]; three disks share a line iff the intervals meet.
double triple_gap(const std::array<const Support*, 3>& s, double phi, double* offset) {
  const Vec n = unit_angle(phi);
  double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
  for (const auto* d : s) {
    const double c = n.dot(d->center);
    lo = std::max(lo, c - d->radius);
    hi = std::min(hi, c + d->radius);
  }
  if (offset) *offset = 0.5 * (lo + hi);
  return lo - hi;
}

}  // namespace

NonShadowing check_nonshadowing(const std::vector<Support>& supports) {
  for (const auto& s : supports)
    if (s.center.size() != 2 || !(s.radius > 0) || !std::isfinite(s.radius))
      fail(ErrorKind::InvalidArgument, "non-shadowing needs planar supports of finite radius");
  NonShadowing out;
  out.margin = std::numeric_limits<double>::infinity();
  const int k = static_cast<int>(supports.size());
  constexpr int kAngles = 7200;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      for (int m = j + 1; m < k; ++m) {
        const std::array<const Support*, 3> tri{&supports[i], &supports[j], &supports[m]};
        double best = std::numeric_limits<double>::infinity(), best_phi = 0.0;
        for (int a = 0; a < kAngles; ++a) {
          const double phi = kPi * a / kAngles;
          const double g = triple_gap(tri, phi, nullptr);
          if (g < best) best = g, best_phi = phi;
        }
        // golden-section polish inside the bracketing sample cell
        double a = best_phi - kPi / kAngles, b = best_phi + kPi / kAngles;
        const double r = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 60; ++it) {
          const double x1 = b - r * (b - a), x2 = a + r * (b - a);
          if (triple_gap(tri, x1, nullptr) < triple_gap(tri, x2, nullptr)) b = x2; else a = x1;
        }
        double offset = 0.0;
        const double polished = triple_gap(tri, 0.5 * (a + b), &offset);
        if (polished < best) best = polished, best_phi = 0.5 * (a + b);
        else triple_gap(tri, best_phi, &offset);
        const double clearance = 0.5 * best;
        if (clearance < out.margin) out.margin = clearance;
        if (best <= 0 && out.pass) {
          out.pass = false;
          out.violation = std::array<int, 3>{i + 1, j + 1, m + 1};
          out.line_angle = best_phi;
          out.line_offset = offset;
        }
      }
  return out;
}

std::vector<Visit> visit_log(const Trajectory& traj, const std::vector<Support>& supports) {
  std::vector<Visit> log;
  if (traj.states.empty() || supports.empty()) return log;
  double min_radius = std::numeric_limits<double>::infinity();
  for (const auto& s : supports) min_radius = std::min(min_radius, s.radius);
  const double spacing = 0.05 * min_radius;
  std::vector<bool> inside(supports.size(), false);
  int current = -1;  // index into log of the visit being tracked per entry

  auto observe = [&](double t, const Vec& q) {
    for (std::size_t i = 0; i < supports.size(); ++i) {
      const double dist = (q - supports[i].center).norm();
      const bool now = dist < supports[i].radius;
      if (now && !inside[i]) {
        const int symbol = static_cast<int>(i) + 1;
        if (log.empty() || log.back().center != symbol) {
          log.push_back({symbol, dist, t});
        }
        current = static_cast<int>(log.size()) - 1;
      }
      inside[i] = now;
      if (now && current >= 0 && log[current].center == static_cast<int>(i) + 1 && dist < log[current].closest) {
        log[current].closest = dist;
        log[current].time = t;
      }
    }
  };

  const auto& st = traj.states;
  observe(st.front().t, st.front().q);
  for (std::size_t k = 1; k < st.size(); ++k) {
    const double jump = (st[k].q - st[k - 1].q).norm();
    const int pieces = std::max(1, static_cast<int>(std::ceil(jump / spacing)));
    for (int s = 1; s < pieces; ++s) {
      const double t = st[k - 1].t + (st[k].t - st[k - 1].t) * s / pieces;
      observe(t, traj.state_at(t).q);
    }
    observe(st[k].t, st[k].q);
  }
  return log;
}

ItineraryRealizer::ItineraryRealizer(PotentialModel model, double energy, const Vec& theta, SymbolicOptions opt)
    : ctx_(std::move(model), energy, opt.scatter), theta_(theta), opt_(std::move(opt)) {
  const auto& m = ctx_.model();
  if (m.dimension() != 2) fail(ErrorKind::InvalidArgument, "itineraries are realized in d = 2");
  if (theta.size() != 2 || !(theta.norm() > 0)) fail(ErrorKind::InvalidArgument, "theta must be a planar direction");
  theta_ = theta.normalized();
  if (m.terms().size() < 2) fail(ErrorKind::InvalidArgument, "itineraries need at least two terms");
  for (const auto& t : m.terms())
    if (!t.is_singular() && !(t.amplitude > energy))
      fail(ErrorKind::InvalidArgument, "every bump must exceed the energy so that its degree is nonzero");
  supports_ = supports_of(m, opt_.singular_radius);
  shadow_ = check_nonshadowing(supports_);
  if (!shadow_.pass) {
    const auto& v = *shadow_.violation;
    fail(ErrorKind::InvalidArgument, "supports " + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," +
                                         std::to_string(v[2]) + " are met by one line");
  }
  if (opt_.samples < 2 || opt_.max_samples < opt_.samples)
    fail(ErrorKind::InvalidArgument, "sweep sample counts are inconsistent");
}

std::vector<Visit> ItineraryRealizer::log_at(double b) {
  ++evaluations_;
  try {
    const Trajectory tr = ctx_.trajectory(theta_, impact_vector(theta_, b));
    return visit_log(tr, supports_);
  } catch (const Error& e) {
    if (!e.is_dynamics_failure()) throw;
    return {};
  }
}

namespace {

bool has_prefix(const std::vector<Visit>& log, const std::vector<int>& word, bool exact) {
  if (log.size() < word.size() || (exact && log.size() != word.size())) return false;
  for (std::size_t i = 0; i < word.size(); ++i)
    if (log[i].center != word[i]) return false;
  return true;
}

}  // namespace

std::vector<std::vector<Visit>> ItineraryRealizer::sweep(const std::vector<double>& bs) {
  const int threads = opt_.scatter.threads > 0 ? opt_.scatter.threads : default_thread_count();
  evaluations_ += static_cast<int>(bs.size());
  return parallel_map(
      bs.size(),
      [&](std::size_t i) {
        try {
          return visit_log(ctx_.trajectory(theta_, impact_vector(theta_, bs[i])), supports_);
        } catch (const Error& e) {
          if (!e.is_dynamics_failure()) throw;
          return std::vector<Visit>{};
        }
      },
      threads);
}

bool ItineraryRealizer::matches(double b, const std::vector<int>& prefix) {
  return has_prefix(log_at(b), prefix, false);
}

std::vector<Bracket> ItineraryRealizer::find_children(const Bracket& parent, const std::vector<int>& word) {
  for (const auto& c : cache_)
    if (c.word == word && c.parent.lo == parent.lo && c.parent.hi == parent.hi) return c.children;
  const double scale = std::max(1.0, std::max(std::abs(parent.lo), std::abs(parent.hi)));
  if (parent.width() < opt_.min_width * scale)
    fail(ErrorKind::PrecisionExhausted, "bracket for " + Itinerary(word, static_cast<int>(supports_.size())).str() +
                                            " narrower than the precision floor");
  std::vector<Bracket> children;
  for (int n = opt_.samples; n <= opt_.max_samples && children.empty(); n *= 2) {
    std::vector<double> bs(n);
    for (int i = 0; i < n; ++i) bs[i] = parent.lo + parent.width() * (i + 0.5) / n;
    const auto logs = sweep(bs);

    // Bisect each side between a matching and a non-matching parameter.
    auto edge = [&](double in, double out) {
      for (int it = 0; it < 200; ++it) {
        if (std::abs(out - in) <= 1e-13 * std::max(1.0, std::abs(in))) break;
        const double mid = 0.5 * (in + out);
        if (mid == in || mid == out) break;
        (matches(mid, word) ? in : out) = mid;
      }
      return in;
    };
    // Every maximal run of matching samples is a candidate component.
    for (int first = 0; first < n; ++first) {
      if (!has_prefix(logs[first], word, false)) continue;
      int last = first;
      while (last + 1 < n && has_prefix(logs[last + 1], word, false)) ++last;
      const double lo = edge(bs[first], first > 0 ? bs[first - 1] : parent.lo);
      const double hi = edge(bs[last], last + 1 < n ? bs[last + 1] : parent.hi);
      children.push_back({lo, hi});
      first = last;
    }
  }
  cache_.push_back({word, parent, children});
  return children;
}

ItineraryWitness ItineraryRealizer::realize_here(const Itinerary& word) {
  if (word.alphabet() != static_cast<int>(supports_.size()))
    fail(ErrorKind::InvalidArgument, "itinerary alphabet does not match the number of terms");
  double bmax = opt_.b_max;
  if (!(bmax > 0))
    for (const auto& s : supports_) bmax = std::max(bmax, s.center.norm() + s.radius + 1.0);
  ItineraryWitness w;
  w.energy = ctx_.energy();
  w.theta = theta_;
  const int before = evaluations_;
  const auto& full = word.symbols();

  // The witness ends its log with the last symbol: search the final bracket
  // for a parameter whose log is exactly the word.
  auto finish = [&](const Bracket& br) {
    for (int n = opt_.samples; n <= opt_.max_samples; n *= 2) {
      std::vector<double> bs(n + 1);
      bs[0] = 0.5 * (br.lo + br.hi);
      for (int i = 0; i < n; ++i) bs[i + 1] = br.lo + br.width() * (i + 0.5) / n;
      const auto logs = sweep(bs);
      for (std::size_t i = 0; i < bs.size(); ++i)
        if (has_prefix(logs[i], full, true)) {
          w.b = bs[i];
          w.visits = logs[i];
          w.bracket_width = br.width();
          return true;
        }
    }
    return false;
  };
  // Depth-first over the components of each prefix set; a component that
  // admits no continuation is abandoned for its siblings.
  std::optional<Error> last_error;
  std::function<bool(const Bracket&, std::size_t)> descend = [&](const Bracket& parent, std::size_t depth) {
    if (depth == full.size()) return finish(parent);
    const std::vector<int> prefix(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(depth) + 1);
    std::vector<Bracket> children;
    try {
      children = find_children(parent, prefix);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::PrecisionExhausted) throw;
      last_error = e;
      return false;
    }
    for (const auto& c : children) {
      w.nested.push_back(c);
      if (descend(c, depth + 1)) return true;
      w.nested.pop_back();
    }
    return false;
  };
  if (descend({-bmax, bmax}, 0)) {
    w.evaluations = evaluations_ - before;
    return w;
  }
  if (last_error) throw *last_error;
  fail(ErrorKind::BracketNotFound, "no impact parameter for direction " + format_number(std::atan2(theta_(1), theta_(0))) +
                                       " visits " + word.str() + " and then escapes");
}

ItineraryWitness ItineraryRealizer::realize(const Itinerary& word) {
  try {
    return realize_here(word);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::BracketNotFound || opt_.directions <= 1) throw;
  }
  // A finite word need not be reachable from one fixed incoming direction:
  // the orbit realizing it may arrive from elsewhere.
  const double base = std::atan2(theta_(1), theta_(0));
  for (int j = 1; j < opt_.directions; ++j) {
    if (alternates_.size() < static_cast<std::size_t>(j)) {
      SymbolicOptions o = opt_;
      o.directions = 1;
      alternates_.push_back(std::make_unique<ItineraryRealizer>(
          ctx_.model(), ctx_.energy(), unit_angle(base + 2 * kPi * j / opt_.directions), o));
    }
    try {
      const int before = evaluations();
      auto w = alternates_[j - 1]->realize_here(word);
      w.evaluations = evaluations() - before;
      return w;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::BracketNotFound) throw;
    }
  }
  fail(ErrorKind::BracketNotFound, "no impact parameter from " + std::to_string(opt_.directions) +
                                       " incoming directions visits " + word.str() + " and then escapes");
}

int ItineraryRealizer::evaluations() const {
  int n = evaluations_;
  for (const auto& a : alternates_) n += a->evaluations();
  return n;
}

ItineraryWitness realize_itinerary(const PotentialModel& model, double energy, const Vec& theta,
                                   const Itinerary& word, const SymbolicOptions& opt) {
  ItineraryRealizer r(model, energy, theta, opt);
  return r.realize(word);
}

void write_witness_json(std::ostream& os, const Itinerary& word, const ItineraryWitness& w) {
  nlohmann::json j;
  j["E"] = w.energy;
  j["theta"] = std::vector<double>(w.theta.data(), w.theta.data() + w.theta.size());
  j["sequence"] = word.symbols();
  j["b"] = w.b;
  j["bracket_width"] = w.bracket_width;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& v : w.visits) log.push_back({{"center", v.center}, {"closest", v.closest}, {"time", v.time}});
  j["visit_log"] = log;
  nlohmann::json nested = nlohmann::json::array();
  for (const auto& b : w.nested) nested.push_back({b.lo, b.hi});
  j["brackets"] = nested;
  j["evaluations"] = w.evaluations;
  os << dump_json(j);
}

}  // namespace scatdeg
