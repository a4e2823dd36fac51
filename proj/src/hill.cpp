#include "scatdeg/hill.hpp"

#include <array>
#include <deque>
#include <limits>
#include <map>
#include <unordered_map>

namespace scatdeg {

const char* to_string(HillClass c) {
  switch (c) {
    case HillClass::Empty: return "empty";
    case HillClass::SingleLoop: return "single_loop";
    case HillClass::MultiComponent: return "multi_component";
    case HillClass::NonSpherical: return "non_spherical";
  }
  return "unknown";
}

int HillAnalysis::boundary_loop_count() const {
  int n = 0;
  for (const auto& l : loops) n += l.bounds_unbounded ? 1 : 0;
  return n;
}

namespace {

double box_half_width(const PotentialModel& model, double energy) {
  double half = virial_radius(model, energy).radius;
  for (const auto& t : model.terms()) {
    const double reach = t.is_singular() ? 0.0 : t.effective_radius() + 1.0;
    half = std::max(half, t.center.cwiseAbs().maxCoeff() + reach);
  }
  return 1.1 * half;
}

struct Grid {
  int n;  // cells per axis, (n+1)^2 nodes
  double lo, h;
  std::vector<double> f;  // V - E at nodes
  double& at(int i, int j) { return f[static_cast<std::size_t>(j) * (n + 1) + i]; }
  double at(int i, int j) const { return f[static_cast<std::size_t>(j) * (n + 1) + i]; }
  Vec node(int i, int j) const { return vec2(lo + i * h, lo + j * h); }
};

// Edge identifiers: horizontal edge (i,j)-(i+1,j) and vertical edge (i,j)-(i,j+1).
long edge_key(int i, int j, bool vertical, int n) {
  return (static_cast<long>(j) * (n + 1) + i) * 2 + (vertical ? 1 : 0);
}

}  // namespace

HillAnalysis hill_analysis(const PotentialModel& model, double energy, int resolution) {
  if (model.dimension() != 2) fail(ErrorKind::InvalidArgument, "hill_analysis needs d = 2");
  if (!(energy > 0.0)) fail(ErrorKind::InvalidArgument, "hill_analysis needs E > 0");
  if (resolution < 8) fail(ErrorKind::ResolutionTooCoarse, "resolution below 8 cells");

  HillAnalysis out;
  out.energy = energy;
  out.resolution = resolution;
  out.half_width = box_half_width(model, energy);

  Grid g{resolution, -out.half_width, 2.0 * out.half_width / resolution, {}};
  g.f.assign(static_cast<std::size_t>(resolution + 1) * (resolution + 1), 0.0);
  for (int j = 0; j <= resolution; ++j)
    for (int i = 0; i <= resolution; ++i) {
      const Vec q = g.node(i, j);
      g.at(i, j) = model.distance_to_singularity(q) == 0.0
                       ? -std::numeric_limits<double>::max()
                       : model.value(q) - energy;
    }

  // Connected components of accessible nodes (V <= E), 4-neighbour.
  const int nn = resolution + 1;
  std::vector<int> label(static_cast<std::size_t>(nn) * nn, -1);
  auto idx = [nn](int i, int j) { return static_cast<std::size_t>(j) * nn + i; };
  int unbounded_label = -1;
  for (int j = 0; j < nn; ++j)
    for (int i = 0; i < nn; ++i) {
      if (g.at(i, j) > 0.0 || label[idx(i, j)] >= 0) continue;
      const int lab = static_cast<int>(out.components.size());
      HillComponent comp;
      std::deque<std::pair<int, int>> queue{{i, j}};
      label[idx(i, j)] = lab;
      while (!queue.empty()) {
        auto [a, b] = queue.front();
        queue.pop_front();
        ++comp.node_count;
        if (a == 0 || b == 0 || a == resolution || b == resolution) comp.bounded = false;
        const std::array<std::pair<int, int>, 4> nb{{{a + 1, b}, {a - 1, b}, {a, b + 1}, {a, b - 1}}};
        for (auto [c, e] : nb) {
          if (c < 0 || e < 0 || c > resolution || e > resolution) continue;
          if (g.at(c, e) > 0.0 || label[idx(c, e)] >= 0) continue;
          label[idx(c, e)] = lab;
          queue.emplace_back(c, e);
        }
      }
      if (!comp.bounded) {
        if (unbounded_label >= 0)
          fail(ErrorKind::ResolutionTooCoarse, "frame of the Hill box is not connected");
        unbounded_label = lab;
      }
      out.components.push_back(comp);
    }
  if (unbounded_label < 0)
    fail(ErrorKind::ResolutionTooCoarse, "no accessible node on the Hill box frame");

  // Marching squares. Crossing points live on edges; each segment joins two edge keys.
  std::unordered_map<long, Vec> points;
  auto crossing = [&](int i0, int j0, int i1, int j1) -> long {
    const bool vertical = i0 == i1;
    const long key = edge_key(std::min(i0, i1), std::min(j0, j1), vertical, resolution);
    if (!points.count(key)) {
      const double f0 = g.at(i0, j0), f1 = g.at(i1, j1);
      double s = f0 / (f0 - f1);
      if (!std::isfinite(s)) s = 0.5;
      s = std::clamp(s, 0.0, 1.0);
      points.emplace(key, (1.0 - s) * g.node(i0, j0) + s * g.node(i1, j1));
    }
    return key;
  };

  struct SegInfo {
    long a, b;
    bool unbounded_side;
    bool saddle;
  };
  std::vector<SegInfo> segs;
  std::unordered_map<long, std::vector<int>> by_point;

  for (int j = 0; j < resolution; ++j)
    for (int i = 0; i < resolution; ++i) {
      // corners counter-clockwise: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
      const std::array<std::pair<int, int>, 4> c{{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
      int mask = 0;
      bool touches_unbounded = false;
      for (int k = 0; k < 4; ++k) {
        if (g.at(c[k].first, c[k].second) > 0.0) mask |= 1 << k;
        else if (label[idx(c[k].first, c[k].second)] == unbounded_label) touches_unbounded = true;
      }
      if (mask == 0 || mask == 15) continue;
      // edge e connects corner e and corner (e+1)%4
      auto ep = [&](int e) {
        const auto [a0, b0] = c[e];
        const auto [a1, b1] = c[(e + 1) % 4];
        return crossing(a0, b0, a1, b1);
      };
      std::vector<std::pair<int, int>> pairs;  // pairs of edges
      bool saddle = false;
      switch (mask) {
        case 1: case 14: pairs = {{3, 0}}; break;
        case 2: case 13: pairs = {{0, 1}}; break;
        case 3: case 12: pairs = {{3, 1}}; break;
        case 4: case 11: pairs = {{1, 2}}; break;
        case 6: case 9: pairs = {{0, 2}}; break;
        case 7: case 8: pairs = {{3, 2}}; break;
        case 5: case 10: {
          saddle = true;
          double centre = 0.0;
          for (auto [a, b] : c) centre += g.at(a, b);
          const bool centre_inside = centre / 4.0 > 0.0;
          // mask 5: corners 0 and 2 forbidden
          if ((mask == 5) == centre_inside) pairs = {{3, 2}, {0, 1}};
          else pairs = {{3, 0}, {1, 2}};
          break;
        }
        default: break;
      }
      for (auto [e0, e1] : pairs) {
        const long a = ep(e0), b = ep(e1);
        by_point[a].push_back(static_cast<int>(segs.size()));
        by_point[b].push_back(static_cast<int>(segs.size()));
        segs.push_back({a, b, touches_unbounded, saddle});
      }
    }

  // Chain segments into polylines.
  std::vector<char> used(segs.size(), 0);
  for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
    if (used[s0]) continue;
    ContourLoop loop;
    used[s0] = 1;
    const long start = segs[s0].a;
    long cur = segs[s0].b;
    loop.points.push_back(points.at(start));
    loop.bounds_unbounded = segs[s0].unbounded_side;
    loop.touches_saddle = segs[s0].saddle;
    bool closed = false;
    for (std::size_t guard = 0; guard <= segs.size(); ++guard) {
      if (cur == start) {
        closed = true;
        break;
      }
      loop.points.push_back(points.at(cur));
      int next = -1;
      for (int sidx : by_point[cur])
        if (!used[sidx]) {
          next = sidx;
          break;
        }
      if (next < 0) break;
      used[next] = 1;
      loop.bounds_unbounded = loop.bounds_unbounded || segs[next].unbounded_side;
      loop.touches_saddle = loop.touches_saddle || segs[next].saddle;
      cur = segs[next].a == cur ? segs[next].b : segs[next].a;
    }
    if (!closed) fail(ErrorKind::ResolutionTooCoarse, "contour polyline does not close");
    Vec centroid = Vec::Zero(2);
    for (const auto& p : loop.points) centroid += p;
    centroid /= static_cast<double>(loop.points.size());
    double mr = 0.0;
    for (const auto& p : loop.points) mr += (p - centroid).norm();
    loop.centroid = centroid;
    loop.mean_radius = mr / static_cast<double>(loop.points.size());
    out.loops.push_back(std::move(loop));
  }

  const int boundary = out.boundary_loop_count();
  bool saddle_on_boundary = false;
  for (const auto& l : out.loops) saddle_on_boundary |= l.bounds_unbounded && l.touches_saddle;
  if (boundary == 0) out.classification = HillClass::Empty;
  else if (saddle_on_boundary) out.classification = HillClass::NonSpherical;
  else if (boundary == 1) out.classification = HillClass::SingleLoop;
  else out.classification = HillClass::MultiComponent;
  return out;
}

}  // namespace scatdeg
