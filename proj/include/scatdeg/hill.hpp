#pragma once

#include <string>
#include <vector>

#include "scatdeg/potential.hpp"

namespace scatdeg {

enum class HillClass { Empty, SingleLoop, MultiComponent, NonSpherical };

const char* to_string(HillClass c);

struct ContourLoop {
  std::vector<Vec> points;       // closed polyline, last point != first
  bool bounds_unbounded = false;  // part of the boundary of the unbounded component
  bool touches_saddle = false;    // passes an ambiguous marching-squares cell
  Vec centroid;
  double mean_radius = 0.0;  // mean distance of points to centroid
};

struct HillComponent {
  int node_count = 0;
  bool bounded = true;
};

struct HillAnalysis {
  double energy = 0.0;
  int resolution = 0;
  double half_width = 0.0;
  std::vector<ContourLoop> loops;
  std::vector<HillComponent> components;  // connected pieces of {V <= E} on the grid
  HillClass classification = HillClass::Empty;

  int boundary_loop_count() const;
};

// Marching-squares contour of V = E on a square grid of `resolution` cells per
// axis. d = 2 only.
HillAnalysis hill_analysis(const PotentialModel& model, double energy, int resolution = 256);

}  // namespace scatdeg
