#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "scatdeg/scattering.hpp"

namespace scatdeg {

enum class DegreeMethod { Winding2d, Sphere3d, QuadratureCentral, LagrangeProjection };

const char* to_string(DegreeMethod m);

struct DegreeEstimate {
  int value = 0;
  DegreeMethod method = DegreeMethod::Winding2d;
  double raw = 0.0;       // real-valued estimate before rounding
  double residual = 0.0;  // |raw - value|
  int refinement_level = 0;
  Vec theta;
  int samples = 0;
  std::string note;
};

struct DegreeOptions {
  int grid = 64;                    // initial compactified samples (d = 2)
  RefineOptions refine;             // angular-gap refinement of the b-line
  int mesh_level = 3;               // icosahedral subdivision (d = 3)
  double max_image_diameter = kPi / 4;  // refine image triangles beyond this
  int mesh_budget = 20000;          // maximum scatter evaluations on the sphere
  ScatterConfig scatter;
};

// Winding number of the compactified final-direction map along the b-line.
// Orientation: b runs along rot90(theta); the degree is minus the number of
// turns of theta_out, so a repulsive bump below its barrier gives +1.
DegreeEstimate degree_winding(const PotentialModel& model, double energy, const Vec& theta,
                              const DegreeOptions& opt = {});

// As above on a precomputed map.
DegreeEstimate winding_of(const DirectionMap& map, const Vec& theta);

// Signed count of crossings of the regular value y by the outgoing direction.
int signed_preimage_count(const DirectionMap& map, const Vec& y);

// Solid angle of the geodesic triangle (a, b, c), positive for counterclockwise
// orientation seen from outside.
double signed_solid_angle(const Vec& a, const Vec& b, const Vec& c);

// Degree of a map S^2 -> S^2 given on the compactified impact plane (d = 3).
// The chart is b = (w_x e1 - w_y e2) / (1 + w_z) with (e1, e2, theta) right
// handed; w = -e_z is the point at infinity, sent to theta.
DegreeEstimate degree_sphere(const PotentialModel& model, double energy, const Vec& theta,
                             const DegreeOptions& opt = {});

// Same computation for an arbitrary map of the unit sphere (used for tests and
// as the engine of degree_sphere).
struct SphereDegree {
  double raw = 0.0;
  int level = 0;
  int evaluations = 0;
  double max_image_diameter = 0.0;
  bool budget_exhausted = false;
};
using SphereMap = std::function<std::vector<Vec>(const std::vector<Vec>&)>;
SphereDegree sphere_map_degree(const SphereMap& map, int mesh_level, double max_image_diameter,
                               int budget);

struct DeflectionResult {
  double energy = 0.0;
  double l = 0.0;
  double r_min = 0.0;
  double delta_phi = 0.0;   // swept angle
  double deflection = 0.0;  // delta_phi - pi
  bool converged = false;
  double error = 0.0;       // quadrature error estimate
};

// Swept angle 2 int_{r_min}^inf (l/r^2) / sqrt(2(E - V_l(r))) dr for a central
// model, V_l = V + l^2/(2 r^2); r_min is the largest root of V_l = E.
DeflectionResult deflection_quadrature(const PotentialModel& model, double energy, double l);

// Closed-form reduction for V = -Z r^-alpha: 2 int_0^vmax dv / sqrt(kappa + v^a - v^2).
DeflectionResult deflection_power_law(double Z, double alpha, double energy, double l);

struct CentralDegree {
  DegreeEstimate estimate;
  std::vector<DeflectionResult> limit_sequence;  // l -> 0+
  double collision_limit = 0.0;                  // delta_phi(E, 0+)
};

// deg(E) = -(delta_phi(E, 0+) - pi) / pi for a centrally symmetric model in d = 2.
CentralDegree degree_central(const PotentialModel& model, double energy);

struct LagrangePreimage {
  double t = 0.0;
  double b = 0.0;
  double residual = 0.0;
  int sign = 0;
};

struct LagrangeResult {
  DegreeEstimate estimate;  // deg(E) = 1 - deg(Pi_E)
  int projection_degree = 0;
  Vec target;
  std::vector<LagrangePreimage> preimages;
  int resamples = 0;
};

struct LagrangeOptions {
  int b_samples = 240;
  int t_samples = 400;
  int max_roots = 64;
  int max_resamples = 5;
  unsigned long long seed = 11;
  ScatterConfig scatter;
};

// Signed count of (t, b) with q_b(t) = target, t measured from the launch.
LagrangeResult lagrange_degree(const PotentialModel& model, double energy, const Vec& theta,
                               const Vec& target, const LagrangeOptions& opt = {});

// Random points of {V < E} joined to infinity by an accessible radial ray.
std::vector<Vec> random_accessible_points(const PotentialModel& model, double energy, int count,
                                          double radius, unsigned long long seed);

void write_degree_json(std::ostream& os, double energy, const DegreeEstimate& est);
void write_deflection_json(std::ostream& os, const DeflectionResult& d);

}  // namespace scatdeg
