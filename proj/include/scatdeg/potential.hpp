#pragma once

#include <optional>
#include <vector>

#include "scatdeg/error.hpp"
#include "scatdeg/types.hpp"

namespace scatdeg {

enum class TermKind { GaussianBump, PolyBump, SingularPower };

const char* to_string(TermKind kind);

// One analytic summand of a potential. Bumps are C^2 everywhere; the singular
// term is -Z |q - s|^-alpha with 0 < alpha < 2.
struct PotentialTerm {
  TermKind kind = TermKind::GaussianBump;
  Vec center;
  double amplitude = 0.0;  // A for bumps
  double width = 1.0;      // sigma (gaussian) or rho (poly support radius)
  double strength = 0.0;   // Z for singular_power
  double alpha = 1.0;      // exponent for singular_power

  static PotentialTerm gaussian(double A, double sigma, Vec center);
  static PotentialTerm poly(double A, double rho, Vec center);
  static PotentialTerm singular(double Z, double alpha, Vec center);

  bool is_singular() const { return kind == TermKind::SingularPower; }

  // Radius beyond which the term is treated as absent by the symbolic module.
  double effective_radius() const;
};

struct Evaluation {
  double value = 0.0;
  Vec grad;
};

// n with alpha = 2n/(n+1), if alpha is a regularizable exponent.
std::optional<int> regularizable_index(double alpha);

class PotentialModel {
 public:
  PotentialModel(int dimension, std::vector<PotentialTerm> terms);

  static PotentialModel free(int dimension) { return PotentialModel(dimension, {}); }

  int dimension() const { return dim_; }
  const std::vector<PotentialTerm>& terms() const { return terms_; }

  Evaluation eval(const Vec& q) const;
  double value(const Vec& q) const;
  Mat hessian(const Vec& q) const;

  // Potential without the (single) singular term: W in V = -Z|q-s|^-a + W.
  Evaluation eval_regular_part(const Vec& q) const;

  int singular_count() const;
  // Index into terms() of the singular term; requires singular_count() == 1.
  const PotentialTerm& singular_term() const;
  bool has_power_law_tail() const { return singular_count() > 0; }

  // All terms share one center (the model is centrally symmetric about it).
  std::optional<Vec> symmetry_center() const;
  // V(s + r e_1) for a central model.
  double radial_profile(double r) const;

  // Distance from q to the nearest singular center (infinity if none).
  double distance_to_singularity(const Vec& q) const;

  double vmax() const { return vmax_; }

 private:
  double compute_vmax() const;

  int dim_;
  std::vector<PotentialTerm> terms_;
  double vmax_ = 0.0;
};

struct VirialConfig {
  double r_floor = 1.0;
  double safety_factor = 1.25;
  double growth = 1.1;
  double ceiling = 1e6;
  int directions_2d = 256;
  int directions_3d = 1024;
};

struct VirialData {
  double energy = 0.0;
  double radius = 0.0;
  double safety_factor = 1.0;
};

// Unit directions sampling the sphere S^{d-1} (uniform in angle for d=2,
// Fibonacci lattice for d=3).
std::vector<Vec> sphere_directions(int dimension, int count);

// Largest violation margin of the virial inequalities on the sphere of radius r:
// max(|V|, |<q, grad V>|) - E/2 (negative means the sphere passes).
double virial_margin(const PotentialModel& model, double energy, double r, int directions);

VirialData virial_radius(const PotentialModel& model, double energy,
                         const VirialConfig& config = {});

// True if <q, grad V(q)> <= 0 at all sampled points of the ball of radius r.
bool star_shaped_sampled(const PotentialModel& model, double radius, int samples = 4000);

}  // namespace scatdeg
