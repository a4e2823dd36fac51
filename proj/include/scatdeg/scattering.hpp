#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scatdeg/dynamics.hpp"
#include "scatdeg/hill.hpp"

namespace scatdeg {

enum class ScatterStatus { Scattered, TrappedTimeout, CollisionRegularized, Failed };

const char* to_string(ScatterStatus s);

struct ScatterRecord {
  double energy = 0.0;
  Vec theta_in;
  Vec b_in;   // orthogonal to theta_in
  double u = std::numeric_limits<double>::quiet_NaN();  // compactified chart coordinate, if any
  Vec theta_out;
  Vec b_out;  // orthogonal to theta_out
  ScatterStatus status = ScatterStatus::Failed;
  double min_radius = std::numeric_limits<double>::infinity();
  int pericentre_count = 0;
  double flight_time = 0.0;
  std::string failure;  // error text for status Failed

  bool escaped() const {
    return status == ScatterStatus::Scattered || status == ScatterStatus::CollisionRegularized;
  }
};

struct ScatterConfig {
  double launch_factor = 10.0;       // R_launch = R_extract = factor * R_vir
  double long_range_factor = 100.0;  // the same for power-law tails
  double launch_radius = 0.0;        // explicit override when > 0
  double t_max_factor = 1e3;         // T_max = factor * R_vir / sqrt(2E)
  bool asymptotic_correction = true;
  IntegratorConfig integrator;
  VirialConfig virial;
  int threads = 0;
};

// Per-energy scattering setup: virial data, launch/extraction radii and the
// choice between plain and regularized integration.
class ScatterContext {
 public:
  ScatterContext(PotentialModel model, double energy, ScatterConfig config = {});

  const PotentialModel& model() const { return model_; }
  double energy() const { return energy_; }
  double speed() const { return std::sqrt(2.0 * energy_); }
  const VirialData& virial() const { return virial_; }
  double launch_radius() const { return r_launch_; }
  bool regularized() const { return regularize_; }
  const ScatterConfig& config() const { return config_; }
  StopCondition stop_condition() const;

  // State on the incoming asymptote (theta, b) at distance R_launch, with the
  // first-order correction for the force felt on the way in.
  PhaseState launch_state(const Vec& theta, const Vec& b) const;

  // Integrated trajectory for the launch (theta, b).
  Trajectory trajectory(const Vec& theta, const Vec& b) const;

  ScatterRecord scatter(const Vec& theta, const Vec& b) const;

  // Outgoing asymptote (direction, impact vector) of a state beyond R_vir.
  std::pair<Vec, Vec> asymptote(const PhaseState& x) const;

 private:
  PotentialModel model_;  // held by value: contexts outlive temporaries
  double energy_;
  ScatterConfig config_;
  VirialData virial_;
  double r_launch_ = 0.0;
  bool regularize_ = false;
};

ScatterRecord scatter_one(const PotentialModel& model, double energy, const Vec& theta,
                          const Vec& b, const ScatterConfig& config = {});

// d = 2 compactification of the impact-parameter line: b = tan(u pi/2) rot90(theta).
double b_from_u(double u);
double u_from_b(double b);
Vec impact_vector(const Vec& theta, double b);
double impact_scalar(const Vec& theta, const Vec& b);

struct RefineOptions {
  double max_gap = kPi / 8.0;
  int budget = 4000;        // maximum number of scatter evaluations
  double min_du = 1e-13;    // parameter spacing below which a gap counts as a jump
};

struct DirectionMap {
  std::vector<ScatterRecord> records;  // sorted by u
  bool complete = true;                // false if the refinement budget ran out
  bool discontinuous = false;          // a gap persisted down to min_du
  int evaluations = 0;
  int rounds = 0;                      // refinement passes performed
  std::string note;
};

// P_{E,theta} on a set of scalar impact parameters (d = 2), with adaptive
// insertion where consecutive outgoing directions differ by more than max_gap.
DirectionMap final_direction_map(const ScatterContext& ctx, const Vec& theta,
                                 const std::vector<double>& b_values, const RefineOptions& opt = {});

// Default sampling of the compactified line: uniform in u plus points
// clustered toward |b| = infinity.
std::vector<double> compactified_grid(int count);

enum class TrappingClass { NontrappingEvidence, TrappingDetected, Inconclusive };

const char* to_string(TrappingClass c);

struct SamplePlan {
  int directions = 4;   // incoming directions, equally spaced
  int grid = 64;        // compactified impact parameters per direction
  int random = 64;      // additional random (theta, b) launches
  unsigned long long seed = 1;
  double b_max = 0.0;   // random impact parameters in [-b_max, b_max]; 0: 1.5 R_vir
};

struct EnergyScanEntry {
  double energy = 0.0;
  std::optional<HillClass> hill;  // d = 2 only
  int launches = 0;
  int timeouts = 0;
  int failures = 0;
  double timeout_fraction = 0.0;
  double max_flight_time = 0.0;
  TrappingClass classification = TrappingClass::Inconclusive;
  std::string evidence;    // hill_multi_component | timeout | all_escaped | failures
  std::string confidence;  // theorem | numerical_timeout | sampled
};

struct EnergyScanReport {
  std::vector<double> energies;
  std::vector<EnergyScanEntry> entries;
  bool timeout_as_trapped = true;
};

EnergyScanReport trapping_scan(const PotentialModel& model, const std::vector<double>& energies,
                               const SamplePlan& plan = {}, const ScatterConfig& config = {});

void write_scatter_csv(std::ostream& os, const std::vector<ScatterRecord>& records);
void write_scan_json(std::ostream& os, const EnergyScanReport& report);

}  // namespace scatdeg
