#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "scatdeg/dopri5.hpp"
#include "scatdeg/potential.hpp"

namespace scatdeg {

// Unit mass: p is the velocity.
struct PhaseState {
  double t = 0.0;
  Vec q;
  Vec p;
};

double hamiltonian(const PotentialModel& model, const Vec& q, const Vec& p);
inline double hamiltonian(const PotentialModel& model, const PhaseState& x) {
  return hamiltonian(model, x.q, x.p);
}

// Scalar angular momentum in d=2, norm of q x p in d=3.
double angular_momentum(const Vec& q, const Vec& p);

enum class EventKind { Pericentre, Collision, Escape, Timeout };

const char* to_string(EventKind kind);

struct TrajectoryEvent {
  double t = 0.0;
  EventKind kind = EventKind::Pericentre;
  Vec q;
  Vec p;
  double angular_momentum = 0.0;
  Vec direction;  // pericentral direction for pericentre/collision events
};

// Coordinates the flow is integrated in. The regularized charts are centred on
// the singular point: Levi-Civita type z = w^(n+1) in d=2 (any n), and the
// Kustaanheimo-Stiefel map in d=3 (n=1). Both run in a fictitious time tau with
// dt/dtau = |q - s|^alpha.
enum class Chart { Cartesian, LeviCivita, KustaanheimoStiefel };

struct ChartFrame {
  Chart chart = Chart::Cartesian;
  Vec center;          // singular center (chart origin)
  int power = 1;       // n + 1 for Levi-Civita
  double energy = 0;   // energy used in the regularized Hamiltonian
  double strength = 0; // Z
  double alpha = 1;
};

struct ChartSegment {
  int frame = 0;
  DenseStep<double> dense;
  double tau_end = 0.0;  // <= dense.tau0 + dense.h when cut at an event
  double t_begin = 0.0;
  double t_end = 0.0;
};

struct StopCondition {
  double r_escape = std::numeric_limits<double>::infinity();   // virial radius
  double r_extract = std::numeric_limits<double>::infinity();  // stop once escaped and beyond
  double t_max = std::numeric_limits<double>::infinity();
};

struct IntegratorConfig {
  double rtol = 1e-11;
  double atol = 1e-12;
  double tol_energy = 1e-8;
  int retries = 2;
  long max_steps = 2'000'000;
  double l_coll = 1e-9;
  double r_switch = 0.0;     // 0: 0.05 min(1, (Z/E)^(1/alpha))
  double exit_factor = 2.0;  // leave the regularized chart at exit_factor * r_switch
  bool check_energy = true;
};

enum class StopReason { Extracted, Timeout };

struct Trajectory {
  double energy = 0.0;
  std::vector<PhaseState> states;
  std::vector<TrajectoryEvent> events;
  std::vector<ChartFrame> frames;
  std::vector<ChartSegment> segments;
  StopReason stop_reason = StopReason::Timeout;
  double max_energy_error = 0.0;
  bool regularized = false;
  long steps = 0;

  const PhaseState& final_state() const { return states.back(); }
  int count(EventKind kind) const;
  std::optional<TrajectoryEvent> first(EventKind kind) const;

  // Dense-output evaluation at physical time t within the integrated range.
  PhaseState state_at(double t) const;
};

Trajectory integrate(const PotentialModel& model, const PhaseState& x0, const StopCondition& stop,
                     const IntegratorConfig& config = {});

// As integrate(), but passes through collisions with the singular center using
// the regularized charts; requires alpha = 2n/(n+1) (n = 1 only for d = 3).
Trajectory integrate_regularized(const PotentialModel& model, const PhaseState& x0,
                                 const StopCondition& stop, const IntegratorConfig& config = {});

// Radius of the near-collision zone used by integrate_regularized.
double switch_radius(const PotentialTerm& singular, double energy);

struct PericentreData {
  double t = 0.0;
  Vec direction;
  double angular_momentum = 0.0;
  double radius = 0.0;
};

// All upward crossings of <q - s, p> = 0 along the trajectory.
std::vector<PericentreData> pericentres(const Trajectory& traj, const Vec& center);
// The first one; throws NoPericentre if there is none.
PericentreData pericentre(const Trajectory& traj, const Vec& center);

// First time with |q| >= R_vir and <q,p> >= 0, as recorded during integration.
std::optional<double> escape_time(const Trajectory& traj);

// CSV with header t,q1..qd,p1..pd,H and the JSON event sidecar.
void write_trajectory_csv(std::ostream& os, const PotentialModel& model, const Trajectory& traj);
void write_events_json(std::ostream& os, const Trajectory& traj);


}  // namespace scatdeg
