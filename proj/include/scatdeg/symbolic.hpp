#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scatdeg/scattering.hpp"

namespace scatdeg {

// Effective support of one term: a disk around its center.
struct Support {
  Vec center;
  double radius = 0.0;
};

// Supports of all terms; singular terms get `singular_radius`.
std::vector<Support> supports_of(const PotentialModel& model, double singular_radius = 1.0);

// Finite word over {1..k} without repeated adjacent symbols.
class Itinerary {
 public:
  Itinerary(std::vector<int> symbols, int alphabet);

  static Itinerary parse(const std::string& text, int alphabet);  // "1,2,1"

  const std::vector<int>& symbols() const { return symbols_; }
  int alphabet() const { return alphabet_; }
  std::size_t size() const { return symbols_.size(); }
  std::string str() const;

 private:
  std::vector<int> symbols_;
  int alphabet_;
};

// All admissible words of length m over k symbols (k (k-1)^(m-1) of them).
std::vector<Itinerary> admissible_words(int alphabet, int length);

struct NonShadowing {
  bool pass = true;
  std::optional<std::array<int, 3>> violation;  // 1-based triple met by one line
  double line_angle = 0.0;                      // normal angle of a violating line
  double line_offset = 0.0;
  double margin = 0.0;  // smallest clearance over all triples (negative on violation)
};

// No straight line meets three of the supports.
NonShadowing check_nonshadowing(const std::vector<Support>& supports);

struct Visit {
  int center = 0;  // 1-based
  double closest = 0.0;
  double time = 0.0;
};

// Ordered visits of the trajectory to the support disks, consecutive
// duplicates merged; `closest` is the minimum distance during the visit.
std::vector<Visit> visit_log(const Trajectory& traj, const std::vector<Support>& supports);

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

struct ItineraryWitness {
  double energy = 0.0;
  Vec theta;
  double b = 0.0;
  std::vector<Visit> visits;
  double bracket_width = 0.0;
  std::vector<Bracket> nested;  // bracket after each matched prefix
  int evaluations = 0;
};

struct SymbolicOptions {
  int samples = 64;          // initial sweep points per bracket
  int max_samples = 4096;    // sweep doubling stops here
  double min_width = 1e-14;  // relative bracket width treated as exhausted precision
  double b_max = 0.0;        // initial sweep [-b_max, b_max]; 0: enclose all supports
  double singular_radius = 1.0;
  int directions = 12;  // incoming directions tried in turn, starting from theta
  ScatterConfig scatter;
};

// Nested bisection on b: each matched prefix of the word owns brackets of
// impact parameters (one per component), and the next symbol is searched
// inside them. Brackets are cached across words, so realizing many words with
// common prefixes is cheap. Words unreachable from theta are retried from
// evenly rotated incoming directions; the witness records the one used.
class ItineraryRealizer {
 public:
  ItineraryRealizer(PotentialModel model, double energy, const Vec& theta, SymbolicOptions opt = {});

  ItineraryWitness realize(const Itinerary& word);

  const std::vector<Support>& supports() const { return supports_; }
  const NonShadowing& nonshadowing() const { return shadow_; }
  int evaluations() const;

  std::vector<Visit> log_at(double b);

 private:
  ItineraryWitness realize_here(const Itinerary& word);
  bool matches(double b, const std::vector<int>& prefix);
  std::vector<std::vector<Visit>> sweep(const std::vector<double>& bs);
  std::vector<Bracket> find_children(const Bracket& parent, const std::vector<int>& prefix);

  struct CacheEntry {
    std::vector<int> word;
    Bracket parent;
    std::vector<Bracket> children;
  };

  ScatterContext ctx_;
  Vec theta_;
  SymbolicOptions opt_;
  std::vector<Support> supports_;
  NonShadowing shadow_;
  std::vector<CacheEntry> cache_;
  std::vector<std::unique_ptr<ItineraryRealizer>> alternates_;
  int evaluations_ = 0;
};

ItineraryWitness realize_itinerary(const PotentialModel& model, double energy, const Vec& theta,
                                   const Itinerary& word, const SymbolicOptions& opt = {});

void write_witness_json(std::ostream& os, const Itinerary& word, const ItineraryWitness& w);

}  // namespace scatdeg
