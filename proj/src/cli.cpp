#include "scatdeg/cli.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "scatdeg/config.hpp"
#include "scatdeg/degree.hpp"
#include "scatdeg/io.hpp"
#include "scatdeg/parallel.hpp"
#include "scatdeg/symbolic.hpp"

namespace scatdeg {

namespace {

struct Range {
  double lo = 0.0, hi = 0.0;
  int count = 0;
  std::vector<double> values() const {
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i) v[i] = lo + (hi - lo) * i / (count - 1);
    return v;
  }
};

// "min:max:count" with min < max and count >= 2.
Range parse_range(const std::string& text, const char* flag) {
  Range r;
  std::stringstream ss(text);
  std::string a, b, c, extra;
  const bool shaped = std::getline(ss, a, ':') && std::getline(ss, b, ':') && std::getline(ss, c, ':') &&
                      !std::getline(ss, extra);
  std::size_t ua = 0, ub = 0, uc = 0;
  try {
    if (shaped) {
      r.lo = std::stod(a, &ua);
      r.hi = std::stod(b, &ub);
      r.count = std::stoi(c, &uc);
    }
  } catch (const std::exception&) {
    ua = 0;
  }
  if (!shaped || ua != a.size() || ub != b.size() || uc != c.size() || ua == 0)
    fail(ErrorKind::InvalidArgument, std::string(flag) + " must look like min:max:count, got '" + text + "'");
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.lo < r.hi))
    fail(ErrorKind::InvalidArgument, std::string(flag) + " needs finite min < max, got '" + text + "'");
  if (r.count < 2) fail(ErrorKind::InvalidArgument, std::string(flag) + " needs count >= 2, got '" + text + "'");
  return r;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v))
      fail(ErrorKind::InvalidArgument, std::string(flag) + " must be a comma-separated list of numbers");
    out.push_back(v);
  }
  if (out.empty()) fail(ErrorKind::InvalidArgument, std::string(flag) + " is empty");
  return out;
}

Vec parse_vector(const std::string& text, int dim, const char* flag) {
  const auto v = parse_list(text, flag);
  if (static_cast<int>(v.size()) != dim)
    fail(ErrorKind::InvalidArgument, std::string(flag) + " needs " + std::to_string(dim) + " components");
  Vec out(dim);
  for (int i = 0; i < dim; ++i) out(i) = v[i];
  if (!(out.norm() > 0)) fail(ErrorKind::InvalidArgument, std::string(flag) + " must be nonzero");
  return out;
}

void require_energy(double E) {
  if (!(E > 0) || !std::isfinite(E)) fail(ErrorKind::InvalidArgument, "--energy must be a finite positive number");
}

void require_planar(const PotentialModel& m, const char* cmd) {
  if (m.dimension() != 2) fail(ErrorKind::InvalidArgument, std::string(cmd) + " needs a d = 2 potential");
}

std::vector<double> vec_to_list(const Vec& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json hill_json(const HillAnalysis& h, bool with_points) {
  nlohmann::json j;
  j["E"] = h.energy;
  j["classification"] = to_string(h.classification);
  j["resolution"] = h.resolution;
  j["half_width"] = h.half_width;
  j["boundary_loops"] = h.boundary_loop_count();
  nlohmann::json loops = nlohmann::json::array();
  for (const auto& l : h.loops) {
    nlohmann::json o{{"bounds_unbounded", l.bounds_unbounded},
                     {"touches_saddle", l.touches_saddle},
                     {"centroid", vec_to_list(l.centroid)},
                     {"mean_radius", l.mean_radius},
                     {"point_count", l.points.size()}};
    if (with_points) {
      nlohmann::json pts = nlohmann::json::array();
      for (const auto& p : l.points) pts.push_back(vec_to_list(p));
      o["points"] = pts;
    }
    loops.push_back(o);
  }
  j["loops"] = loops;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : h.components) comps.push_back({{"nodes", c.node_count}, {"bounded", c.bounded}});
  j["components"] = comps;
  return j;
}

struct Globals {
  std::string config;
  std::string out;
  double tol = 0.0;
  unsigned long long seed = 1;
  int threads = 0;
};

ScatterConfig scatter_config(const Globals& g) {
  ScatterConfig c;
  if (g.tol > 0) {
    c.integrator.rtol = g.tol;
    c.integrator.atol = 0.1 * g.tol;
  }
  c.threads = g.threads;
  return c;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scattering, non-trapping degree and itineraries of classical potentials", "scatdeg"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "potential configuration (JSON)");
  app.add_option("--out", g.out, "write the result here instead of stdout");
  app.add_option("--tol", g.tol, "integrator relative tolerance (absolute: tol/10)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "seed for random sampling");
  app.add_option("--threads", g.threads, "worker threads (default: SCATDEG_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);

  double energy = 0.0, theta = 0.0, l = 0.0;
  std::string b_range, direction, method = "auto", target, sequence, energies, e_range;
  int mesh = 3, grid = 64, resolution = 256, directions = 4, random = 64, window_points = 400;
  double window = 0.0;
  bool with_points = false;

  auto* scatter = app.add_subcommand("scatter", "outgoing asymptotes for a b-sweep (CSV)");
  scatter->add_option("--energy", energy)->required();
  scatter->add_option("--theta", theta, "incoming direction angle (radians)");
  scatter->add_option("--b-range", b_range, "min:max:count")->required();

  auto* degree = app.add_subcommand("degree", "non-trapping degree (JSON)");
  degree->add_option("--energy", energy)->required();
  degree->add_option("--theta", theta, "incoming direction angle (d = 2)");
  degree->add_option("--direction", direction, "incoming direction x,y,z (d = 3)");
  degree->add_option("--method", method)
      ->check(CLI::IsMember({"auto", "winding2d", "sphere3d", "quadrature_central", "lagrange_projection"}));
  degree->add_option("--mesh", mesh, "icosahedral subdivision level (d = 3)")->check(CLI::NonNegativeNumber);
  degree->add_option("--grid", grid, "initial compactified samples (d = 2)")->check(CLI::Range(4, 1 << 20));
  degree->add_option("--target", target, "target point x,y for lagrange_projection");

  auto* scan = app.add_subcommand("scan", "trapping evidence over energies (JSON)");
  scan->add_option("--energies", energies, "comma-separated energies");
  scan->add_option("--e-range", e_range, "min:max:count");
  scan->add_option("--directions", directions)->check(CLI::Range(1, 1 << 16));
  scan->add_option("--grid", grid)->check(CLI::Range(2, 1 << 20));
  scan->add_option("--random", random)->check(CLI::NonNegativeNumber);

  auto* deflect = app.add_subcommand("deflect", "swept angle of a central potential (JSON)");
  deflect->add_option("--energy", energy)->required();
  deflect->add_option("--l", l, "angular momentum")->required();

  auto* hill = app.add_subcommand("hill", "Hill region boundary analysis (JSON)");
  hill->add_option("--energy", energy)->required();
  hill->add_option("--resolution", resolution)->check(CLI::Range(8, 1 << 14));
  hill->add_flag("--points", with_points, "include contour points");

  auto* itinerary = app.add_subcommand("itinerary", "realize a visiting sequence by bisection (JSON)");
  itinerary->add_option("--energy", energy)->required();
  itinerary->add_option("--sequence", sequence, "1-based centers, e.g. 1,2,1,3")->required();
  itinerary->add_option("--theta", theta, "incoming direction angle");
  int turns = 12;
  itinerary->add_option("--directions", turns, "rotated incoming directions to try (1: theta only)")
      ->check(CLI::Range(1, 720));

  auto* trajfan = app.add_subcommand("trajfan", "trajectory polylines for a b-sweep (CSV)");
  trajfan->add_option("--energy", energy)->required();
  trajfan->add_option("--theta", theta, "incoming direction angle");
  trajfan->add_option("--b-range", b_range, "min:max:count")->required();
  trajfan->add_option("--window", window, "keep points within this radius (default 3 R_vir)");
  trajfan->add_option("--points", window_points, "samples per trajectory")->check(CLI::Range(2, 1 << 20));

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  std::ostringstream result;
  try {
    if (g.config.empty()) fail(ErrorKind::InvalidArgument, "--config is required");
    const PotentialModel model = load_potential(g.config);
    const ScatterConfig cfg = scatter_config(g);
    const int threads = g.threads > 0 ? g.threads : default_thread_count();

    if (*scatter) {
      require_energy(energy);
      require_planar(model, "scatter");
      const Range r = parse_range(b_range, "--b-range");
      const ScatterContext ctx(model, energy, cfg);
      const Vec th = unit_angle(theta);
      const auto bs = r.values();
      const auto recs = parallel_map(bs.size(), [&](std::size_t i) { return ctx.scatter(th, impact_vector(th, bs[i])); }, threads);
      write_scatter_csv(result, recs);
    } else if (*degree) {
      require_energy(energy);
      DegreeOptions opt;
      opt.grid = grid;
      opt.mesh_level = mesh;
      opt.scatter = cfg;
      std::string m = method;
      if (m == "auto") m = model.dimension() == 3 ? "sphere3d" : "winding2d";
      DegreeEstimate est;
      nlohmann::json extra;
      if (m == "sphere3d") {
        if (model.dimension() != 3) fail(ErrorKind::InvalidArgument, "sphere3d needs a d = 3 potential");
        const Vec dir = direction.empty() ? vec3(0, 0, 1) : parse_vector(direction, 3, "--direction");
        est = degree_sphere(model, energy, dir, opt);
      } else {
        require_planar(model, "this degree method");
        const Vec th = unit_angle(theta);
        if (m == "winding2d") {
          est = degree_winding(model, energy, th, opt);
          if (method == "auto" && model.symmetry_center()) {
            const auto c = degree_central(model, energy).estimate;
            extra = {{"method", to_string(c.method)}, {"value", c.value}, {"residual", c.residual}};
          }
        } else if (m == "quadrature_central") {
          est = degree_central(model, energy).estimate;
        } else {
          LagrangeOptions lo;
          lo.scatter = cfg;
          lo.seed = g.seed;
          const Vec q = target.empty() ? random_accessible_points(model, energy, 1, 0.0, g.seed).front()
                                       : parse_vector(target, 2, "--target");
          est = lagrange_degree(model, energy, th, q, lo).estimate;
        }
      }
      std::ostringstream tmp;
      write_degree_json(tmp, energy, est);
      auto j = nlohmann::json::parse(tmp.str());
      if (!extra.is_null()) j["cross_check"] = extra;
      result << dump_json(j);
    } else if (*scan) {
      std::vector<double> es;
      if (!energies.empty() == !e_range.empty())
        fail(ErrorKind::InvalidArgument, "scan needs exactly one of --energies and --e-range");
      es = energies.empty() ? parse_range(e_range, "--e-range").values() : parse_list(energies, "--energies");
      for (double E : es) require_energy(E);
      SamplePlan plan;
      plan.directions = directions;
      plan.grid = grid;
      plan.random = random;
      plan.seed = g.seed;
      write_scan_json(result, trapping_scan(model, es, plan, cfg));
    } else if (*deflect) {
      require_energy(energy);
      require_planar(model, "deflect");
      write_deflection_json(result, deflection_quadrature(model, energy, l));
    } else if (*hill) {
      require_energy(energy);
      require_planar(model, "hill");
      result << dump_json(hill_json(hill_analysis(model, energy, resolution), with_points));
    } else if (*itinerary) {
      require_energy(energy);
      require_planar(model, "itinerary");
      const Itinerary word = Itinerary::parse(sequence, static_cast<int>(model.terms().size()));
      SymbolicOptions so;
      so.scatter = cfg;
      so.directions = turns;
      write_witness_json(result, word, realize_itinerary(model, energy, unit_angle(theta), word, so));
    } else if (*trajfan) {
      require_energy(energy);
      require_planar(model, "trajfan");
      const Range r = parse_range(b_range, "--b-range");
      const ScatterContext ctx(model, energy, cfg);
      const double radius = window > 0 ? window : 3.0 * ctx.virial().radius;
      const Vec th = unit_angle(theta);
      const auto bs = r.values();
      const auto rows = parallel_map(
          bs.size(),
          [&](std::size_t i) {
            const Trajectory tr = ctx.trajectory(th, impact_vector(th, bs[i]));
            // time window spent inside the plotting disk
            double t0 = tr.final_state().t, t1 = 0.0;
            for (const auto& s : tr.states)
              if (s.q.norm() <= radius) t0 = std::min(t0, s.t), t1 = std::max(t1, s.t);
            std::ostringstream os;
            if (!(t0 < t1)) return os.str();
            for (int k = 0; k < window_points; ++k) {
              const double t = t0 + (t1 - t0) * k / (window_points - 1);
              const Vec q = tr.state_at(t).q;
              os << i << "," << format_number(bs[i]) << "," << format_number(t) << "," << format_number(q(0)) << ","
                 << format_number(q(1)) << "\n";
            }
            return os.str();
          },
          threads);
      result << "trajectory,b,t,x,y\n";
      for (const auto& s : rows) result << s;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_dynamics_failure() ? kExitDynamics : kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  if (g.out.empty()) {
    out << result.str();
  } else {
    std::ofstream f(g.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write '" << g.out << "'\n";
      return kExitValidation;
    }
    f << result.str();
  }
  return kExitOk;
}

}  // namespace scatdeg
