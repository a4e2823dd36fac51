#pragma once

#include <string>

#include "json.hpp"
#include "scatdeg/potential.hpp"

namespace scatdeg {

// Potential configuration:
//   {"dimension": 2, "terms": [{"kind": "gaussian_bump", "A": 2, "sigma": 1, "center": [0, 0]},
//                              {"kind": "poly_bump", "A": 1, "rho": 2, "center": [0, 0]},
//                              {"kind": "singular_power", "Z": 1, "alpha": 1, "center": [0, 0]}]}
// Field names are exact; unknown or missing fields are InvalidArgument.
PotentialModel parse_potential(const nlohmann::json& j);
PotentialModel load_potential(const std::string& path);
nlohmann::json potential_to_json(const PotentialModel& model);

}  // namespace scatdeg
