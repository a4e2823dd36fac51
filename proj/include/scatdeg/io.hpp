#pragma once

#include <string>

#include "json.hpp"

namespace scatdeg {

// Numbers are written with 17 significant digits ("%.17g"); non-finite values
// become null in JSON and nan/inf in CSV.
std::string format_number(double v);

// Serializes with the fixed number format above (nlohmann's own dump uses
// shortest round-trip digits instead).
std::string dump_json(const nlohmann::json& j, int indent = 2);

}  // namespace scatdeg
