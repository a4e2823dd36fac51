#include "scatdeg/config.hpp"

#include <fstream>
#include <set>

namespace scatdeg {

namespace {

void only_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::InvalidArgument, where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(ErrorKind::InvalidArgument, "unknown field '" + key + "' in " + where);
  for (const auto& key : allowed)
    if (!j.contains(key)) fail(ErrorKind::InvalidArgument, "missing field '" + key + "' in " + where);
}

double number(const nlohmann::json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) fail(ErrorKind::InvalidArgument, std::string("field '") + key + "' in " + where + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(ErrorKind::InvalidArgument, std::string("field '") + key + "' in " + where + " must be finite");
  return x;
}

Vec point(const nlohmann::json& j, int dim, const std::string& where) {
  const auto& c = j.at("center");
  if (!c.is_array() || static_cast<int>(c.size()) != dim)
    fail(ErrorKind::InvalidArgument, "center in " + where + " must have " + std::to_string(dim) + " coordinates");
  Vec v(dim);
  for (int i = 0; i < dim; ++i) {
    if (!c[i].is_number()) fail(ErrorKind::InvalidArgument, "center in " + where + " must be numeric");
    v(i) = c[i].get<double>();
    if (!std::isfinite(v(i))) fail(ErrorKind::InvalidArgument, "center in " + where + " must be finite");
  }
  return v;
}

}  // namespace

PotentialModel parse_potential(const nlohmann::json& j) {
  only_keys(j, {"dimension", "terms"}, "potential");
  if (!j["dimension"].is_number_integer()) fail(ErrorKind::InvalidArgument, "dimension must be an integer");
  const int dim = j["dimension"].get<int>();
  if (dim != 2 && dim != 3) fail(ErrorKind::InvalidArgument, "dimension must be 2 or 3");
  if (!j["terms"].is_array()) fail(ErrorKind::InvalidArgument, "terms must be an array");
  std::vector<PotentialTerm> terms;
  for (std::size_t i = 0; i < j["terms"].size(); ++i) {
    const auto& t = j["terms"][i];
    const std::string where = "terms[" + std::to_string(i) + "]";
    if (!t.is_object() || !t.contains("kind") || !t["kind"].is_string())
      fail(ErrorKind::InvalidArgument, where + " needs a string 'kind'");
    const std::string kind = t["kind"];
    if (kind == "gaussian_bump") {
      only_keys(t, {"kind", "A", "sigma", "center"}, where);
      terms.push_back(PotentialTerm::gaussian(number(t, "A", where), number(t, "sigma", where), point(t, dim, where)));
    } else if (kind == "poly_bump") {
      only_keys(t, {"kind", "A", "rho", "center"}, where);
      terms.push_back(PotentialTerm::poly(number(t, "A", where), number(t, "rho", where), point(t, dim, where)));
    } else if (kind == "singular_power") {
      only_keys(t, {"kind", "Z", "alpha", "center"}, where);
      terms.push_back(PotentialTerm::singular(number(t, "Z", where), number(t, "alpha", where), point(t, dim, where)));
    } else {
      fail(ErrorKind::InvalidArgument, "unknown term kind '" + kind + "' in " + where);
    }
  }
  return PotentialModel(dim, std::move(terms));
}

PotentialModel load_potential(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidArgument, "cannot open potential config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidArgument, "malformed JSON in '" + path + "': " + e.what());
  }
  return parse_potential(j);
}

nlohmann::json potential_to_json(const PotentialModel& model) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : model.terms()) {
    const std::vector<double> c(t.center.data(), t.center.data() + t.center.size());
    switch (t.kind) {
      case TermKind::GaussianBump:
        terms.push_back({{"kind", "gaussian_bump"}, {"A", t.amplitude}, {"sigma", t.width}, {"center", c}});
        break;
      case TermKind::PolyBump:
        terms.push_back({{"kind", "poly_bump"}, {"A", t.amplitude}, {"rho", t.width}, {"center", c}});
        break;
      case TermKind::SingularPower:
        terms.push_back({{"kind", "singular_power"}, {"Z", t.strength}, {"alpha", t.alpha}, {"center", c}});
        break;
    }
  }
  return {{"dimension", model.dimension()}, {"terms", terms}};
}

}  // namespace scatdeg
