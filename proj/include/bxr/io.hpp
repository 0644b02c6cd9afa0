#pragma once

// File formats: connection and gauge JSON, dataset JSON-lines, CSV helpers.

#include <iosfwd>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bxr/bayes.hpp"
#include "bxr/gauge.hpp"

namespace bxr {

using Json = nlohmann::json;

Json mat_to_json(const Mat& m);
Mat mat_from_json(const Json& j, int n);
Json event_to_json(const Event& e);
Event event_from_json(const Json& j);

/// {"kind": "connection" | "lightsink", "n", "basis": {"K", "ordering_rule"},
///  "components": [{"axis", "modes": [{"k": [4 ints], "coeff": n*n row-major}]}]}
/// Light-sink fields carry axes 1..3 only.
Json connection_to_json(const ConnectionField& a);
Json connection_to_json(const LightSinkField& a);

using AnyConnection = std::variant<ConnectionField, LightSinkField>;
AnyConnection connection_from_json(const Json& j);
const OneForm& as_one_form(const AnyConnection& c);

/// Closed-form gauge: {"n", "factors": [{"generator": n x n, "field": {...}}]}
/// with field types "polynomial" {"terms": [{"coeff", "powers"}]} and
/// "radial_bump" {"radius", "amplitude", "width", "tilt"}.
std::unique_ptr<ExpProductGauge> gauge_from_json(const Json& j);
Json gauge_to_json(const ExpProductGauge& g);

/// Sampled grid of a gauge field: {"events": [...], "matrices": [...]}.
Json gauge_grid_to_json(const GaugeField& g, const std::vector<Event>& events);

void write_dataset(std::ostream& os, const Dataset& d);
Dataset read_dataset(std::istream& is);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& body);
std::string read_text_file(const std::string& path);

/// 64-bit FNV-1a of a string, hex-encoded.
std::string content_hash(const std::string& s);

/// Shortest round-trip formatting of a double.
std::string fmt_double(double v);

}  // namespace bxr
