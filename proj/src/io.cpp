#include "bxr/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "bxr/error.hpp"

namespace bxr {

namespace {

void require_keys(const Json& j, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional, const std::string& what) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, what + " must be an object");
  std::set<std::string> allowed;
  for (const char* k : required) {
    if (!j.contains(k)) throw Error(ErrorCode::ParseError, what + ": missing key '" + k + "'");
    allowed.insert(k);
  }
  for (const char* k : optional) allowed.insert(k);
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw Error(ErrorCode::ParseError, what + ": unknown key '" + k + "'");
  }
}

template <class T>
T get(const Json& j, const char* key, const std::string& what) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, what + "." + key + ": " + e.what());
  }
}

}  // namespace

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const Json& j, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw Error(ErrorCode::ParseError, "matrix rows");
  Mat m(n, n);
  for (int r = 0; r < n; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != n) {
      throw Error(ErrorCode::ParseError, "matrix columns");
    }
    for (int c = 0; c < n; ++c) {
      if (!j[r][c].is_number()) throw Error(ErrorCode::ParseError, "matrix entry must be a number");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

Json event_to_json(const Event& e) { return Json::array({e.t, e.x[0], e.x[1], e.x[2]}); }

Event event_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::ParseError, "event must be a 4-array");
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::ParseError, "event entries must be numbers");
  }
  return Event(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

static Json component_json(int axis, const Eigen::MatrixXd& coords, const CosineBasis& basis, int n) {
  Json modes = Json::array();
  for (int j = 0; j < coords.rows(); ++j) {
    const Eigen::VectorXd c = coords.row(j).transpose();
    const Mat m = so_from_coords(n, c.data());
    Json flat = Json::array();
    for (int r = 0; r < n; ++r)
      for (int col = 0; col < n; ++col) flat.push_back(m(r, col));
    const auto& k = basis.mode(j);
    modes.push_back({{"k", {k[0], k[1], k[2], k[3]}}, {"coeff", flat}});
  }
  return {{"axis", axis}, {"modes", modes}};
}

static Json basis_json(const CosineBasis& b) {
  return {{"K", b.per_axis()}, {"ordering_rule", "eigenvalue_then_lex"}};
}

Json connection_to_json(const ConnectionField& a) {
  Json comps = Json::array();
  for (int mu = 0; mu < 4; ++mu) comps.push_back(component_json(mu, a.coords(mu), a.basis(), a.n()));
  return {{"kind", "connection"}, {"n", a.n()}, {"basis", basis_json(a.basis())}, {"components", comps}};
}

Json connection_to_json(const LightSinkField& a) {
  Json comps = Json::array();
  for (int i = 0; i < 3; ++i) comps.push_back(component_json(i + 1, a.coords(i), a.basis(), a.n()));
  return {{"kind", "lightsink"}, {"n", a.n()}, {"basis", basis_json(a.basis())}, {"components", comps}};
}

AnyConnection connection_from_json(const Json& j) {
  require_keys(j, {"n", "basis", "components"}, {"kind"}, "connection");
  const std::string kind = j.contains("kind") ? get<std::string>(j, "kind", "connection") : "connection";
  if (kind != "connection" && kind != "lightsink") {
    throw Error(ErrorCode::ParseError, "connection.kind must be 'connection' or 'lightsink'");
  }
  const int n = get<int>(j, "n", "connection");
  if (n < 2 || n > kMaxDim) throw Error(ErrorCode::ParseError, "connection.n out of range");
  const Json& bj = j.at("basis");
  require_keys(bj, {"K"}, {"ordering_rule"}, "connection.basis");
  if (bj.contains("ordering_rule") && bj.at("ordering_rule") != "eigenvalue_then_lex") {
    throw Error(ErrorCode::ParseError, "unsupported basis ordering rule");
  }
  const int k = get<int>(bj, "K", "connection.basis");
  if (k < 1 || k > 8) throw Error(ErrorCode::ParseError, "connection.basis.K out of range");
  const CosineBasis basis(k);
  const bool sink = kind == "lightsink";
  ConnectionField general(n, basis);
  LightSinkField light(n, basis);
  const Json& comps = j.at("components");
  if (!comps.is_array()) throw Error(ErrorCode::ParseError, "connection.components must be an array");
  for (const auto& cj : comps) {
    require_keys(cj, {"axis", "modes"}, {}, "connection.components[]");
    const int axis = get<int>(cj, "axis", "component");
    if (axis < (sink ? 1 : 0) || axis > 3) throw Error(ErrorCode::ParseError, "component axis out of range");
    if (!cj.at("modes").is_array()) throw Error(ErrorCode::ParseError, "component modes must be an array");
    for (const auto& mj : cj.at("modes")) {
      require_keys(mj, {"k", "coeff"}, {}, "mode");
      const auto kk = get<std::array<int, 4>>(mj, "k", "mode");
      int idx;
      try {
        idx = basis.index_of(kk);
      } catch (const Error&) {
        throw Error(ErrorCode::ParseError, "mode index outside the basis");
      }
      const auto flat = get<std::vector<double>>(mj, "coeff", "mode");
      if (static_cast<int>(flat.size()) != n * n) throw Error(ErrorCode::ParseError, "coeff must have n*n entries");
      Mat m(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m(r, c) = flat[r * n + c];
      if ((m + m.transpose()).norm() > 1e-12) throw Error(ErrorCode::ParseError, "coefficient is not skew-symmetric");
      if (sink) {
        light.set_coeff(axis - 1, idx, m);
      } else {
        general.set_coeff(axis, idx, m);
      }
    }
  }
  if (sink) return light;
  return general;
}

const OneForm& as_one_form(const AnyConnection& c) {
  return std::visit([](const auto& f) -> const OneForm& { return f; }, c);
}

static std::shared_ptr<const ScalarField> scalar_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("type")) throw Error(ErrorCode::ParseError, "field needs a type");
  const std::string type = get<std::string>(j, "type", "field");
  if (type == "polynomial") {
    require_keys(j, {"type", "terms"}, {}, "polynomial");
    std::vector<PolynomialField::Term> terms;
    for (const auto& t : j.at("terms")) {
      require_keys(t, {"coeff", "powers"}, {}, "term");
      const auto powers = get<std::array<int, 4>>(t, "powers", "term");
      for (int p : powers) {
        if (p < 0) throw Error(ErrorCode::ParseError, "negative power");
      }
      terms.push_back({get<double>(t, "coeff", "term"), powers});
    }
    return std::make_shared<PolynomialField>(std::move(terms));
  }
  if (type == "radial_bump") {
    require_keys(j, {"type", "radius", "amplitude"}, {"width", "tilt"}, "radial_bump");
    Vec4 tilt = Vec4::Zero();
    if (j.contains("tilt")) {
      const auto t = get<std::array<double, 4>>(j, "tilt", "radial_bump");
      tilt = Vec4(t[0], t[1], t[2], t[3]);
    }
    return std::make_shared<RadialBumpField>(get<double>(j, "radius", "radial_bump"),
                                             get<double>(j, "amplitude", "radial_bump"),
                                             j.contains("width") ? get<double>(j, "width", "radial_bump") : 1.0,
                                             tilt);
  }
  throw Error(ErrorCode::ParseError, "unknown field type '" + type + "'");
}

std::unique_ptr<ExpProductGauge> gauge_from_json(const Json& j) {
  require_keys(j, {"n", "factors"}, {"kind"}, "gauge");
  const int n = get<int>(j, "n", "gauge");
  if (n < 2 || n > kMaxDim) throw Error(ErrorCode::ParseError, "gauge.n out of range");
  std::vector<ExpProductGauge::Factor> factors;
  for (const auto& f : j.at("factors")) {
    require_keys(f, {"generator", "field"}, {}, "factor");
    factors.push_back({mat_from_json(f.at("generator"), n), scalar_from_json(f.at("field"))});
  }
  try {
    return std::make_unique<ExpProductGauge>(n, std::move(factors));
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

Json gauge_to_json(const ExpProductGauge& g) {
  Json factors = Json::array();
  for (const auto& f : g.factors()) {
    Json field;
    if (const auto* poly = dynamic_cast<const PolynomialField*>(f.field.get())) {
      Json terms = Json::array();
      for (const auto& t : poly->terms()) terms.push_back({{"coeff", t.coeff}, {"powers", t.powers}});
      field = {{"type", "polynomial"}, {"terms", terms}};
    } else {
      throw Error(ErrorCode::InvalidConfig, "only polynomial factors serialise");
    }
    factors.push_back({{"generator", mat_to_json(f.generator)}, {"field", field}});
  }
  return {{"kind", "exp_product"}, {"n", g.n()}, {"factors", factors}};
}

Json gauge_grid_to_json(const GaugeField& g, const std::vector<Event>& events) {
  Json ev = Json::array(), ms = Json::array();
  for (const auto& e : events) {
    ev.push_back(event_to_json(e));
    ms.push_back(mat_to_json(g.value(e.vec())));
  }
  return {{"n", g.n()}, {"events", ev}, {"matrices", ms}};
}

void write_dataset(std::ostream& os, const Dataset& d) {
  Json header = {{"n", d.n},
                 {"epsilon", d.epsilon},
                 {"N", d.size()},
                 {"noise_sd", d.noise_sd},
                 {"steps", d.steps},
                 {"seeds", {{"data", d.seed}}}};
  header["truth_hash"] = d.truth_hash ? Json(*d.truth_hash) : Json(nullptr);
  os << header.dump() << '\n';
  for (const auto& ob : d.observations) {
    Json line = {{"path",
                  {{"x", event_to_json(ob.path.x)},
                   {"y", event_to_json(ob.path.y)},
                   {"z", event_to_json(ob.path.z)}}},
                 {"s_plus", mat_to_json(ob.s_plus)},
                 {"s_minus", mat_to_json(ob.s_minus)}};
    os << line.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "empty dataset");
  Json h;
  try {
    h = Json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("dataset header: ") + e.what());
  }
  require_keys(h, {"n", "epsilon", "N"}, {"noise_sd", "steps", "seeds", "truth_hash"}, "dataset header");
  Dataset d;
  d.n = get<int>(h, "n", "header");
  d.epsilon = get<double>(h, "epsilon", "header");
  if (h.contains("noise_sd")) d.noise_sd = get<double>(h, "noise_sd", "header");
  if (h.contains("steps")) d.steps = get<int>(h, "steps", "header");
  if (h.contains("seeds") && h.at("seeds").contains("data")) d.seed = h.at("seeds").at("data").get<std::uint64_t>();
  if (h.contains("truth_hash") && h.at("truth_hash").is_string()) d.truth_hash = h.at("truth_hash").get<std::string>();
  const long expected = get<long>(h, "N", "header");
  if (d.n < 2 || d.n > kMaxDim) throw Error(ErrorCode::ParseError, "dataset n out of range");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("dataset line: ") + e.what());
    }
    require_keys(j, {"path", "s_plus", "s_minus"}, {}, "observation");
    const Json& p = j.at("path");
    require_keys(p, {"x", "y", "z"}, {"kind"}, "observation.path");
    Observation ob;
    ob.path = {event_from_json(p.at("x")), event_from_json(p.at("y")), event_from_json(p.at("z")),
               PathKind::free};
    ob.s_plus = mat_from_json(j.at("s_plus"), d.n);
    ob.s_minus = mat_from_json(j.at("s_minus"), d.n);
    d.observations.push_back(std::move(ob));
  }
  if (d.size() != expected) throw Error(ErrorCode::ParseError, "observation count does not match header");
  return d;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path);
  out << body;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string content_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace bxr
