#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "bxr/bayes.hpp"
#include "bxr/error.hpp"
#include "bxr/identities.hpp"
#include "bxr/lightsink.hpp"
#include "bxr/parallel.hpp"
#include "bxr/stability.hpp"

namespace bxr::cli {

namespace {

// Reads keys of a config object and rejects whatever is left unread.
class Reader {
 public:
  explicit Reader(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j_.is_object()) throw Error(ErrorCode::InvalidConfig, what_ + " must be a JSON object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw Error(ErrorCode::InvalidConfig, what_ + ": missing key '" + key + "'");
    return convert<T>(key);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw Error(ErrorCode::InvalidConfig, what_ + ": unknown key '" + k + "'");
    }
  }

 private:
  template <class T>
  T convert(const std::string& key) const {
    const Json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Error(ErrorCode::InvalidConfig, what_ + "." + key + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw Error(ErrorCode::InvalidConfig, what_ + "." + key + " must be an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, what_ + "." + key + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error(ErrorCode::InvalidConfig, what_ + "." + key + " must be a string");
    }
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, what_ + "." + key + ": " + e.what());
    }
  }

  const Json& j_;
  std::string what_;
  std::set<std::string> used_;
};

void positive(double v, const char* name) {
  if (!(v > 0.0)) throw Error(ErrorCode::InvalidConfig, std::string(name) + " must be positive");
}

std::string out_path(const GlobalOptions& g, const std::string& name) {
  std::filesystem::create_directories(g.out_dir);
  return (std::filesystem::path(g.out_dir) / name).string();
}

int steps_or(const GlobalOptions& g, int fallback) { return g.ode_steps > 0 ? g.ode_steps : fallback; }

AnyConnection load_connection(const std::string& path) { return connection_from_json(read_json_file(path)); }

std::string mat_csv(const Mat& m) {
  std::string s;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) s += ',' + fmt_double(m(r, c));
  return s;
}

std::string event_csv(const Event& e) {
  return fmt_double(e.t) + ',' + fmt_double(e.x[0]) + ',' + fmt_double(e.x[1]) + ',' + fmt_double(e.x[2]);
}

std::string mat_header(const std::string& prefix, int n) {
  std::string s;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) s += ',' + prefix + std::to_string(r) + std::to_string(c);
  return s;
}

BrokenPath apply_kind(const BrokenPath& p, PathKind kind, const DiamondConfig& cfg) {
  switch (kind) {
    case PathKind::future_determined:
      return future_determined(p.x, p.y, cfg);
    case PathKind::past_determined:
      return past_determined(p.y, p.z, cfg);
    case PathKind::free:
      break;
  }
  return p;
}

std::vector<BrokenPath> read_paths(const std::string& file) {
  const Json j = read_json_file(file);
  if (!j.is_object() || !j.contains("paths") || !j.at("paths").is_array()) {
    throw Error(ErrorCode::ParseError, file + ": expected {\"paths\": [...]}");
  }
  std::vector<BrokenPath> out;
  for (const auto& p : j.at("paths")) {
    if (!p.is_object() || !p.contains("x") || !p.contains("y") || !p.contains("z")) {
      throw Error(ErrorCode::ParseError, file + ": path needs x, y, z");
    }
    out.push_back({event_from_json(p.at("x")), event_from_json(p.at("y")), event_from_json(p.at("z")),
                   PathKind::free});
  }
  return out;
}

}  // namespace

GlobalOptions global_options(Json& config, std::optional<std::uint64_t> seed,
                             std::optional<int> threads, std::optional<std::string> out) {
  if (!config.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  GlobalOptions g;
  Json globals = Json::object();
  for (const char* k : {"n", "epsilon", "seed", "out_dir", "ode_steps", "fd_step", "threads"}) {
    if (config.contains(k)) {
      globals[k] = config.at(k);
      config.erase(k);
    }
  }
  Reader r(globals, "config");
  g.n = r.get<int>("n", g.n);
  g.epsilon = r.get<double>("epsilon", g.epsilon);
  g.seed = r.get<std::uint64_t>("seed", g.seed);
  g.out_dir = r.get<std::string>("out_dir", g.out_dir);
  g.ode_steps = r.get<int>("ode_steps", g.ode_steps);
  g.fd_step = r.get<double>("fd_step", g.fd_step);
  g.threads = r.get<int>("threads", g.threads);
  if (seed) g.seed = *seed;
  if (threads) g.threads = *threads;
  if (out) g.out_dir = *out;
  if (g.n < 2 || g.n > kMaxDim) throw Error(ErrorCode::InvalidConfig, "n must lie in [2, 8]");
  DiamondConfig{g.epsilon}.validate();
  if (g.ode_steps < 0) throw Error(ErrorCode::InvalidConfig, "ode_steps must be non-negative");
  positive(g.fd_step, "fd_step");
  if (g.threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be at least 1");
  return g;
}

int cmd_verify(const Json& config, const GlobalOptions& g, std::ostream& log) {
  Reader r(config, "verify");
  IdentityConfig cfg;
  cfg.n = g.n;
  cfg.epsilon = g.epsilon;
  cfg.seed = g.seed;
  cfg.steps = steps_or(g, cfg.steps);
  cfg.fd_step = g.fd_step;
  cfg.threads = g.threads;
  cfg.pairs = r.get<int>("pairs", cfg.pairs);
  cfg.coeff_norm = r.get<double>("coeff_norm", cfg.coeff_norm);
  cfg.basis_per_axis = r.get<int>("basis_per_axis", cfg.basis_per_axis);
  cfg.include_lightsink = r.get<bool>("include_lightsink", cfg.include_lightsink);
  cfg.lightsink_pairs = r.get<int>("lightsink_pairs", cfg.lightsink_pairs);
  r.finish();
  if (cfg.pairs < 1 || cfg.lightsink_pairs < 1) throw Error(ErrorCode::InvalidConfig, "pair counts must be positive");
  if (cfg.basis_per_axis < 1) throw Error(ErrorCode::InvalidConfig, "basis_per_axis must be positive");
  positive(cfg.coeff_norm, "coeff_norm");

  const auto rows = run_identity_suite(cfg);
  write_text_file(out_path(g, "verify_report.csv"), identity_csv(rows));
  bool ok = true;
  for (const auto& c : rows) {
    log << (c.pass ? "pass " : "FAIL ") << c.name << " residual=" << fmt_double(c.residual) << '\n';
    ok = ok && c.pass;
  }
  return ok ? kExitPass : kExitCheckFailure;
}

int cmd_forward(const Json& config, const GlobalOptions& g, std::ostream& log) {
  Reader r(config, "forward");
  const auto conn_file = r.require<std::string>("connection");
  const auto paths_file = r.get<std::string>("paths", "");
  const int sample = r.get<int>("sample", 0);
  const auto kind_name = r.get<std::string>("kind", "free");
  const auto gauge_file = r.get<std::string>("gauge", "");
  const bool project = r.get<bool>("project", false);
  r.finish();
  if (paths_file.empty() == (sample <= 0)) {
    throw Error(ErrorCode::InvalidConfig, "give exactly one of 'paths' or a positive 'sample'");
  }
  PathKind kind;
  try {
    kind = path_kind_from_string(kind_name);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidConfig, "kind must be free, future_determined or past_determined");
  }
  const DiamondConfig dcfg{g.epsilon};
  const AnyConnection conn = load_connection(conn_file);
  const OneForm* form = &as_one_form(conn);
  std::unique_ptr<ExpProductGauge> gauge;
  std::unique_ptr<GaugedConnection> gauged;
  if (!gauge_file.empty()) {
    gauge = gauge_from_json(read_json_file(gauge_file));
    if (gauge->n() != form->n()) throw Error(ErrorCode::ParseError, "gauge and connection sizes differ");
    gauged = std::make_unique<GaugedConnection>(*form, *gauge);
    form = gauged.get();
  }
  const TransportOptions opts{steps_or(g, 128), false};
  std::unique_ptr<RhoConnection> rho;
  if (project) {
    rho = std::make_unique<RhoConnection>(*form, opts);
    form = rho.get();
  }

  std::vector<BrokenPath> paths;
  if (!paths_file.empty()) {
    paths = read_paths(paths_file);
  } else {
    const RandomStream root(g.seed);
    for (int i = 0; i < sample; ++i) {
      RandomStream s = root.split(static_cast<std::uint64_t>(i));
      paths.push_back(sample_broken_path(dcfg, s));
    }
  }
  for (auto& p : paths) p = apply_kind(p, kind, dcfg);

  std::vector<ScatteringResult> res(paths.size());
  parallel_for(static_cast<int>(paths.size()), g.threads,
               [&](int i) { res[i] = scattering_with_drift(*form, paths[i], opts); });

  const int n = form->n();
  std::ostringstream os;
  os << "index,xt,x1,x2,x3,yt,y1,y2,y3,zt,z1,z2,z3" << mat_header("s", n) << ",drift\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    os << i << ',' << event_csv(paths[i].x) << ',' << event_csv(paths[i].y) << ','
       << event_csv(paths[i].z) << mat_csv(res[i].s) << ',' << fmt_double(res[i].drift) << '\n';
  }
  write_text_file(out_path(g, "scattering.csv"), os.str());
  log << "wrote " << paths.size() << " scattering rows\n";
  return kExitPass;
}

int cmd_synth(const Json& config, const GlobalOptions& g, std::ostream& log) {
  Reader r(config, "synth");
  const long count = r.require<long>("N");
  SynthOptions so;
  so.noise_sd = r.get<double>("noise_sd", so.noise_sd);
  so.steps = steps_or(g, so.steps);
  const auto truth_src = r.get<std::string>("truth", "reference");
  PriorSpec spec;
  spec.n = g.n;
  spec.alpha = r.get<double>("alpha", spec.alpha);
  spec.dim = r.get<int>("dim", spec.dim);
  spec.basis_per_axis = r.get<int>("basis_per_axis", spec.basis_per_axis);
  const auto truth_seed = r.get<std::uint64_t>("truth_seed", g.seed);
  r.finish();
  if (count < 0) throw Error(ErrorCode::InvalidConfig, "N must be non-negative");
  if (so.noise_sd < 0.0) throw Error(ErrorCode::InvalidConfig, "noise_sd must be non-negative");
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  const DiamondConfig dcfg{g.epsilon};

  std::optional<LightSinkField> truth;
  if (truth_src == "reference" || truth_src == "prior") {
    RandomStream trng(truth_seed, 7);
    truth = truth_src == "reference" ? reference_truth(spec, trng) : sample_prior(spec, trng);
  } else {
    const AnyConnection c = load_connection(truth_src);
    if (!std::holds_alternative<LightSinkField>(c)) {
      throw Error(ErrorCode::InvalidConfig, "truth file must hold a light-sink field");
    }
    truth = std::get<LightSinkField>(c);
  }
  if (truth->n() != g.n) throw Error(ErrorCode::InvalidConfig, "truth size differs from n");
  const std::string truth_text = connection_to_json(*truth).dump();

  RandomStream rng(g.seed, 11);
  Dataset d = synthesize(*truth, count, dcfg, rng, so);
  d.seed = g.seed;
  d.truth_hash = content_hash(truth_text);
  std::ostringstream os;
  write_dataset(os, d);
  write_text_file(out_path(g, "dataset.jsonl"), os.str());
  write_text_file(out_path(g, "truth.json"), truth_text + "\n");
  log << "wrote " << d.size() << " observations, truth " << *d.truth_hash << '\n';
  return kExitPass;
}

int cmd_invert(const Json& config, const GlobalOptions& g, std::ostream& log) {
  Reader r(config, "invert");
  const auto data_file = r.require<std::string>("dataset");
  const auto truth_file = r.get<std::string>("truth", "");
  InversionOptions io;
  io.iters = r.get<long>("iters", io.iters);
  io.burn_in = r.get<long>("burn_in", io.burn_in);
  io.beta0 = r.get<double>("beta0", io.beta0);
  io.target_accept = r.get<double>("target_accept", io.target_accept);
  io.thin = r.get<int>("thin", io.thin);
  PriorSpec spec;
  spec.n = g.n;
  spec.alpha = r.get<double>("alpha", spec.alpha);
  spec.dim = r.get<int>("dim", spec.dim);
  spec.basis_per_axis = r.get<int>("basis_per_axis", spec.basis_per_axis);
  const long n_scale = r.get<long>("n_scale", -1);
  r.finish();
  if (io.iters <= io.burn_in || io.burn_in < 0) throw Error(ErrorCode::InvalidConfig, "iters must exceed burn_in >= 0");
  if (!(io.beta0 > 0.0 && io.beta0 <= 1.0)) throw Error(ErrorCode::InvalidConfig, "beta0 must lie in (0, 1]");
  if (!(io.target_accept > 0.0 && io.target_accept < 1.0)) throw Error(ErrorCode::InvalidConfig, "target_accept in (0, 1)");
  if (io.thin < 1) throw Error(ErrorCode::InvalidConfig, "thin must be positive");

  std::ifstream in(data_file);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + data_file);
  const Dataset data = read_dataset(in);
  if (data.n != g.n) throw Error(ErrorCode::InvalidConfig, "dataset n differs from config n");
  spec.n_scale = n_scale >= 0 ? n_scale : std::max<long>(1, data.size());
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  io.steps = steps_or(g, data.steps);

  std::optional<LightSinkField> truth;
  if (!truth_file.empty()) {
    const AnyConnection c = load_connection(truth_file);
    if (!std::holds_alternative<LightSinkField>(c)) throw Error(ErrorCode::InvalidConfig, "truth must be light-sink");
    truth = std::get<LightSinkField>(c);
  }

  RandomStream rng(g.seed, 13);
  std::optional<PosteriorSummary> result;
  try {
    result = run_inversion(data, spec, io, rng, truth ? &*truth : nullptr);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DivergentChain) {
      log << e.what() << '\n';
      return kExitCheckFailure;
    }
    throw;
  }
  const PosteriorSummary& post = *result;

  Json summary = {{"N", data.size()},
                  {"n", data.n},
                  {"epsilon", data.epsilon},
                  {"alpha", spec.alpha},
                  {"dim", spec.dim},
                  {"iters", io.iters},
                  {"burn_in", io.burn_in},
                  {"steps", io.steps},
                  {"seed", g.seed},
                  {"acceptance_rate", post.acceptance_rate},
                  {"beta", post.beta},
                  {"ess", post.ess},
                  {"mean_coeffs", std::vector<double>(post.mean_coeffs.begin(), post.mean_coeffs.end())},
                  {"var_coeffs", std::vector<double>(post.var_coeffs.begin(), post.var_coeffs.end())},
                  {"mean", connection_to_json(post.mean)}};
  summary["l2_error"] = post.l2_error ? Json(*post.l2_error) : Json(nullptr);
  summary["baseline_l2_error"] = truth ? Json(sobolev_norm(*truth, 0.0)) : Json(nullptr);
  summary["truth_hash"] = data.truth_hash ? Json(*data.truth_hash) : Json(nullptr);
  write_text_file(out_path(g, "posterior.json"), summary.dump(2) + "\n");

  std::ostringstream os;
  os << "iteration,log_post,accept,L2_error\n";
  for (const auto& t : post.trace) {
    os << t.iteration << ',' << fmt_double(t.log_post) << ',' << (t.accepted ? 1 : 0) << ','
       << (std::isnan(t.l2_error) ? std::string() : fmt_double(t.l2_error)) << '\n';
  }
  write_text_file(out_path(g, "trace.csv"), os.str());
  log << "acceptance " << fmt_double(post.acceptance_rate);
  if (post.l2_error) log << ", L2 error " << fmt_double(*post.l2_error);
  log << '\n';
  return kExitPass;
}

int cmd_report(const Json& config, const GlobalOptions& g, std::ostream& log) {
  Reader r(config, "report");
  const auto files = r.require<std::vector<std::string>>("summaries");
  r.finish();
  if (files.empty()) throw Error(ErrorCode::InvalidConfig, "summaries must not be empty");
  std::map<long, std::vector<double>> by_n;
  for (const auto& f : files) {
    const Json s = read_json_file(f);
    if (!s.contains("N") || !s.contains("l2_error") || !s.at("l2_error").is_number()) {
      throw Error(ErrorCode::InvalidConfig, f + ": summary lacks N or l2_error");
    }
    by_n[s.at("N").get<long>()].push_back(s.at("l2_error").get<double>());
  }
  std::vector<double> lx, ly;
  std::vector<std::pair<long, double>> rows;
  for (const auto& [n, errs] : by_n) {
    double m = 0.0;
    for (double e : errs) m += e;
    m /= static_cast<double>(errs.size());
    rows.push_back({n, m});
    if (n > 0 && m > 0.0) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(m));
    }
  }
  std::optional<double> slope;
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    slope = sxy / sxx;
  }
  std::ostringstream os;
  os << "N,runs,L2_error,log_log_slope\n";
  for (const auto& [n, m] : rows) {
    os << n << ',' << by_n[n].size() << ',' << fmt_double(m) << ',' << (slope ? fmt_double(*slope) : "") << '\n';
  }
  write_text_file(out_path(g, "report.csv"), os.str());
  if (slope) {
    log << "log-log slope " << fmt_double(*slope) << '\n';
  } else {
    log << "single sample size, no slope\n";
  }
  return kExitPass;
}

int cmd_recover_gauge(const Json& config, const GlobalOptions& g, std::ostream& log) {
  Reader r(config, "recover-gauge");
  const auto b_file = r.require<std::string>("connection");
  const int probes = r.get<int>("probe_samples", 64);
  const int heldout = r.get<int>("heldout", 100);
  const int tube_points = r.get<int>("tube_points", 20);
  const double tol = r.get<double>("tolerance", 1e-4);
  ExtensionOp op;
  op.clamp_radius = r.get<double>("clamp_radius", g.epsilon);
  const int grid = r.get<int>("grid", 5);
  r.finish();
  if (probes < 1 || heldout < 1 || tube_points < 1 || grid < 2) {
    throw Error(ErrorCode::InvalidConfig, "sample counts must be positive (grid >= 2)");
  }
  positive(tol, "tolerance");

  const AnyConnection bconn = load_connection(b_file);
  const OneForm& b = as_one_form(bconn);
  const DiamondConfig dcfg{g.epsilon};
  const TransportOptions opts{steps_or(g, 128), false};
  // Scattering of rho(B) = B <| g with g(q) = P^B_{q <- z_q}.
  const LightRayGauge gb(b, opts);
  const ScatteringOracle sb = [&](const BrokenPath& p) { return scattering(b, p, opts); };
  const ScatteringOracle sa = [&](const BrokenPath& p) -> Mat {
    return gb.value(p.z.vec()).inverse() * scattering(b, p, opts) * gb.value(p.x.vec());
  };
  const RhoConnection a(b, opts);

  RandomStream rng(g.seed, 17);
  RecoveredGauge rec;
  try {
    rec = recover_gauge(b.n(), sa, sb, dcfg, op, rng, probes);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InconsistentData || e.code() == ErrorCode::PreconditionViolated) {
      log << e.what() << '\n';
      return kExitCheckFailure;
    }
    throw;
  }
  const GaugeField& phi = *rec.phi;

  double held = 0.0;
  RandomStream hrng = rng.split(1);
  for (int i = 0; i < heldout; ++i) {
    const BrokenPath p = sample_broken_path(dcfg, hrng);
    const Mat s = phi.value(p.z.vec()).inverse() * sa(p) * phi.value(p.x.vec());
    held = std::max(held, (s - sb(p)).norm());
  }
  double tube_sup = 0.0;
  RandomStream trng = rng.split(2);
  for (int i = 0; i < tube_points; ++i) {
    const Event q = sample_tube(dcfg, trng);
    if (q.radius() < 1e-6) continue;
    for (int k = 0; k < 4; ++k) {
      const Vec4 v = Vec4::Unit(k);
      tube_sup = std::max(tube_sup, (gauge_act(a, phi, q.vec(), v) - b.eval(q.vec(), v)).norm());
    }
  }

  std::vector<Event> events;
  for (int i = 0; i < grid; ++i) {
    const double t = -0.9 + 1.8 * i / (grid - 1);
    for (int j = 0; j < grid; ++j) {
      const double rad = 0.9 * g.epsilon * j / (grid - 1);
      if (std::abs(t) + rad < 1.0) events.emplace_back(t, rad, 0.0, 0.0);
    }
  }
  write_text_file(out_path(g, "phi_grid.json"), gauge_grid_to_json(phi, events).dump(2) + "\n");
  const bool ok = held < tol && tube_sup < tol;
  const Json diag = {{"max_disagreement", rec.diagnostics.max_disagreement},
                     {"overlap_samples", rec.diagnostics.overlap_samples},
                     {"axis_deviation", rec.diagnostics.axis_deviation},
                     {"heldout_paths", heldout},
                     {"heldout_max_frobenius", held},
                     {"tube_sup", tube_sup},
                     {"tolerance", tol},
                     {"pass", ok}};
  write_text_file(out_path(g, "recover_diagnostics.json"), diag.dump(2) + "\n");
  log << "held-out " << fmt_double(held) << ", tube " << fmt_double(tube_sup) << '\n';
  return ok ? kExitPass : kExitCheckFailure;
}

int cmd_stability(const Json& config, const GlobalOptions& g, std::ostream& log) {
  Reader r(config, "stability");
  const int pairs = r.get<int>("pairs", 5);
  const int n_x = r.get<int>("n_x", 200);
  const int n_y = r.get<int>("n_y", 200);
  const double coeff_norm = r.get<double>("coeff_norm", 1.0);
  const int per_axis = r.get<int>("basis_per_axis", 2);
  const auto which = r.get<std::vector<std::string>>("estimates", {"in", "out"});
  r.finish();
  if (pairs < 1 || n_x < 1 || n_y < 1 || per_axis < 1) throw Error(ErrorCode::InvalidConfig, "counts must be positive");
  positive(coeff_norm, "coeff_norm");
  for (const auto& w : which) {
    if (w != "in" && w != "out" && w != "h1") throw Error(ErrorCode::InvalidConfig, "unknown estimate '" + w + "'");
  }
  const DiamondConfig dcfg{g.epsilon};
  StabilityOptions so;
  so.transport.steps = steps_or(g, so.transport.steps);
  so.fd.h = g.fd_step;
  const CosineBasis basis(per_axis);

  std::vector<std::vector<EstimateReport>> per(pairs);
  parallel_for(pairs, g.threads, [&](int i) {
    RandomStream rng = RandomStream(g.seed, 19).split(static_cast<std::uint64_t>(i));
    const ConnectionField a = random_connection(g.n, basis, rng, coeff_norm);
    const ConnectionField b = random_connection(g.n, basis, rng, coeff_norm);
    for (const auto& w : which) {
      EstimateReport rep;
      if (w == "in") {
        rep = estimate_in(a, b, dcfg, n_x, n_y, rng, so);
      } else if (w == "out") {
        rep = estimate_out(a, b, dcfg, n_y, 1, rng, so).integrated;
      } else {
        rep = h1_estimate(a, b, dcfg, H1Sizes{n_y, 9}, rng, so);
      }
      rep.seed = g.seed;
      per[i].push_back(rep);
    }
  });
  std::ostringstream os;
  os << estimate_csv_header() << '\n';
  for (const auto& reps : per)
    for (const auto& rep : reps) os << to_csv_row(rep) << '\n';
  write_text_file(out_path(g, "stability.csv"), os.str());
  log << "wrote " << pairs * which.size() << " estimate rows\n";
  return kExitPass;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Broken non-abelian X-ray transform on the causal diamond"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--out", out_dir, "output directory");
  using Command = int (*)(const Json&, const GlobalOptions&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"verify", "run the identity suite", cmd_verify},
      {"forward", "scattering data of a connection", cmd_forward},
      {"synth", "synthesise a noisy dataset", cmd_synth},
      {"invert", "pCN posterior sampling", cmd_invert},
      {"report", "aggregate posterior summaries", cmd_report},
      {"recover-gauge", "recover the gauge from scattering data", cmd_recover_gauge},
      {"stability", "stability estimate reports", cmd_stability},
  };
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitUsage;
  }
  try {
    Json config = config_path.empty() ? Json::object() : read_json_file(config_path);
    const GlobalOptions g = global_options(config, seed, threads, out_dir);
    for (const auto& [name, help, fn] : commands) {
      if (app.got_subcommand(name)) return fn(config, g, out);
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    const bool usage = e.code() == ErrorCode::InvalidConfig || e.code() == ErrorCode::ParseError;
    return usage ? kExitUsage : kExitCheckFailure;
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kExitCheckFailure;
  }
  return kExitUsage;
}

}  // namespace bxr::cli
