#include "bxr/lightsink.hpp"

#include <cmath>

#include "bxr/error.hpp"

namespace bxr {

namespace {

constexpr double kAxisOffset = 1e-8;

struct RayFrame {
  Event z;
  Segment seg;
  Vec3 xhat;
};

RayFrame ray_frame(const Event& p, double tol) {
  const double r = p.radius();
  if (r < tol) throw Error(ErrorCode::AxisPoint, "light-ray gauge on the axis");
  const Event z(p.t + r, 0.0, 0.0, 0.0);
  return {z, Segment(z, p), p.x / r};
}

// Moving p along v moves z_p along (v_t + xhat . v_x) e_t.
Vec4 axis_motion(const Vec3& xhat, const Vec4& v) {
  return Vec4(v[0] + xhat.dot(v.tail<3>()), 0.0, 0.0, 0.0);
}

std::array<Mat, 4> ray_differentials(const OneForm& a, const RayFrame& f,
                                     const TransportOptions& opts) {
  std::vector<std::pair<Vec4, Vec4>> vars;
  for (int mu = 0; mu < 4; ++mu) vars.emplace_back(axis_motion(f.xhat, Vec4::Unit(mu)), Vec4::Unit(mu));
  const std::vector<Mat> d = transport_derivatives(a, f.seg, vars, opts);
  return {d[0], d[1], d[2], d[3]};
}

}  // namespace

std::array<Mat, 4> rho_map(const OneForm& a, const Event& p, const TransportOptions& opts,
                           double r_axis_tol) {
  const RayFrame f = ray_frame(p, r_axis_tol);
  const Mat phi = parallel_transport(a, f.seg, opts).u;
  const Mat inv = phi.inverse();
  const std::array<Mat, 4> dphi = ray_differentials(a, f, opts);
  std::array<Mat, 4> out;
  for (int mu = 0; mu < 4; ++mu) {
    out[mu] = inv * dphi[mu] + inv * a.eval(p.vec(), Vec4::Unit(mu)) * phi;
  }
  return out;
}

Mat rho_eval(const OneForm& a, const Event& p, const Vec4& v, const TransportOptions& opts,
             double r_axis_tol) {
  const RayFrame f = ray_frame(p, r_axis_tol);
  const Mat phi = parallel_transport(a, f.seg, opts).u;
  const Mat inv = phi.inverse();
  const Mat dphi = transport_derivative(a, f.seg, axis_motion(f.xhat, v), v, opts);
  return inv * dphi + inv * a.eval(p.vec(), v) * phi;
}

Mat RhoConnection::eval(const Vec4& p, const Vec4& v, const Vec3* approach) const {
  if (p.tail<3>().norm() < 1e-9) {
    if (approach == nullptr) throw Error(ErrorCode::AxisUndefined, "rho on the axis");
    Vec4 q = p;
    q.tail<3>() += kAxisOffset * approach->normalized();
    return rho_eval(a_, Event(q), v, opts_);
  }
  return rho_eval(a_, Event(p), v, opts_);
}

Mat LightRayGauge::value(const Vec4& p) const {
  if (p.tail<3>().norm() < 1e-9) return identity(n());
  const RayFrame f = ray_frame(Event(p), 1e-9);
  return parallel_transport(a_, f.seg, opts_).u;
}

Mat LightRayGauge::differential(const Vec4& p, const Vec4& v) const {
  const RayFrame f = ray_frame(Event(p), 1e-9);
  return transport_derivative(a_, f.seg, axis_motion(f.xhat, v), v, opts_);
}

Mat DeltaEvaluator::form(const Event& y, const Vec4& v) const {
  return a_.eval(y.vec(), v) - b_.eval(y.vec(), v) - covariant_dp(a_, b_, y, v, opts_, h_);
}

std::array<Mat, 4> DeltaEvaluator::map(const Event& y) const {
  if (y.radius() < 1e-9) throw Error(ErrorCode::AxisPoint, "Delta on the axis");
  const Mat p = potential_p(a_, b_, y, opts_);
  std::array<Mat, 4> out;
  for (int mu = 0; mu < 4; ++mu) {
    const Vec4 e = Vec4::Unit(mu);
    const Mat dp = (potential_p(a_, b_, y + h_ * e, opts_) - potential_p(a_, b_, y + (-h_) * e, opts_)) /
                   (2.0 * h_);
    const Mat am = a_.eval(y.vec(), e), bm = b_.eval(y.vec(), e);
    out[mu] = am - bm - (dp + am * p - p * bm);
  }
  return out;
}

double operator_norm_design(const std::array<Mat, 4>& images) {
  const Eigen::MatrixXd m = stack_images(std::vector<Mat>(images.begin(), images.end()));
  const Eigen::Matrix4d g = m.transpose() * m;
  // Vertices of the 24-cell.
  std::vector<Vec4> design;
  for (int i = 0; i < 4; ++i) {
    design.push_back(Vec4::Unit(i));
    design.push_back(-Vec4::Unit(i));
  }
  for (int s = 0; s < 16; ++s) {
    Vec4 v;
    for (int i = 0; i < 4; ++i) v[i] = (s >> i) & 1 ? -0.5 : 0.5;
    design.push_back(v);
  }
  Vec4 best = design.front();
  double best_val = -1.0;
  for (const auto& v : design) {
    const double val = v.dot(g * v);
    if (val > best_val) {
      best_val = val;
      best = v;
    }
  }
  if (best_val <= 0.0) return 0.0;
  Vec4 x = best;
  double lambda = best_val;
  for (int it = 0; it < 500; ++it) {
    const Vec4 y = g * x;
    const double norm = y.norm();
    if (norm == 0.0) break;
    x = y / norm;
    const double next = x.dot(g * x);
    const bool done = std::abs(next - lambda) <= 1e-15 * std::max(1.0, next);
    lambda = std::max(lambda, next);
    if (done) break;
  }
  return std::sqrt(lambda);
}

double delta_norm(const OneForm& a, const OneForm& b, const Event& y,
                  const TransportOptions& opts) {
  return operator_norm_design(DeltaEvaluator(a, b, opts).map(y));
}

double rho_distance(const OneForm& a, const OneForm& b, const Event& y,
                    const TransportOptions& opts) {
  const auto ra = rho_map(a, y, opts);
  const auto rb = rho_map(b, y, opts);
  std::array<Mat, 4> d;
  for (int mu = 0; mu < 4; ++mu) d[mu] = ra[mu] - rb[mu];
  return operator_norm_design(d);
}

std::array<double, 3> delta_covariance_check(const OneForm& a, const OneForm& b, const GaugeField& phi,
                                        const GaugeField& psi, const Event& y, const Vec4& v,
                                        const TransportOptions& opts) {
  const Mat dab = DeltaEvaluator(a, b, opts).form(y, v);
  const Mat dba = DeltaEvaluator(b, a, opts).form(y, v);
  const GaugedConnection aphi(a, phi), bpsi(b, psi);
  const Mat u = phi.value(y.vec()), w = psi.value(y.vec());
  const Mat left = DeltaEvaluator(aphi, b, opts).form(y, v);
  const Mat both = DeltaEvaluator(aphi, bpsi, opts).form(y, v);
  return {(dab.transpose() - dba).norm(), (left - u.inverse() * dab).norm(),
          (both - u.inverse() * dab * w).norm()};
}

// Extension

ExtendedGauge::ExtendedGauge(const GaugeField& tube_data, ExtensionOp op)
    : data_(tube_data), op_(op) {
  if (!(op.clamp_radius > 0.0 && op.clamp_radius < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "clamp radius must lie in (0, 1)");
  }
}

Vec4 ExtendedGauge::clamp(const Vec4& p) const {
  Vec4 q = p;
  const double r = p.tail<3>().norm();
  const double rc = std::min(r, op_.clamp_radius);
  if (r > rc) q.tail<3>() *= rc / r;
  const double tmax = 1.0 - rc;
  q[0] = std::clamp(q[0], -tmax, tmax);
  return q;
}

Mat ExtendedGauge::value(const Vec4& p) const { return polar_project(data_.value(clamp(p))); }

ExtendedGauge extend(const GaugeField& tube_data, const ExtensionOp& op) {
  const double dev = axis_deviation(tube_data);
  if (dev > op.axis_tolerance) {
    throw Error(ErrorCode::PreconditionViolated,
                "gauge data differs from the identity on the axis by " + std::to_string(dev));
  }
  return ExtendedGauge(tube_data, op);
}

// Stitched tube data

StitchedTubeGauge::StitchedTubeGauge(int n, ScatteringOracle sa, ScatteringOracle sb,
                                     DiamondConfig cfg, double tolerance)
    : n_(n), sa_(std::move(sa)), sb_(std::move(sb)), cfg_(cfg), tolerance_(tolerance),
      ray_radius_(1.2 * cfg.epsilon) {}

std::optional<Event> StitchedTubeGauge::break_point(const Event& q, Fiber side) const {
  static const std::array<Vec3, 6> dirs = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0),
                                           Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
  constexpr double margin = 1e-9;
  for (const auto& d : dirs) {
    const Vec3 yx = ray_radius_ * d;
    const double s = (yx - q.x).norm();
    if (side == Fiber::FX) {
      const Event y(q.t + s, yx);
      if (in_open_diamond(y) && y.t + ray_radius_ < 1.0 - margin) return y;
    } else {
      const Event y(q.t - s, yx);
      if (in_open_diamond(y) && y.t - ray_radius_ > -1.0 + margin) return y;
    }
  }
  return std::nullopt;
}

StitchedTubeGauge::Pieces StitchedTubeGauge::pieces(const Vec4& qv) const {
  const Event q(qv);
  Pieces out;
  if (const auto y = break_point(q, Fiber::FX)) {
    const BrokenPath path{q, *y, determined_endpoints(*y, cfg_).z_y, PathKind::future_determined};
    out.from_x = sa_(path).inverse() * sb_(path);
  }
  if (const auto y = break_point(q, Fiber::FZ)) {
    const BrokenPath path{determined_endpoints(*y, cfg_).x_y, *y, q, PathKind::past_determined};
    out.from_z = sa_(path) * sb_(path).inverse();
  }
  return out;
}

Mat StitchedTubeGauge::value(const Vec4& p) const {
  const Pieces pc = pieces(p);
  if (pc.from_x && pc.from_z) {
    const double gap = (*pc.from_x - *pc.from_z).norm();
    max_disagreement_ = std::max(max_disagreement_, gap);
    if (gap > tolerance_) {
      throw Error(ErrorCode::InconsistentData,
                  "stitched pieces disagree by " + std::to_string(gap));
    }
    return polar_project(0.5 * (*pc.from_x + *pc.from_z));
  }
  if (pc.from_x) return *pc.from_x;
  if (pc.from_z) return *pc.from_z;
  throw Error(ErrorCode::PreconditionViolated, "no admissible ray through this tube point");
}

RecoveredGauge recover_gauge(int n, ScatteringOracle sa, ScatteringOracle sb,
                             const DiamondConfig& cfg, const ExtensionOp& op, RandomStream& rng,
                             int probe_samples) {
  RecoveredGauge out;
  out.data = std::make_unique<StitchedTubeGauge>(n, std::move(sa), std::move(sb), cfg);
  int probed = 0;
  for (int attempt = 0; probed < probe_samples && attempt < 100 * probe_samples; ++attempt) {
    const Event q = sample_tube(cfg, rng);
    const auto pc = out.data->pieces(q.vec());
    if (!pc.from_x || !pc.from_z) continue;
    const double gap = (*pc.from_x - *pc.from_z).norm();
    out.diagnostics.max_disagreement = std::max(out.diagnostics.max_disagreement, gap);
    ++probed;
  }
  out.diagnostics.overlap_samples = probed;
  if (out.diagnostics.max_disagreement > out.data->tolerance()) {
    throw Error(ErrorCode::InconsistentData,
                "stitched pieces disagree by " + std::to_string(out.diagnostics.max_disagreement));
  }
  out.diagnostics.axis_deviation = axis_deviation(*out.data);
  out.phi = std::make_unique<ExtendedGauge>(extend(*out.data, op));
  return out;
}

LightSinkFit fit_lightsink(const OneForm& form, const CosineBasis& basis, int samples,
                           RandomStream& rng) {
  const int n = form.n();
  const int so = so_dim(n);
  const int m = basis.size();
  Eigen::MatrixXd design(samples, m);
  Eigen::MatrixXd rhs(samples, 3 * so);
  std::vector<double> vals(m);
  for (int s = 0; s < samples; ++s) {
    Event p;
    do {
      p = Event(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (!in_open_diamond(p) || p.radius() < 1e-3);
    basis.eval_all(p.vec(), vals);
    for (int j = 0; j < m; ++j) design(s, j) = vals[j];
    for (int i = 0; i < 3; ++i) {
      rhs.block(s, i * so, 1, so) = so_coords(form.eval(p.vec(), Vec4::Unit(i + 1))).transpose();
    }
  }
  const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(rhs);
  LightSinkField field(n, basis);
  for (int i = 0; i < 3; ++i) field.coords(i) = coef.block(0, i * so, m, so);
  const double denom = rhs.norm();
  const double resid = (design * coef - rhs).norm();
  return {std::move(field), denom > 0.0 ? resid / denom : resid};
}

}  // namespace bxr
