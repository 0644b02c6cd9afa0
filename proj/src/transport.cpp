#include "bxr/transport.hpp"

#include <cmath>

#include "bxr/error.hpp"

namespace bxr {

namespace {

constexpr double kAxisTol = 1e-9;

int checked_steps(const TransportOptions& opts) {
  if (opts.steps < 1) throw Error(ErrorCode::InvalidConfig, "transport needs at least one step");
  return opts.steps;
}

// Evaluation context for a straight segment: the form is sampled at the
// half-step nodes s_k = k h / 2, k = 0..2*steps.
struct Grid {
  Vec4 a;
  Vec4 tau;
  double length;
  double h;
  int steps;
  bool has_direction;
  Vec3 xdir;

  Grid(const Segment& seg, int steps_)
      : a(seg.a.vec()), tau(seg.tangent()), length(seg.length()), h(length / steps_),
        steps(steps_) {
    const Vec3 tx = tau.tail<3>();
    has_direction = tx.norm() > 1e-14;
    xdir = has_direction ? Vec3(tx.normalized()) : Vec3::Zero();
  }

  Vec4 point(int k) const { return a + (0.5 * h * k) * tau; }

  Mat eval(const OneForm& f, int k, const Vec4& v) const {
    const double s = 0.5 * h * k;
    if (has_direction) {
      const Vec3 ap = s < 0.5 * length ? xdir : Vec3(-xdir);
      return f.eval(point(k), v, &ap);
    }
    return f.eval(point(k), v);
  }

  std::vector<Mat> sample(const OneForm& f) const {
    std::vector<Mat> out(2 * steps + 1);
    for (int k = 0; k <= 2 * steps; ++k) out[k] = eval(f, k, tau);
    return out;
  }
};

void check_finite(const Mat& u) {
  if (!u.allFinite()) throw Error(ErrorCode::NonFiniteState, "non-finite transport state");
}

// One RK4 step of U' = -M U with node values m0, mh, m1.
Mat rk4_step(const Mat& u, const Mat& m0, const Mat& mh, const Mat& m1, double h) {
  const Mat k1 = -m0 * u;
  const Mat k2 = -mh * (u + 0.5 * h * k1);
  const Mat k3 = -mh * (u + 0.5 * h * k2);
  const Mat k4 = -m1 * (u + h * k3);
  return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<Mat> integrate(const std::vector<Mat>& m, int n, int steps, double h, bool reproject) {
  std::vector<Mat> traj(steps + 1);
  traj[0] = identity(n);
  for (int k = 0; k < steps; ++k) {
    Mat u = rk4_step(traj[k], m[2 * k], m[2 * k + 1], m[2 * k + 2], h);
    check_finite(u);
    if (reproject) u = polar_project(u);
    traj[k + 1] = u;
  }
  return traj;
}

// u' + A u - u B = -W, u(0) = 0, integrated jointly with U_A and U_B.
struct InhomogeneousResult {
  Mat pa, pb, u;
};

InhomogeneousResult integrate_inhomogeneous(const std::vector<Mat>& ma, const std::vector<Mat>* mb,
                                            const std::vector<Mat>& w, int n, int steps, double h) {
  Mat pa = identity(n), pb = identity(n), u = zeros(n);
  auto rhs = [&](const Mat& pa_, const Mat& pb_, const Mat& u_, int k, Mat& dpa, Mat& dpb, Mat& du) {
    dpa = -ma[k] * pa_;
    if (mb) {
      dpb = -(*mb)[k] * pb_;
      du = -ma[k] * u_ + u_ * (*mb)[k] - w[k];
    } else {
      dpb = zeros(n);
      du = -ma[k] * u_ - w[k];
    }
  };
  for (int s = 0; s < steps; ++s) {
    Mat a1, b1, c1, a2, b2, c2, a3, b3, c3, a4, b4, c4;
    rhs(pa, pb, u, 2 * s, a1, b1, c1);
    rhs(pa + 0.5 * h * a1, pb + 0.5 * h * b1, u + 0.5 * h * c1, 2 * s + 1, a2, b2, c2);
    rhs(pa + 0.5 * h * a2, pb + 0.5 * h * b2, u + 0.5 * h * c2, 2 * s + 1, a3, b3, c3);
    rhs(pa + h * a3, pb + h * b3, u + h * c3, 2 * s + 2, a4, b4, c4);
    pa += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    pb += (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    u += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    check_finite(u);
    check_finite(pa);
  }
  return {pa, pb, u};
}

}  // namespace

Segment::Segment(const Event& a_, const Event& b_) : a(a_), b(b_) {
  if ((b.vec() - a.vec()).norm() < 1e-12) {
    throw Error(ErrorCode::DegenerateSegment, "segment endpoints coincide");
  }
}

double Segment::length() const { return (b.vec() - a.vec()).norm(); }

Vec4 Segment::tangent() const { return (b.vec() - a.vec()) / length(); }

Vec3 approach_direction(const Vec4& tangent, double s, double length) {
  const Vec3 tx = tangent.tail<3>();
  if (tx.norm() < 1e-14) throw Error(ErrorCode::AxisUndefined, "segment runs along the axis");
  return s < 0.5 * length ? Vec3(tx.normalized()) : Vec3(-tx.normalized());
}

TransportTrajectory transport_trajectory(const OneForm& a, const Segment& seg,
                                         const TransportOptions& opts) {
  const Grid g(seg, checked_steps(opts));
  TransportTrajectory out;
  out.u = integrate(g.sample(a), a.n(), g.steps, g.h, opts.reproject);
  out.length = g.length;
  out.h = g.h;
  out.tangent = g.tau;
  return out;
}

TransportResult parallel_transport(const OneForm& a, const Segment& seg,
                                   const TransportOptions& opts) {
  const Grid g(seg, checked_steps(opts));
  const std::vector<Mat> m = g.sample(a);
  Mat u = identity(a.n());
  for (int k = 0; k < g.steps; ++k) {
    u = rk4_step(u, m[2 * k], m[2 * k + 1], m[2 * k + 2], g.h);
    check_finite(u);
    if (opts.reproject) u = polar_project(u);
  }
  return {u, orthogonality_drift(u), g.steps};
}

ScatteringResult scattering_with_drift(const OneForm& a, const BrokenPath& path,
                                       const TransportOptions& opts) {
  const Mat p1 = parallel_transport(a, Segment(path.x, path.y), opts).u;
  const Mat p2 = parallel_transport(a, Segment(path.y, path.z), opts).u;
  const Mat s = p2 * p1;
  return {s, orthogonality_drift(s)};
}

Mat scattering(const OneForm& a, const BrokenPath& path, const TransportOptions& opts) {
  return scattering_with_drift(a, path, opts).s;
}

Mat attenuated_xray(const OneForm& a, const OneForm& omega, const Segment& seg,
                    const TransportOptions& opts) {
  const Grid g(seg, checked_steps(opts));
  const auto r = integrate_inhomogeneous(g.sample(a), nullptr, g.sample(omega), a.n(), g.steps, g.h);
  return -r.pa.inverse() * r.u;
}

Mat attenuated_xray(const EndoConnection& e, const OneForm& omega, const Segment& seg,
                    const TransportOptions& opts) {
  const Grid g(seg, checked_steps(opts));
  const std::vector<Mat> mb = g.sample(e.b);
  const auto r = integrate_inhomogeneous(g.sample(e.a), &mb, g.sample(omega), e.a.n(), g.steps, g.h);
  // (P^E)^-1 Q = (P^A)^-1 Q P^B
  return -r.pa.inverse() * r.u * r.pb;
}

Mat broken_xray(const OneForm& a, const OneForm& omega, const BrokenPath& path,
                const TransportOptions& opts) {
  const Segment first(path.x, path.y), second(path.y, path.z);
  const Mat back = parallel_transport(a, first, opts).u.inverse();
  return attenuated_xray(a, omega, first, opts) + back * attenuated_xray(a, omega, second, opts);
}

Mat broken_xray(const EndoConnection& e, const OneForm& omega, const BrokenPath& path,
                const TransportOptions& opts) {
  const Segment first(path.x, path.y), second(path.y, path.z);
  const EndoTransport pe = endo_transport(e, first, opts);
  return attenuated_xray(e, omega, first, opts) +
         pe.apply_inverse(attenuated_xray(e, omega, second, opts));
}

Mat EndoTransport::apply(const Mat& q) const { return pa * q * pb.inverse(); }

Mat EndoTransport::apply_inverse(const Mat& q) const { return pa.inverse() * q * pb; }

Eigen::MatrixXd EndoTransport::matrix() const {
  const int n = static_cast<int>(pa.rows());
  const Eigen::MatrixXd left = pa;
  const Eigen::MatrixXd right = pb.inverse().transpose();
  Eigen::MatrixXd out(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.block(i * n, j * n, n, n) = right(i, j) * left;
  return out;
}

EndoTransport endo_transport(const EndoConnection& e, const Segment& seg,
                             const TransportOptions& opts) {
  return {parallel_transport(e.a, seg, opts).u, parallel_transport(e.b, seg, opts).u};
}

Mat potential_p(const OneForm& a, const OneForm& b, const Event& y, const TransportOptions& opts) {
  if (y.radius() < kAxisTol) return zeros(a.n());
  const Event z = determined_endpoints(y).z_y;
  const Mat pa = parallel_transport(a, Segment(z, y), opts).u;
  const Mat pb = parallel_transport(b, Segment(y, z), opts).u;
  return identity(a.n()) - pa * pb;
}

Mat potential_p_integral(const OneForm& a, const OneForm& b, const Event& y,
                         const TransportOptions& opts) {
  if (y.radius() < kAxisTol) return zeros(a.n());
  const Event z = determined_endpoints(y).z_y;
  const Segment seg(z, y);
  const EndoConnection e{a, b};
  const DifferenceForm diff(a, b);
  return endo_transport(e, seg, opts).apply(attenuated_xray(e, diff, seg, opts));
}

Mat covariant_dp(const OneForm& a, const OneForm& b, const Event& y, const Vec4& v,
                 const TransportOptions& opts, double h) {
  const Mat dp = (potential_p(a, b, y + h * v, opts) - potential_p(a, b, y + (-h) * v, opts)) / (2.0 * h);
  const Mat p = potential_p(a, b, y, opts);
  return dp + a.eval(y.vec(), v) * p - p * b.eval(y.vec(), v);
}

double pseudolin_residual(const OneForm& a, const OneForm& b, const BrokenPath& path,
                          const TransportOptions& opts) {
  const Mat sa = scattering(a, path, opts);
  const Mat sb = scattering(b, path, opts);
  const DifferenceForm diff(a, b);
  const Mat rhs = broken_xray(EndoConnection{a, b}, diff, path, opts);
  return (sa.inverse() * sb - identity(a.n()) - rhs).norm();
}

std::vector<Mat> transport_derivatives(const OneForm& a, const Segment& seg,
                                       const std::vector<std::pair<Vec4, Vec4>>& variations,
                                       const TransportOptions& opts) {
  int steps = checked_steps(opts);
  if (steps % 2 == 1) steps *= 2;
  const Grid g(seg, steps);
  const std::vector<Mat> u = integrate(g.sample(a), a.n(), g.steps, g.h, opts.reproject);
  const Mat& p = u.back();  // P_{T<-t} = P U_t^-1
  const int m = g.steps;
  const std::size_t nv = variations.size();

  // Curvature against the coordinate directions is computed once per node
  // when several variations share the grid.
  const bool by_basis = nv > 1;
  std::vector<std::vector<Mat>> f(nv, std::vector<Mat>(m + 1));
  std::vector<bool> skip(m + 1, false);
  for (int k = 0; k <= m; ++k) {
    const Vec4 pt = g.point(2 * k);
    if (a.axis_singular() && pt.tail<3>().norm() < kAxisTol) {
      skip[k] = true;
      continue;
    }
    const double frac = static_cast<double>(k) / m;
    const Mat uinv = u[k].inverse();
    if (by_basis) {
      std::array<Mat, 4> fb;
      for (int mu = 0; mu < 4; ++mu) fb[mu] = curvature(a, pt, g.tau, Vec4::Unit(mu));
      for (std::size_t i = 0; i < nv; ++i) {
        const Vec4 ds = variations[i].first + frac * (variations[i].second - variations[i].first);
        Mat c = zeros(a.n());
        for (int mu = 0; mu < 4; ++mu) c += ds[mu] * fb[mu];
        f[i][k] = uinv * c * u[k];
      }
    } else {
      const Vec4 ds = variations[0].first + frac * (variations[0].second - variations[0].first);
      f[0][k] = uinv * curvature(a, pt, g.tau, ds) * u[k];
    }
  }

  std::vector<Mat> out(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    auto& fi = f[i];
    // Quadratic extrapolation at axis endpoints.
    if (skip[0]) fi[0] = 3.0 * fi[1] - 3.0 * fi[2] + fi[3];
    if (skip[m]) fi[m] = 3.0 * fi[m - 1] - 3.0 * fi[m - 2] + fi[m - 3];
    Mat integral = zeros(a.n());
    for (int k = 0; k <= m; ++k) {
      const double w = (k == 0 || k == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      integral += w * fi[k];
    }
    out[i] = p * g.eval(a, 0, variations[i].first) - g.eval(a, 2 * m, variations[i].second) * p +
             p * (g.h / 3.0) * integral;
  }
  return out;
}

Mat transport_derivative(const OneForm& a, const Segment& seg, const Vec4& v1, const Vec4& v2,
                         const TransportOptions& opts) {
  return transport_derivatives(a, seg, {{v1, v2}}, opts).front();
}

}  // namespace bxr
