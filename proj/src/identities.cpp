#include "bxr/identities.hpp"

#include <cmath>
#include <sstream>

#include "bxr/io.hpp"
#include "bxr/lightsink.hpp"
#include "bxr/parallel.hpp"
#include "bxr/stability.hpp"

namespace bxr {

namespace {

Mat random_matrix(int n, RandomStream& rng) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
  return m;
}

Mat random_skew(int n, RandomStream& rng, double scale) {
  std::vector<double> c(so_dim(n));
  for (double& v : c) v = scale * rng.normal();
  return so_from_coords(n, c.data());
}

// F(p) = M0 + sin(k.p) M1 + (t x1 + x2^2) M2, with its differential.
struct MatrixFunction {
  Mat m0, m1, m2;
  Vec4 k;

  Mat value(const Vec4& p) const {
    return m0 + std::sin(k.dot(p)) * m1 + (p[0] * p[1] + p[2] * p[2]) * m2;
  }
  Mat differential(const Vec4& p, const Vec4& v) const {
    return std::cos(k.dot(p)) * k.dot(v) * m1 + (v[0] * p[1] + p[0] * v[1] + 2.0 * p[2] * v[2]) * m2;
  }
};

MatrixFunction random_function(int n, RandomStream& rng) {
  MatrixFunction f{random_matrix(n, rng), random_matrix(n, rng), random_matrix(n, rng), Vec4::Zero()};
  for (int i = 0; i < 4; ++i) f.k[i] = rng.uniform(-2.0, 2.0);
  return f;
}

// d_A F = dF + A F.
class CovariantDifferential final : public OneForm {
 public:
  CovariantDifferential(const OneForm& a, const MatrixFunction& f) : a_(a), f_(f) {}
  int n() const override { return a_.n(); }
  Mat eval(const Vec4& p, const Vec4& v, const Vec3* approach = nullptr) const override {
    return f_.differential(p, v) + a_.eval(p, v, approach) * f_.value(p);
  }

 private:
  const OneForm& a_;
  const MatrixFunction& f_;
};

// omega - d_{E(A,B)} p_(A,B) with omega = A - B.
class PotentialResidualForm final : public OneForm {
 public:
  PotentialResidualForm(const OneForm& a, const OneForm& b, TransportOptions opts)
      : a_(a), b_(b), opts_(opts) {}
  int n() const override { return a_.n(); }
  Mat eval(const Vec4& p, const Vec4& v, const Vec3* = nullptr) const override {
    return a_.eval(p, v) - b_.eval(p, v) - covariant_dp(a_, b_, Event(p), v, opts_);
  }

 private:
  const OneForm& a_;
  const OneForm& b_;
  TransportOptions opts_;
};

// exp(f1 X1) exp(f2 X2) with f_i bump fields vanishing on the tube.
std::unique_ptr<ExpProductGauge> tube_trivial_gauge(int n, double epsilon, RandomStream& rng) {
  std::vector<ExpProductGauge::Factor> factors;
  for (int k = 0; k < 2; ++k) {
    Vec4 tilt;
    for (int i = 0; i < 4; ++i) tilt[i] = rng.uniform(-0.5, 0.5);
    auto field = std::make_shared<RadialBumpField>(epsilon, rng.uniform(1.0, 3.0), 0.2, tilt);
    factors.push_back({random_skew(n, rng, 1.0), field});
  }
  return std::make_unique<ExpProductGauge>(n, std::move(factors));
}

// exp(f1 X1) exp(f2 X2) with polynomial f_i vanishing on the axis.
std::unique_ptr<ExpProductGauge> axis_trivial_gauge(int n, RandomStream& rng) {
  std::vector<ExpProductGauge::Factor> factors;
  for (int k = 0; k < 2; ++k) {
    std::vector<PolynomialField::Term> terms = {
        {rng.uniform(-1.0, 1.0), {0, 1, 0, 0}},
        {rng.uniform(-1.0, 1.0), {1, 0, 1, 0}},
        {rng.uniform(-1.0, 1.0), {0, 0, 0, 2}},
        {rng.uniform(-1.0, 1.0), {2, 0, 0, 1}},
    };
    factors.push_back({random_skew(n, rng, 1.0), std::make_shared<PolynomialField>(std::move(terms))});
  }
  return std::make_unique<ExpProductGauge>(n, std::move(factors));
}

// Simpson quadrature of int_0^T U(s)^-1 omega(gamma') ds on the transport grid.
Mat quadrature_xray(const OneForm& a, const OneForm& omega, const Segment& seg,
                    const TransportOptions& opts) {
  TransportOptions even = opts;
  if (even.steps % 2) even.steps *= 2;
  const TransportTrajectory traj = transport_trajectory(a, seg, even);
  const int m = static_cast<int>(traj.u.size()) - 1;
  Mat sum = zeros(a.n());
  for (int k = 0; k <= m; ++k) {
    const Vec4 p = seg.a.vec() + (k * traj.h) * traj.tangent;
    const double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    sum += w * traj.u[k].inverse() * omega.eval(p, traj.tangent);
  }
  return sum * (traj.h / 3.0);
}

Event midpoint(const Event& a, const Event& b) { return Event(0.5 * (a.vec() + b.vec())); }

struct Row {
  const char* name;
  const char* anchor;
  double tolerance;
};

// Order of the per-pair residual vector.
const Row kTransportRows[] = {
    {"pseudolinearisation_segment", "(P^A)^-1 P^B - Id = I^{E(A,B)}(A - B)", 1e-6},
    {"pseudolinearisation_broken", "(S^A)^-1 S^B - Id = I^{E(A,B)}_{z<-y<-x}(A - B)", 1e-6},
    {"dAf", "I^A(d_A f) = (P^A)^-1 f(gamma(T)) - f(gamma(0))", 1e-7},
    {"broken_dAf", "I^A_{z<-y<-x}(d_A f) = P^A_{x<-y} P^A_{y<-z} f(z) - f(x)", 1e-7},
    {"u_T", "u(T) = P^A (u0 - I^A(omega))", 1e-8},
    {"differentiate", "d_{y<-x} I^A_{y<-x}(omega) = P^A_{x<-y} omega_y(v_{y<-x})", 1e-6},
    {"gauge_invariance", "S^{A<|phi} = S^A for phi = Id on the tube", 1e-7},
    {"variation", "dP/ds = P A(v1) - A(v2) P + P int U^-1 F_A(gamma', J) U", 1e-5},
    {"composition", "I^A_{z<-y<-x} = I^A_{z<-x} and S^A = P^A_{z<-x} on straight paths", 1e-8},
    {"pseudomho", "|(A - B)_x(v_{x<-y})| = |d_{x<-y}(S^A (S^B)^-1)|", 1e-5},
};
constexpr int kTransportCount = sizeof(kTransportRows) / sizeof(Row);

const Row kPotentialRows[] = {
    {"gammaout", "(A - B)(gamma') = d_{E(A,B)} p(gamma') along y -> z_y", 1e-6},
    {"Ialpha", "I^E_{z_y<-y<-x}(A - B) = I^E_{y<-x}(A - B - d_E p) - p(x)", 1e-6},
};
constexpr int kPotentialCount = sizeof(kPotentialRows) / sizeof(Row);

const Row kLightSinkRows[] = {
    {"theta_adjoint", "Delta(A,B)^T = Delta(B,A)", 1e-5},
    {"theta_left", "Delta(A<|phi, B) = phi^-1 Delta(A,B)", 1e-5},
    {"theta_both", "Delta(A<|phi, B<|psi) = phi^-1 Delta(A,B) psi", 1e-5},
    {"delta_vs_rho", "|Delta(A,B)_y| = |rho(A)_y - rho(B)_y|", 1e-5},
    {"rho_lightsink", "rho(A)(d_t) = rho(A)(d_r)", 1e-5},
    {"lightsink_fixed", "rho(L) = L for light-sink L", 1e-5},
    {"rho_idempotent", "rho(rho(A)) = rho(A)", 1e-5},
};
constexpr int kLightSinkCount = sizeof(kLightSinkRows) / sizeof(Row);

std::vector<IdentityCheck> reduce(const Row* rows, int count,
                                  const std::vector<std::vector<double>>& residuals) {
  std::vector<IdentityCheck> out;
  for (int r = 0; r < count; ++r) {
    double worst = 0.0;
    for (const auto& per : residuals) {
      const double v = per[r];
      worst = std::isfinite(v) ? std::max(worst, v) : INFINITY;
    }
    out.push_back({rows[r].name, rows[r].anchor, worst, rows[r].tolerance, worst < rows[r].tolerance});
  }
  return out;
}

std::vector<double> transport_pair(const IdentityConfig& cfg, int i) {
  const DiamondConfig dcfg{cfg.epsilon};
  const CosineBasis basis(cfg.basis_per_axis);
  const TransportOptions opts{cfg.steps, false};
  RandomStream rng = RandomStream(cfg.seed).split(static_cast<std::uint64_t>(i));
  const ConnectionField a = random_connection(cfg.n, basis, rng, cfg.coeff_norm);
  const ConnectionField b = random_connection(cfg.n, basis, rng, cfg.coeff_norm);
  const DifferenceForm diff(a, b);
  const EndoConnection e{a, b};
  const BrokenPath path = sample_broken_path(dcfg, rng);
  const Segment leg(path.x, path.y);
  std::vector<double> res(kTransportCount);

  {
    const Mat pa = parallel_transport(a, leg, opts).u, pb = parallel_transport(b, leg, opts).u;
    res[0] = (pa.inverse() * pb - identity(cfg.n) - attenuated_xray(e, diff, leg, opts)).norm();
    res[1] = pseudolin_residual(a, b, path, opts);
  }
  {
    const MatrixFunction f = random_function(cfg.n, rng);
    const CovariantDifferential daf(a, f);
    const Mat p = parallel_transport(a, leg, opts).u;
    res[2] = (attenuated_xray(a, daf, leg, opts) - (p.inverse() * f.value(path.y.vec()) - f.value(path.x.vec()))).norm();
    const Mat s = scattering(a, path, opts);
    res[3] = (broken_xray(a, daf, path, opts) - (s.inverse() * f.value(path.z.vec()) - f.value(path.x.vec()))).norm();
  }
  res[4] = (attenuated_xray(a, b, leg, opts) - quadrature_xray(a, b, leg, opts)).norm();
  {
    const double h = cfg.fd_step;
    const Vec4 v = unit_direction(path.x, path.y).v;
    const Segment plus(path.x, path.y + h * v), minus(path.x, path.y + (-h) * v);
    const Mat fd = (attenuated_xray(a, b, plus, opts) - attenuated_xray(a, b, minus, opts)) / (2.0 * h);
    const Mat exact = parallel_transport(a, leg, opts).u.inverse() * b.eval(path.y.vec(), v);
    res[5] = (fd - exact).norm();
  }
  {
    const auto phi = tube_trivial_gauge(cfg.n, cfg.epsilon, rng);
    const GaugedConnection aphi(a, *phi);
    res[6] = (scattering(aphi, path, opts) - scattering(a, path, opts)).norm();
  }
  {
    const double h = cfg.fd_step;
    Vec4 v1, v2;
    for (int k = 0; k < 4; ++k) {
      v1[k] = rng.normal();
      v2[k] = rng.normal();
    }
    const Mat analytic = transport_derivative(a, leg, v1, v2, opts);
    const Segment plus(path.x + h * v1, path.y + h * v2), minus(path.x + (-h) * v1, path.y + (-h) * v2);
    const Mat fd = (parallel_transport(a, plus, opts).u - parallel_transport(a, minus, opts).u) / (2.0 * h);
    res[7] = (analytic - fd).norm();
  }
  {
    const BrokenPath straight{path.x, midpoint(path.x, path.y), path.y, PathKind::free};
    const double r1 = (broken_xray(a, b, straight, opts) - attenuated_xray(a, b, leg, opts)).norm();
    const double r2 = (scattering(a, straight, opts) - parallel_transport(a, leg, opts).u).norm();
    res[8] = std::max(r1, r2);
  }
  {
    const BrokenPath fd_path = future_determined(path.x, path.y, dcfg);
    const PathFunctional fn = [&](const BrokenPath& q) -> Mat {
      return scattering(a, q, opts) * scattering(b, q, opts).inverse();
    };
    const double lhs = diff.eval(path.x.vec(), unit_direction(path.y, path.x).v).norm();
    const double rhs = path_derivative(fn, fd_path, PathDirection::x_from_y, FDConfig{cfg.fd_step}, dcfg).norm();
    res[9] = std::abs(lhs - rhs);
  }
  return res;
}

std::vector<double> potential_pair(const IdentityConfig& cfg, int i) {
  const DiamondConfig dcfg{cfg.epsilon};
  const CosineBasis basis(cfg.basis_per_axis);
  const TransportOptions opts{cfg.steps, false};
  RandomStream rng = RandomStream(cfg.seed ^ 0x5bd1e995ULL).split(static_cast<std::uint64_t>(i));
  const ConnectionField a = random_connection(cfg.n, basis, rng, cfg.coeff_norm);
  const ConnectionField b = random_connection(cfg.n, basis, rng, cfg.coeff_norm);
  const DifferenceForm diff(a, b);
  const EndoConnection e{a, b};
  const BrokenPath sampled = sample_broken_path(dcfg, rng);
  const BrokenPath path = future_determined(sampled.x, sampled.y, dcfg);
  std::vector<double> res(kPotentialCount, 0.0);
  {
    const Event q = Event(path.y.vec() + rng.uniform(0.2, 0.8) * (path.z.vec() - path.y.vec()));
    const Vec4 v = unit_direction(path.y, path.z).v;
    res[0] = (diff.eval(q.vec(), v) - covariant_dp(a, b, q, v, opts)).norm();
  }
  {
    // The outer integrals run on a coarser grid; both sides share it.
    const TransportOptions outer{std::max(16, cfg.steps / 8), false};
    const PotentialResidualForm resid(a, b, opts);
    const Mat lhs = broken_xray(e, diff, path, outer);
    const Mat rhs = attenuated_xray(e, resid, Segment(path.x, path.y), outer) - potential_p(a, b, path.x, opts);
    res[1] = (lhs - rhs).norm();
  }
  return res;
}

std::vector<double> lightsink_pair(const IdentityConfig& cfg, int i) {
  const DiamondConfig dcfg{cfg.epsilon};
  const CosineBasis basis(cfg.basis_per_axis);
  const TransportOptions opts{std::max(32, cfg.steps / 4), false};
  RandomStream rng = RandomStream(cfg.seed ^ 0x9e3779b97f4a7c15ULL).split(static_cast<std::uint64_t>(i));
  const ConnectionField a = random_connection(cfg.n, basis, rng, cfg.coeff_norm);
  const ConnectionField b = random_connection(cfg.n, basis, rng, cfg.coeff_norm);
  const LightSinkField l = random_lightsink(cfg.n, basis, rng, cfg.coeff_norm);
  const Event y = sample_outside_tube(dcfg, rng);
  Vec4 v;
  for (int k = 0; k < 4; ++k) v[k] = rng.normal();
  v.normalize();
  std::vector<double> res(kLightSinkCount, 0.0);

  const auto phi = axis_trivial_gauge(cfg.n, rng);
  const auto psi = axis_trivial_gauge(cfg.n, rng);
  const auto theta = delta_covariance_check(a, b, *phi, *psi, y, v, opts);
  res[0] = theta[0];
  res[1] = theta[1];
  res[2] = theta[2];
  res[3] = std::abs(delta_norm(a, b, y, opts) - rho_distance(a, b, y, opts));

  const Vec3 xhat = y.x / y.radius();
  const Vec4 dt(1, 0, 0, 0), dr(0, xhat[0], xhat[1], xhat[2]);
  const RhoConnection ra(a, opts);
  res[4] = (ra.eval(y.vec(), dt) - ra.eval(y.vec(), dr)).norm();
  res[5] = (rho_eval(l, y, v, opts) - l.eval(y.vec(), v)).norm();
  res[6] = (rho_eval(ra, y, v, opts) - ra.eval(y.vec(), v)).norm();
  return res;
}

}  // namespace

std::vector<IdentityCheck> transport_identities(const IdentityConfig& cfg) {
  std::vector<std::vector<double>> per(cfg.pairs);
  parallel_for(cfg.pairs, cfg.threads, [&](int i) { per[i] = transport_pair(cfg, i); });
  auto out = reduce(kTransportRows, kTransportCount, per);
  const int m = std::max(1, cfg.lightsink_pairs);
  std::vector<std::vector<double>> pot(m);
  parallel_for(m, cfg.threads, [&](int i) { pot[i] = potential_pair(cfg, i); });
  for (auto& c : reduce(kPotentialRows, kPotentialCount, pot)) out.push_back(std::move(c));
  return out;
}

std::vector<IdentityCheck> lightsink_identities(const IdentityConfig& cfg) {
  const int m = std::max(1, cfg.lightsink_pairs);
  std::vector<std::vector<double>> per(m);
  parallel_for(m, cfg.threads, [&](int i) { per[i] = lightsink_pair(cfg, i); });
  return reduce(kLightSinkRows, kLightSinkCount, per);
}

std::vector<IdentityCheck> run_identity_suite(const IdentityConfig& cfg) {
  auto out = transport_identities(cfg);
  if (cfg.include_lightsink) {
    for (auto& c : lightsink_identities(cfg)) out.push_back(std::move(c));
  }
  return out;
}

std::string identity_csv(const std::vector<IdentityCheck>& checks) {
  std::ostringstream os;
  os << "name,identity,residual,tolerance,pass\n";
  for (const auto& c : checks) {
    os << c.name << ",\"" << c.anchor << "\"," << fmt_double(c.residual) << ','
       << fmt_double(c.tolerance) << ',' << (c.pass ? "true" : "false") << '\n';
  }
  return os.str();
}

}  // namespace bxr
