#include <gtest/gtest.h>

#include <cmath>

#include "bxr/gauge.hpp"
#include "bxr/transport.hpp"

using namespace bxr;

namespace {

Mat skew3(double a, double b, double c) {
  const double v[3] = {a, b, c};
  return so_from_coords(3, v);
}

BrokenPath random_path(RandomStream& rng) { return sample_broken_path(DiamondConfig{}, rng); }

// f(p) = sum_k p_k M_k with fixed matrices, and its exact differential.
struct LinearMatrixField {
  std::array<Mat, 4> m;
  Mat operator()(const Vec4& p) const {
    Mat out = 0.5 * identity(3);
    for (int k = 0; k < 4; ++k) out += p[k] * m[k];
    return out;
  }
};

class FormFromFn final : public OneForm {
 public:
  FormFromFn(int n, std::function<Mat(const Vec4&, const Vec4&)> fn) : n_(n), fn_(std::move(fn)) {}
  int n() const override { return n_; }
  Mat eval(const Vec4& p, const Vec4& v, const Vec3* = nullptr) const override { return fn_(p, v); }

 private:
  int n_;
  std::function<Mat(const Vec4&, const Vec4&)> fn_;
};

// Direct RK4 of the vectorised n^2 x n^2 system Q' + A Q - Q B = 0.
Eigen::MatrixXd direct_endo(const OneForm& a, const OneForm& b, const Segment& seg, int steps) {
  const int n = a.n(), m = n * n;
  const Vec4 tan = seg.tangent();
  const double h = seg.length() / steps;
  auto gen = [&](double s) {
    Vec4 p = seg.a.vec() + s * tan;
    Eigen::MatrixXd ea = a.eval(p, tan), eb = b.eval(p, tan);
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    // vec(AQ - QB) = (I (x) A - B^T (x) I) vec(Q)
    Eigen::MatrixXd g(m, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g.block(i * n, j * n, n, n) = id(i, j) * ea - eb(j, i) * id;
    return g;
  };
  Eigen::MatrixXd u = Eigen::MatrixXd::Identity(m, m);
  for (int k = 0; k < steps; ++k) {
    const double s = k * h;
    Eigen::MatrixXd k1 = -gen(s) * u;
    Eigen::MatrixXd k2 = -gen(s + h / 2) * (u + h / 2 * k1);
    Eigen::MatrixXd k3 = -gen(s + h / 2) * (u + h / 2 * k2);
    Eigen::MatrixXd k4 = -gen(s + h) * (u + h * k3);
    u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return u;
}

}  // namespace

TEST(Transport, ZeroConnection) {
  ZeroForm zero(3);
  auto r = parallel_transport(zero, Segment(Event(-0.5, 0, 0, 0), Event(0, 0.5, 0, 0)));
  EXPECT_EQ((r.u - identity(3)).norm(), 0.0);
  EXPECT_EQ(r.drift, 0.0);
}

TEST(Transport, ConstantTimeFieldIsExponential) {
  const double a = 0.9;
  Mat m(2, 2);
  m << 0, -a, a, 0;
  CosineBasis basis(2);
  FormFromFn field(2, [&](const Vec4&, const Vec4& v) { return (v[0] * m).eval(); });
  auto r = parallel_transport(field, Segment(Event(-0.5, 0, 0, 0), Event(0, 0.5, 0, 0)));
  Mat expected = expm(-0.5 * m);
  EXPECT_LT((r.u - expected).norm(), 1e-13);
  EXPECT_NEAR(std::atan2(r.u(1, 0), r.u(0, 0)), -0.5 * a, 1e-13);
}

TEST(Transport, CompositionAlongCollinearPoints) {
  CosineBasis basis(2);
  RandomStream rng(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  Event p(-0.6, 0.05, 0, 0), q(-0.2, 0.25, 0.2, 0.1), r(0.2, 0.45, 0.4, 0.2);
  TransportOptions opts{512, false};
  Mat pq = parallel_transport(a, Segment(p, q), opts).u;
  Mat qr = parallel_transport(a, Segment(q, r), opts).u;
  Mat pr = parallel_transport(a, Segment(p, r), TransportOptions{1024, false}).u;
  EXPECT_LT((qr * pq - pr).norm(), 1e-9);
}

TEST(Transport, OrthogonalWithUnitDeterminant) {
  CosineBasis basis(2);
  RandomStream rng(5);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  for (int i = 0; i < 20; ++i) {
    BrokenPath path = random_path(rng);
    auto r = scattering_with_drift(a, path, TransportOptions{256, false});
    EXPECT_LT(r.drift, 1e-9);
    EXPECT_NEAR(r.s.determinant(), 1.0, 1e-9);
  }
}

TEST(Scattering, ZeroAndReversed) {
  CosineBasis basis(2);
  RandomStream rng(7);
  ZeroForm zero(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  TransportOptions opts{512, false};
  for (int i = 0; i < 10; ++i) {
    BrokenPath path = random_path(rng);
    EXPECT_LT((scattering(zero, path) - identity(3)).norm(), 1e-15);
    Mat s = scattering(a, path, opts);
    // reversed-ODE oracle: transports along z -> y -> x
    Mat back = parallel_transport(a, Segment(path.y, path.x), opts).u *
               parallel_transport(a, Segment(path.z, path.y), opts).u;
    EXPECT_LT((back * s - identity(3)).norm(), 1e-10);
  }
}

TEST(Scattering, InvariantUnderTubeTrivialGauge) {
  // phi = exp(f X) with f supported outside |x| = 0.3.
  CosineBasis basis(2);
  RandomStream rng(9);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  auto bump = std::make_shared<RadialBumpField>(0.3, 2.0, 0.2, Vec4(0.1, 0.2, -0.1, 0.3));
  ExpProductGauge phi(3, {{skew3(1, 0.5, -0.3), bump}});
  GaugedConnection ag(a, phi);
  TransportOptions opts{512, false};
  for (int i = 0; i < 10; ++i) {
    BrokenPath path = random_path(rng);
    EXPECT_LT((scattering(ag, path, opts) - scattering(a, path, opts)).norm(), 1e-7);
  }
}

TEST(XRay, ZeroOmegaAndExactForm) {
  CosineBasis basis(2);
  RandomStream rng(11);
  ZeroForm zero(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  LinearMatrixField f;
  for (auto& m : f.m) m = Mat::Random(3, 3);
  FormFromFn df(3, [&](const Vec4&, const Vec4& v) {
    Mat out = zeros(3);
    for (int k = 0; k < 4; ++k) out += v[k] * f.m[k];
    return out;
  });
  FormFromFn dAf(3, [&](const Vec4& p, const Vec4& v) { return (df.eval(p, v) + a.eval(p, v) * f(p)).eval(); });
  Segment seg(Event(-0.4, 0.1, 0, 0), Event(0.1, 0.1, 0.3, 0.4));
  TransportOptions opts{512, false};
  EXPECT_EQ(attenuated_xray(a, zero, seg, opts).norm(), 0.0);
  EXPECT_LT((attenuated_xray(zero, df, seg, opts) - (f(seg.b.vec()) - f(seg.a.vec()))).norm(), 1e-12);
  Mat p = parallel_transport(a, seg, opts).u;
  Mat expected = p.inverse() * f(seg.b.vec()) - f(seg.a.vec());
  EXPECT_LT((attenuated_xray(a, dAf, seg, opts) - expected).norm(), 1e-7);
}

TEST(XRay, BrokenTransform) {
  CosineBasis basis(2);
  RandomStream rng(13);
  ZeroForm zero(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  ConnectionField w = random_connection(3, basis, rng, 1.0);
  TransportOptions opts{512, false};

  BrokenPath straight{Event(-0.6, 0.1, 0, 0), Event(-0.1, 0.4, 0.4, 0), Event(0.4, 0.7, 0.8, 0)};
  Mat whole = attenuated_xray(a, w, Segment(straight.x, straight.z), TransportOptions{1024, false});
  EXPECT_LT((broken_xray(a, w, straight, opts) - whole).norm(), 1e-8);

  BrokenPath path = random_path(rng);
  EXPECT_EQ(broken_xray(a, zero, path, opts).norm(), 0.0);

  LinearMatrixField f;
  for (auto& m : f.m) m = Mat::Random(3, 3);
  FormFromFn dAf(3, [&](const Vec4& p, const Vec4& v) {
    Mat out = a.eval(p, v) * f(p);
    for (int k = 0; k < 4; ++k) out += v[k] * f.m[k];
    return out;
  });
  Mat pxy = parallel_transport(a, Segment(path.y, path.x), opts).u;
  Mat pyz = parallel_transport(a, Segment(path.z, path.y), opts).u;
  Mat expected = pxy * pyz * f(path.z.vec()) - f(path.x.vec());
  EXPECT_LT((broken_xray(a, dAf, path, opts) - expected).norm(), 1e-7);
}

TEST(Endo, FactorisationAndDirectIntegration) {
  CosineBasis basis(2);
  RandomStream rng(15);
  ZeroForm zero(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  ConnectionField b = random_connection(3, basis, rng, 1.0);
  Segment seg(Event(-0.5, 0.1, 0, 0), Event(0.0, 0.1, 0.3, 0.4));
  TransportOptions opts{512, false};
  Mat q = Mat::Random(3, 3);

  EndoTransport same = endo_transport(EndoConnection{a, a}, seg, opts);
  EXPECT_LT((same.apply(identity(3)) - identity(3)).norm(), 1e-12);
  Mat pa = parallel_transport(a, seg, opts).u;
  EXPECT_LT((same.apply(q) - pa * q * pa.inverse()).norm(), 1e-12);

  EndoTransport left = endo_transport(EndoConnection{a, zero}, seg, opts);
  EXPECT_LT((left.apply(q) - pa * q).norm(), 1e-12);

  EndoTransport mixed = endo_transport(EndoConnection{a, b}, seg, opts);
  EXPECT_LT((mixed.matrix() - direct_endo(a, b, seg, 512)).norm(), 1e-8);
}

TEST(Potential, SpecialCasesAndIntegralForm) {
  CosineBasis basis(2);
  RandomStream rng(17);
  ZeroForm zero(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  ConnectionField b = random_connection(3, basis, rng, 1.0);
  TransportOptions opts{512, false};
  Event y(0.1, 0.3, -0.2, 0.2);
  EXPECT_LT(potential_p(a, a, y, opts).norm(), 1e-12);
  auto ends = determined_endpoints(y);
  Mat pb = parallel_transport(b, Segment(y, ends.z_y), opts).u;
  EXPECT_LT((potential_p(zero, b, y, opts) - (identity(3) - pb)).norm(), 1e-12);
  EXPECT_LT((potential_p(a, b, y, opts) - potential_p_integral(a, b, y, opts)).norm(), 1e-7);
  EXPECT_EQ(potential_p(a, b, Event(0.1, 0, 0, 0), opts).norm(), 0.0);
}

TEST(Pseudolinearisation, Residuals) {
  CosineBasis basis(2);
  RandomStream rng(19);
  ZeroForm zero(3);
  TransportOptions opts{512, false};
  for (int i = 0; i < 10; ++i) {
    ConnectionField a = random_connection(3, basis, rng, 1.0);
    ConnectionField b = random_connection(3, basis, rng, 1.0);
    BrokenPath path = random_path(rng);
    EXPECT_LT(pseudolin_residual(a, a, path, opts), 1e-12);
    EXPECT_LT(pseudolin_residual(a, zero, path, opts), 1e-6);
    EXPECT_LT(pseudolin_residual(a, b, path, opts), 1e-6);
  }
}

TEST(Pseudolinearisation, FourthOrderConvergence) {
  CosineBasis basis(2);
  RandomStream rng(21);
  ConnectionField a = random_connection(3, basis, rng, 3.0);
  ConnectionField b = random_connection(3, basis, rng, 3.0);
  BrokenPath path = random_path(rng);
  const double r8 = pseudolin_residual(a, b, path, TransportOptions{4, false});
  const double r16 = pseudolin_residual(a, b, path, TransportOptions{8, false});
  EXPECT_GT(r8 / r16, 8.0);
}

TEST(Variation, ZeroAndConstantAndFiniteDifferences) {
  CosineBasis basis(2);
  RandomStream rng(23);
  ZeroForm zero(3);
  TransportOptions opts{512, false};
  Segment seg(Event(-0.5, 0.1, 0, 0), Event(0.0, 0.1, 0.3, 0.4));
  Vec4 v1(0.1, 0.3, -0.2, 0.4), v2(-0.2, 0.1, 0.5, 0.0);
  EXPECT_LT(transport_derivative(zero, seg, v1, v2, opts).norm(), 1e-15);

  const double h = 1e-4;
  auto fd = [&](const OneForm& a, const Vec4& w1, const Vec4& w2) {
    Mat plus = parallel_transport(a, Segment(seg.a + h * w1, seg.b + h * w2), opts).u;
    Mat minus = parallel_transport(a, Segment(seg.a + (-h) * w1, seg.b + (-h) * w2), opts).u;
    return ((plus - minus) / (2 * h)).eval();
  };
  ConnectionField m = constant_time_connection(skew3(0.4, -0.3, 0.2), basis);
  const Vec4 et(1, 0, 0, 0);
  EXPECT_LT((transport_derivative(m, seg, et, et, opts) - fd(m, et, et)).norm(), 1e-6);

  for (int i = 0; i < 5; ++i) {
    ConnectionField a = random_connection(3, basis, rng, 1.0);
    EXPECT_LT((transport_derivative(a, seg, v1, v2, opts) - fd(a, v1, v2)).norm(), 1e-5);
  }
}
