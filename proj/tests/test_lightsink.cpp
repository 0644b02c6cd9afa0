#include <gtest/gtest.h>

#include <memory>

#include "bxr/error.hpp"
#include "bxr/lightsink.hpp"

using namespace bxr;

namespace {

Mat skew3(double a, double b, double c) {
  const double v[3] = {a, b, c};
  return so_from_coords(3, v);
}

ExpProductGauge axis_trivial_gauge(double scale = 1.0) {
  auto f = std::make_shared<PolynomialField>(
      std::vector<PolynomialField::Term>{{0.8 * scale, {0, 1, 0, 0}}, {0.5 * scale, {1, 0, 2, 0}}});
  auto g = std::make_shared<PolynomialField>(
      std::vector<PolynomialField::Term>{{-0.6 * scale, {0, 0, 0, 1}}, {0.3 * scale, {0, 2, 0, 0}}});
  return ExpProductGauge(3, {{skew3(1, 0, 0), f}, {skew3(0, 0.5, 1), g}});
}

Event off_axis_point(RandomStream& rng) {
  return sample_outside_tube(DiamondConfig{}, rng);
}

const TransportOptions kOpts{256, false};

}  // namespace

TEST(Rho, AxisPointRejected) {
  ZeroForm zero(3);
  try {
    rho_map(zero, Event(0.2, 0, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AxisPoint);
  }
}

TEST(Rho, FixesLightSinkAndZero) {
  CosineBasis basis(2);
  RandomStream rng(1);
  LightSinkField a = random_lightsink(3, basis, rng, 1.0);
  ZeroForm zero(3);
  for (int i = 0; i < 10; ++i) {
    Event y = off_axis_point(rng);
    auto ra = rho_map(a, y, kOpts);
    auto rz = rho_map(zero, y, kOpts);
    for (int k = 0; k < 4; ++k) {
      Vec4 e = Vec4::Unit(k);
      EXPECT_LT((ra[k] - a.eval(y.vec(), e)).norm(), 1e-6);
      EXPECT_EQ(rz[k].norm(), 0.0);
    }
  }
}

TEST(Rho, InvariantUnderAxisTrivialGauge) {
  CosineBasis basis(2);
  RandomStream rng(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  ExpProductGauge phi = axis_trivial_gauge();
  GaugedConnection ag(a, phi);
  for (int i = 0; i < 10; ++i) {
    Event y = off_axis_point(rng);
    auto r1 = rho_map(a, y, kOpts);
    auto r2 = rho_map(ag, y, kOpts);
    for (int k = 0; k < 4; ++k) EXPECT_LT((r1[k] - r2[k]).norm(), 1e-5);
  }
}

TEST(Rho, ResultIsLightSink) {
  CosineBasis basis(2);
  RandomStream rng(5);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  RhoConnection rho(a, kOpts);
  for (int i = 0; i < 10; ++i) {
    Event y = off_axis_point(rng);
    Vec3 r = y.x.normalized();
    Vec4 v(-1, r[0], r[1], r[2]);
    EXPECT_LT(rho.eval(y.vec(), v).norm(), 1e-6);
  }
}

TEST(Rho, Idempotent) {
  CosineBasis basis(2);
  RandomStream rng(6);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  const TransportOptions coarse{64, false};
  RhoConnection rho(a, coarse);
  for (int i = 0; i < 2; ++i) {
    Event y = off_axis_point(rng);
    auto once = rho_map(a, y, coarse);
    auto twice = rho_map(rho, y, coarse);
    for (int k = 0; k < 4; ++k) EXPECT_LT((once[k] - twice[k]).norm(), 1e-5);
  }
}

TEST(Delta, ZeroForEqualFields) {
  CosineBasis basis(2);
  RandomStream rng(7);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  Event y = off_axis_point(rng);
  EXPECT_LT(delta_norm(a, a, y, kOpts), 1e-9);
}

TEST(Delta, LightSinkPairIsPlainDifference) {
  CosineBasis basis(2);
  RandomStream rng(9);
  LightSinkField a = random_lightsink(3, basis, rng, 1.0);
  LightSinkField b = random_lightsink(3, basis, rng, 1.0);
  DifferenceForm diff(a, b);
  for (int i = 0; i < 5; ++i) {
    Event y = off_axis_point(rng);
    EXPECT_NEAR(delta_norm(a, b, y, kOpts), pointwise_norm(diff, y.vec()), 1e-5);
  }
}

TEST(Delta, EqualsRhoDistance) {
  CosineBasis basis(2);
  RandomStream rng(11);
  for (int i = 0; i < 5; ++i) {
    ConnectionField a = random_connection(3, basis, rng, 1.0);
    ConnectionField b = random_connection(3, basis, rng, 1.0);
    Event y = off_axis_point(rng);
    EXPECT_NEAR(delta_norm(a, b, y, kOpts), rho_distance(a, b, y, kOpts), 1e-5);
  }
}

TEST(Delta, ThetaIdentities) {
  CosineBasis basis(2);
  RandomStream rng(13);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  ConnectionField b = random_connection(3, basis, rng, 1.0);
  ConstantGauge id(identity(3));
  ExpProductGauge phi = axis_trivial_gauge();
  ExpProductGauge psi = axis_trivial_gauge(-0.7);
  Event y = off_axis_point(rng);
  Vec4 v(0.3, -0.5, 0.2, 0.7);
  for (double r : delta_covariance_check(a, b, id, id, y, v, kOpts)) EXPECT_LT(r, 1e-7);
  for (double r : delta_covariance_check(a, b, phi, psi, y, v, kOpts)) EXPECT_LT(r, 1e-5);
  for (double r : delta_covariance_check(a, a, phi, psi, y, v, kOpts)) EXPECT_LT(r, 1e-5);
}

TEST(OperatorNorm, DesignMatchesSvd) {
  RandomStream rng(15);
  for (int i = 0; i < 10; ++i) {
    std::array<Mat, 4> images;
    std::vector<Mat> list;
    for (auto& m : images) {
      m = Mat::Random(3, 3);
      list.push_back(m);
    }
    EXPECT_NEAR(operator_norm_design(images), operator_norm4(list), 1e-9);
  }
}

TEST(Recovery, LightSinkPairGivesIdentity) {
  CosineBasis basis(2);
  RandomStream rng(17);
  LightSinkField a = random_lightsink(3, basis, rng, 1.0);
  DiamondConfig cfg;
  ScatteringOracle sa = [&](const BrokenPath& p) { return scattering(a, p, kOpts); };
  RandomStream probe(1);
  RecoveredGauge rec = recover_gauge(3, sa, sa, cfg, ExtensionOp{cfg.epsilon, 1e-8}, probe, 16);
  for (int i = 0; i < 20; ++i) {
    Event q = sample_tube(cfg, rng);
    EXPECT_LT((rec.phi->value(q.vec()) - identity(3)).norm(), 1e-6);
  }
}

TEST(Recovery, InconsistentOraclesRejected) {
  CosineBasis basis(2);
  RandomStream rng(19);
  LightSinkField a = random_lightsink(3, basis, rng, 1.0);
  ConnectionField b = random_connection(3, basis, rng, 1.0);
  ConnectionField c = random_connection(3, basis, rng, 1.0);
  DiamondConfig cfg;
  // sb mixes two unrelated connections, so the two sides of the tube disagree.
  ScatteringOracle sa = [&](const BrokenPath& p) { return scattering(a, p, kOpts); };
  ScatteringOracle sb = [&](const BrokenPath& p) {
    return p.kind == PathKind::future_determined ? scattering(b, p, kOpts) : scattering(c, p, kOpts);
  };
  RandomStream probe(1);
  try {
    recover_gauge(3, sa, sb, cfg, ExtensionOp{cfg.epsilon, 1e-8}, probe, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentData);
  }
}
