#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "bxr/error.hpp"
#include "bxr/stability.hpp"

using namespace bxr;

namespace {

Mat skew3(double a, double b, double c) {
  const double v[3] = {a, b, c};
  return so_from_coords(3, v);
}

StabilityOptions fast_options() {
  StabilityOptions o;
  o.transport = TransportOptions{128, false};
  return o;
}

}  // namespace

TEST(LinalgBound, StandardBasis) {
  std::array<Vec4, 4> e = {Vec4::Unit(0), Vec4::Unit(1), Vec4::Unit(2), Vec4::Unit(3)};
  EXPECT_NEAR(linalg_bound(e), 2.0, 1e-14);
  EXPECT_NEAR(inverse_frobenius(e), 2.0, 1e-14);
}

TEST(LinalgBound, SampleDirectionsInverseNorm) {
  for (double eps : {0.1, 0.25, 0.4}) {
    EXPECT_NEAR(inverse_frobenius(sample_directions(eps)), std::sqrt(8 * eps * eps + 8) / eps,
                1e-10);
  }
  EXPECT_NEAR(inverse_frobenius(sample_directions(0.25)), 11.661903789690601, 1e-10);
}

TEST(LinalgBound, RepeatedVectorIsSingular) {
  std::array<Vec4, 4> e = {Vec4::Unit(0), Vec4::Unit(1), Vec4::Unit(1), Vec4::Unit(3)};
  try {
    linalg_bound(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::SingularBasis);
  }
}

TEST(PathDerivative, ConstantFunctional) {
  DiamondConfig cfg;
  RandomStream rng(1);
  BrokenPath p = sample_broken_path(cfg, rng);
  PathFunctional f = [](const BrokenPath&) { return identity(3); };
  for (auto d : {PathDirection::y_from_x, PathDirection::x_from_y, PathDirection::y_from_z,
                 PathDirection::z_from_y}) {
    EXPECT_EQ(path_derivative(f, p, d, FDConfig{}, cfg).norm(), 0.0);
  }
}

TEST(PathDerivative, XRayEvaluatesOneForm) {
  // Moving y toward x shortens the leg: d I_{y<-x}(w) = P_{x<-y} w_y(v_{y<-x}) up to sign
  // conventions fixed by the direction.
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream rng(3);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  ConnectionField w = random_connection(3, basis, rng, 1.0);
  TransportOptions opts{512, false};
  for (int i = 0; i < 5; ++i) {
    BrokenPath p = sample_broken_path(cfg, rng);
    PathFunctional f = [&](const BrokenPath& q) {
      return attenuated_xray(a, w, Segment(q.x, q.y), opts);
    };
    Mat d = path_derivative(f, p, PathDirection::y_from_x, FDConfig{}, cfg);
    const Vec4 v = unit_direction(p.x, p.y).v;
    Mat pxy = parallel_transport(a, Segment(p.y, p.x), opts).u;
    Mat expected = pxy * w.eval(p.y.vec(), v);
    EXPECT_LT(std::min((d - expected).norm(), (d + expected).norm()), 1e-6);
  }
}

TEST(EstimateIn, EqualFieldsGiveZero) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream rng(5);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  RandomStream r2(6);
  EstimateReport rep = estimate_in(a, a, cfg, 20, 10, r2, fast_options());
  EXPECT_EQ(rep.lhs, 0.0);
  EXPECT_LT(rep.rhs, 1e-9);
}

TEST(EstimateIn, TubeTrivialGaugeGivesZero) {
  // phi = Id on a neighbourhood of the tube, so A = B there and the data agree.
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream rng(7);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  auto bump = std::make_shared<RadialBumpField>(0.3, 2.0, 0.2);
  ExpProductGauge phi(3, {{skew3(1, -0.5, 0.3), bump}});
  GaugedConnection b(a, phi);
  RandomStream r2(8);
  EstimateReport rep = estimate_in(a, b, cfg, 20, 10, r2, fast_options());
  EXPECT_LT(rep.lhs, 1e-12);
  EXPECT_LT(rep.rhs, 1e-5);
}

TEST(EstimateOut, EqualFieldsGiveZero) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream rng(9);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  RandomStream r2(10);
  EstimateOutReport rep = estimate_out(a, a, cfg, 4, 4, r2, fast_options());
  for (const auto& p : rep.points) {
    EXPECT_LT(p.lhs, 1e-8);
    EXPECT_LT(p.rhs_integral, 1e-6);
  }
}

TEST(EstimateOut, LightSinkPairDirectionBound) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream rng(11);
  LightSinkField a = random_lightsink(3, basis, rng, 1.0);
  LightSinkField b = random_lightsink(3, basis, rng, 1.0);
  DifferenceForm diff(a, b);
  RandomStream r2(12);
  EstimateOutReport rep = estimate_out(a, b, cfg, 6, 4, r2, fast_options());
  for (const auto& p : rep.points) {
    EXPECT_NEAR(p.lhs, pointwise_norm(diff, p.y.vec()), 1e-5);
    EXPECT_LE(p.lhs, p.rhs_directions + 1e-5);
  }
}

TEST(Psi, ZeroAndConstantFields) {
  CosineBasis basis(2);
  ZeroForm zero(3);
  EXPECT_NEAR(psi_factor(zero, zero, 5), 1.0, 1e-15);
  Mat m = skew3(0.3, 0.4, 0.0);
  ConnectionField c = constant_time_connection(m, basis);
  PsiTerms t = psi_terms(c, 5);
  EXPECT_LT(t.curvature_sup, 1e-9);
  EXPECT_NEAR(t.axis_sup, m.norm(), 1e-12);
}

TEST(Psi, GridRefinement) {
  CosineBasis basis(2);
  RandomStream rng(13);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  const double coarse = psi_terms(a, 9).curvature_sup;
  const double fine = psi_terms(a, 17).curvature_sup;
  EXPECT_NEAR(coarse, fine, 0.1 * fine);
}

TEST(ForwardBound, ScatteringDifference) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream rng(15);
  ConnectionField a = random_connection(3, basis, rng, 1.0);
  ConnectionField b = random_connection(3, basis, rng, 1.0);
  const double sup = sup_norm_grid(a, b, 9);
  TransportOptions opts{128, false};
  for (int i = 0; i < 50; ++i) {
    BrokenPath p = sample_broken_path(cfg, rng);
    EXPECT_LE((scattering(a, p, opts) - scattering(b, p, opts)).norm(),
              2 * std::sqrt(2.0) * sup + 1e-6);
  }
}

TEST(EstimateCsv, RowFormat) {
  EstimateReport r{"in", 1.5, 3.0, 0.5, 10, 0.25, 7};
  EXPECT_EQ(estimate_csv_header(), "estimate_name,epsilon,lhs,rhs,ratio,n_samples,seed");
  EXPECT_EQ(to_csv_row(r), "in,0.25,1.5,3,0.5,10,7");
}
