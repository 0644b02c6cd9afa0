#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bxr/bayes.hpp"
#include "bxr/error.hpp"
#include "bxr/io.hpp"
#include "bxr/transport.hpp"
#include "stats.hpp"

using namespace bxr;

namespace {

PriorSpec default_spec(long n_scale) {
  PriorSpec s;
  s.n_scale = n_scale;
  return s;
}

}  // namespace

TEST(Prior, ModeScaling) {
  CosineBasis basis(2);
  PriorSpec s = default_spec(4096);
  EXPECT_NEAR(s.mode_sd(basis, 0), 0.35355339059327373, 1e-12);
  const double lam = basis.eigenvalue(1);
  EXPECT_NEAR(s.mode_sd(basis, 1), std::pow(4096.0, -1.0 / 8) * std::pow(lam, -3.0), 1e-15);
  EXPECT_EQ(s.modes(), 4);
  EXPECT_EQ(scalar_channels(3), 9);
}

TEST(Prior, ValidatesSpec) {
  PriorSpec s;
  s.dim = 35;
  EXPECT_THROW(s.validate(), Error);
  s = PriorSpec{};
  s.alpha = 4.0;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Prior, SmallestTruncation) {
  CosineBasis basis(2);
  PriorSpec s = default_spec(1);
  s.dim = 9;
  EXPECT_EQ(s.modes(), 1);
  RandomStream rng(1);
  LightSinkField a = sample_prior(s, rng);
  Eigen::VectorXd c = coeffs_from_field(s, a);
  EXPECT_EQ(c.size(), 9);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.coords(i).bottomRows(15).norm(), 0.0);
}

TEST(Prior, EmpiricalVariance) {
  CosineBasis basis(2);
  PriorSpec s = default_spec(100);
  RandomStream rng(2);
  const int draws = 10000;
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(s.dim);
  for (int i = 0; i < draws; ++i) {
    Eigen::VectorXd c = coeffs_from_field(s, sample_prior(s, rng));
    sum2 += c.cwiseProduct(c);
  }
  Eigen::VectorXd sd = prior_sd(s, basis);
  for (int k : {0, 5, 13, 35}) {
    EXPECT_NEAR(sum2[k] / draws / (sd[k] * sd[k]), 1.0, 0.05) << k;
  }
}

TEST(Prior, CoefficientRoundTrip) {
  CosineBasis basis(2);
  PriorSpec s = default_spec(1);
  Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(s.dim, -1, 1);
  EXPECT_EQ((coeffs_from_field(s, field_from_coeffs(s, basis, c)) - c).norm(), 0.0);
}

TEST(Penalty, Rates) {
  EXPECT_NEAR(delta_n(6.0, 4096), 0.044194173824159216, 1e-12);
  EXPECT_EQ(penalty_weight(6.0, 0), 0.0);
  EXPECT_NEAR(penalty_weight(6.0, 4096), 4096 * std::pow(2.0, -9), 1e-12);
}

TEST(Synth, ZeroTruthMean) {
  DiamondConfig cfg;
  ZeroForm zero(3);
  RandomStream rng(3);
  const long count = 10000;
  Dataset d = synthesize(zero, count, cfg, rng);
  Mat sum = zeros(3);
  for (const auto& ob : d.observations) sum += ob.s_plus + ob.s_minus;
  Mat mean = sum / (2.0 * count);
  const double sigma = 1.0 / std::sqrt(2.0 * count);
  EXPECT_LT((mean - identity(3)).cwiseAbs().maxCoeff(), 4 * sigma);
}

TEST(Synth, NoiselessDataOrthogonal) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream rng(4);
  LightSinkField a = random_lightsink(3, basis, rng, 1.0);
  Dataset d = synthesize(a, 50, cfg, rng, SynthOptions{0.0, 64});
  for (const auto& ob : d.observations) {
    EXPECT_LT(orthogonality_drift(ob.s_plus), 1e-8);
    EXPECT_LT(orthogonality_drift(ob.s_minus), 1e-8);
  }
}

TEST(Synth, DeterministicBytes) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  RandomStream t(5);
  LightSinkField a = random_lightsink(3, basis, t, 1.0);
  auto dump = [&] {
    RandomStream rng(42);
    Dataset d = synthesize(a, 20, cfg, rng);
    std::ostringstream os;
    write_dataset(os, d);
    return os.str();
  };
  EXPECT_EQ(dump(), dump());
}

TEST(Forward, CachedModelMatchesDirectScattering) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  PriorSpec s = default_spec(1);
  RandomStream rng(6);
  Eigen::VectorXd c(s.dim);
  for (int k = 0; k < s.dim; ++k) c[k] = 0.5 * rng.normal();
  LightSinkField a = field_from_coeffs(s, basis, c);
  Dataset d = synthesize(a, 10, cfg, rng);
  ForwardModel model(d, s, basis, 64);
  TransportOptions opts{64, false};
  for (int i = 0; i < model.size(); ++i) {
    const auto& p = d.observations[i].path;
    auto [sp, sm] = model.predict(i, c);
    EXPECT_LT((sp - scattering(a, future_determined(p.x, p.y, cfg), opts)).norm(), 1e-10);
    EXPECT_LT((sm - scattering(a, past_determined(p.y, p.z, cfg), opts)).norm(), 1e-10);
  }
}

TEST(Likelihood, MisfitAtTruthIsChiSquare) {
  // 2 * misfit at the truth is chi-square with 2 n^2 N degrees of freedom.
  DiamondConfig cfg;
  CosineBasis basis(2);
  PriorSpec s = default_spec(1);
  const long count = 200;
  const double dof = 2.0 * 9 * count;
  int inside = 0;
  const int reps = 10;
  for (int r = 0; r < reps; ++r) {
    RandomStream rng(100 + r);
    LightSinkField truth = reference_truth(s, rng);
    Dataset d = synthesize(truth, count, cfg, rng);
    ForwardModel model(d, s, basis, d.steps);
    const double chi2 = 2 * model.misfit(coeffs_from_field(s, truth));
    inside += chi2 > bxr::testing::chi2_quantile(0.005, dof) &&
              chi2 < bxr::testing::chi2_quantile(0.995, dof);
  }
  EXPECT_GE(inside, reps - 1);
}

TEST(Likelihood, PenaltyMatchesSobolevNorm) {
  DiamondConfig cfg;
  CosineBasis basis(2);
  PriorSpec s = default_spec(1);
  RandomStream rng(7);
  Dataset d = synthesize(ZeroForm(3), 30, cfg, rng);
  LightSinkField a(3, basis);
  const double v[3] = {1, 0, 0};
  a.set_coeff(1, 2, so_from_coords(3, v));
  ForwardModel model(d, s, basis, d.steps);
  const double misfit = model.misfit(coeffs_from_field(s, a));
  const double pen = 0.5 * penalty_weight(s.alpha, 30) * std::pow(basis.eigenvalue(2), s.alpha);
  EXPECT_NEAR(log_likelihood(a, d, s), -misfit - pen, 1e-9 * (misfit + pen));
  EXPECT_NEAR(pen, 0.5 * penalty_weight(s.alpha, 30) * std::pow(sobolev_norm(a, s.alpha), 2), 1e-9 * pen);
}

TEST(Pcn, ZeroStepAlwaysAccepted) {
  DiamondConfig cfg;
  PriorSpec s = default_spec(20);
  RandomStream rng(8);
  Dataset d = synthesize(ZeroForm(3), 20, cfg, rng);
  Potential phi(d, s, d.steps);
  ChainState st = initial_state(phi, 0.1);
  st.coeffs.setConstant(0.3);
  st.potential = phi(st.coeffs);
  const Eigen::VectorXd before = st.coeffs;
  for (int i = 0; i < 20; ++i) EXPECT_TRUE(pcn_step(st, phi, 0.0, rng));
  EXPECT_EQ((st.coeffs - before).norm(), 0.0);
}

TEST(Pcn, EmptyDataSamplesPrior) {
  Dataset d;
  PriorSpec s = default_spec(1);
  InversionOptions o;
  o.iters = 3000;
  o.burn_in = 500;
  o.keep_samples = true;
  RandomStream rng(9);
  PosteriorSummary post = run_inversion(d, s, o, rng);
  EXPECT_DOUBLE_EQ(post.acceptance_rate, 1.0);
  CosineBasis basis(2);
  const double sd = prior_sd(s, basis)[0];
  std::vector<double> xs;
  for (const auto& c : post.samples) xs.push_back(c[0]);
  const double dstat =
      bxr::testing::ks_statistic(xs, [&](double x) { return bxr::testing::normal_cdf(x, sd); });
  EXPECT_GT(bxr::testing::ks_pvalue(dstat, xs.size()), 0.01);
}

TEST(Pcn, RejectsBadIterationCounts) {
  Dataset d;
  InversionOptions o;
  o.iters = 100;
  o.burn_in = 100;
  RandomStream rng(10);
  try {
    run_inversion(d, PriorSpec{}, o, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
}

TEST(Pcn, TunedAcceptanceRate) {
  DiamondConfig cfg;
  PriorSpec s = default_spec(100);
  RandomStream rng(11);
  LightSinkField truth = reference_truth(s, rng);
  Dataset d = synthesize(truth, 100, cfg, rng);
  InversionOptions o;
  o.iters = 2000;
  o.burn_in = 500;
  PosteriorSummary post = run_inversion(d, s, o, rng, &truth);
  EXPECT_GE(post.acceptance_rate, 0.15);
  EXPECT_LE(post.acceptance_rate, 0.4);
  ASSERT_TRUE(post.l2_error.has_value());
  EXPECT_TRUE(std::isfinite(*post.l2_error));
}

TEST(Ess, IndependentAndCorrelatedSeries) {
  RandomStream rng(12);
  const int n = 20000;
  std::vector<double> iid(n), ar(n);
  const double rho = 0.9;
  double x = 0;
  for (int i = 0; i < n; ++i) {
    iid[i] = rng.normal();
    x = rho * x + std::sqrt(1 - rho * rho) * rng.normal();
    ar[i] = x;
  }
  EXPECT_NEAR(effective_sample_size(iid) / n, 1.0, 0.1);
  const double expect = n * (1 - rho) / (1 + rho);
  EXPECT_NEAR(effective_sample_size(ar) / expect, 1.0, 0.25);
}
