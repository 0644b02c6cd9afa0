#pragma once

// Synthetic scattering data, truncated Gaussian prior over light-sink fields,
// the penalised log-likelihood and a pCN sampler.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bxr/connection.hpp"
#include "bxr/geometry.hpp"

namespace bxr {

/// 3 * dim so(n): number of scalar channels of a light-sink field.
int scalar_channels(int n);

struct PriorSpec {
  int n = 3;
  double alpha = 6.0;
  int dim = 36;           // D, a multiple of scalar_channels(n)
  long n_scale = 1;       // N in the coefficient scaling N^{-1/(alpha+2)}
  int basis_per_axis = 2;
  std::uint64_t seed = 0;

  void validate() const;
  int modes() const { return dim / scalar_channels(n); }
  /// Coefficient standard deviation of mode j.
  double mode_sd(const CosineBasis& basis, int j) const;
};

/// delta_N = N^{-alpha/(2 alpha + 4)}.
double delta_n(double alpha, long n);
/// N delta_N^2 (zero for N = 0).
double penalty_weight(double alpha, long n);

/// Coefficient vector (length D, index j * d_n + channel) -> light-sink field.
/// Channel i is spatial component i / so_dim(n), so-coordinate i % so_dim(n).
LightSinkField field_from_coeffs(const PriorSpec& spec, const CosineBasis& basis,
                                 const Eigen::VectorXd& coeffs);
/// Inverse of field_from_coeffs restricted to the first D modes.
Eigen::VectorXd coeffs_from_field(const PriorSpec& spec, const LightSinkField& field);

/// Vector of per-coefficient prior standard deviations.
Eigen::VectorXd prior_sd(const PriorSpec& spec, const CosineBasis& basis);

LightSinkField sample_prior(const PriorSpec& spec, RandomStream& rng);

struct Observation {
  BrokenPath path;  // (X, Y, Z) as sampled
  Mat s_plus;       // data on the future-determined path (X, Y, z_Y)
  Mat s_minus;      // data on the past-determined path (x_Y, Y, Z)
};

struct Dataset {
  int n = 3;
  double epsilon = 0.25;
  double noise_sd = 1.0;
  int steps = 64;
  std::uint64_t seed = 0;
  std::optional<std::string> truth_hash;
  std::vector<Observation> observations;
  long size() const { return static_cast<long>(observations.size()); }
};

struct SynthOptions {
  double noise_sd = 1.0;
  int steps = 64;
};

Dataset synthesize(const OneForm& truth, long count, const DiamondConfig& cfg, RandomStream& rng,
                   const SynthOptions& opts = {});

/// Forward map with basis values precomputed at every RK4 node of every leg.
class ForwardModel {
 public:
  ForwardModel(const Dataset& data, const PriorSpec& spec, const CosineBasis& basis,
               int steps);

  /// Predicted (S_plus, S_minus) of observation i for the given coefficients.
  std::pair<Mat, Mat> predict(int i, const Eigen::VectorXd& coeffs) const;
  /// 0.5 * sum of squared Frobenius misfits.
  double misfit(const Eigen::VectorXd& coeffs) const;
  int size() const { return static_cast<int>(paths_.size()); }

 private:
  struct Leg {
    int steps = 0;
    double h = 0.0;
    // features(node) is a 3 x modes matrix, stored row-major per node
    std::vector<double> features;
  };
  struct PathCache {
    std::vector<Leg> plus;   // legs in order of traversal
    std::vector<Leg> minus;
  };
  Mat run_legs(const std::vector<Leg>& legs, const Eigen::MatrixXd& cmat) const;
  Eigen::MatrixXd coeff_matrix(const Eigen::VectorXd& coeffs) const;

  const Dataset& data_;
  int n_;
  int modes_;
  int so_;
  std::vector<PathCache> paths_;
};

/// log-likelihood l_N(A) up to an additive constant (uncached reference path).
double log_likelihood(const LightSinkField& a, const Dataset& data, const PriorSpec& spec);

struct ChainState {
  Eigen::VectorXd coeffs;  // whitened coordinates
  double potential = 0.0;  // misfit + penalty
  double log_post = 0.0;   // -potential
  double beta = 0.1;
  long accept_count = 0;
  long steps = 0;
  bool last_proposal_finite = true;
};

/// Potential Phi(c) for whitened coordinates c.
class Potential {
 public:
  Potential(const Dataset& data, const PriorSpec& spec, int steps);
  double operator()(const Eigen::VectorXd& whitened) const;
  Eigen::VectorXd unwhiten(const Eigen::VectorXd& whitened) const;
  const CosineBasis& basis() const { return basis_; }
  const PriorSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim; }

 private:
  PriorSpec spec_;
  CosineBasis basis_;
  Eigen::VectorXd sd_;
  Eigen::VectorXd penalty_diag_;  // N delta_N^2 lambda_j^alpha sd^2 per whitened coordinate
  std::optional<ForwardModel> model_;
};

ChainState initial_state(const Potential& phi, double beta);

/// One pCN step; returns true on acceptance.
bool pcn_step(ChainState& state, const Potential& phi, double beta, RandomStream& rng);

struct TraceRow {
  long iteration;
  double log_post;
  bool accepted;
  double l2_error;  // NaN when no truth
};

struct InversionOptions {
  long iters = 5000;
  long burn_in = 1000;
  int steps = 64;
  double beta0 = 0.2;
  double target_accept = 0.25;
  int thin = 1;
  bool keep_samples = false;
  int divergence_limit = 50;
};

struct PosteriorSummary {
  LightSinkField mean;
  Eigen::VectorXd mean_coeffs;
  Eigen::VectorXd var_coeffs;
  std::optional<double> l2_error;
  double acceptance_rate = 0.0;  // after burn-in
  double beta = 0.0;
  double ess = 0.0;  // of the log posterior trace
  std::vector<TraceRow> trace;
  std::vector<Eigen::VectorXd> samples;  // unwhitened, post burn-in, thinned
};

PosteriorSummary run_inversion(const Dataset& data, const PriorSpec& spec,
                               const InversionOptions& opts, RandomStream& rng,
                               const LightSinkField* truth = nullptr);

/// Effective sample size by Geyer's initial positive sequence.
double effective_sample_size(const std::vector<double>& series);

/// Fixed truth in E_D: coefficients lambda_j^{-alpha/2} g with g standard normal.
LightSinkField reference_truth(const PriorSpec& spec, RandomStream& rng);

}  // namespace bxr
