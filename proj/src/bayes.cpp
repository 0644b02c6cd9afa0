#include "bxr/bayes.hpp"

#include <cmath>
#include <limits>

#include "bxr/error.hpp"
#include "bxr/transport.hpp"

namespace bxr {

int scalar_channels(int n) { return 3 * so_dim(n); }

void PriorSpec::validate() const {
  if (n < 2 || n > kMaxDim) throw Error(ErrorCode::InvalidConfig, "matrix size out of range");
  if (!(alpha >= 5.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be at least 5");
  const int dn = scalar_channels(n);
  if (dim <= 0 || dim % dn != 0) {
    throw Error(ErrorCode::InvalidConfig, "D must be a positive multiple of 3 dim so(n)");
  }
  if (n_scale < 1) throw Error(ErrorCode::InvalidConfig, "N_scale must be at least 1");
  const int k = basis_per_axis;
  if (k < 1 || k > 8 || modes() > k * k * k * k) {
    throw Error(ErrorCode::InvalidConfig, "basis too small for D / d_n modes");
  }
}

double PriorSpec::mode_sd(const CosineBasis& basis, int j) const {
  return std::pow(static_cast<double>(n_scale), -1.0 / (alpha + 2.0)) *
         std::pow(basis.eigenvalue(j), -alpha / 2.0);
}

double delta_n(double alpha, long n) {
  return std::pow(static_cast<double>(n), -alpha / (2.0 * alpha + 4.0));
}

double penalty_weight(double alpha, long n) {
  if (n <= 0) return 0.0;
  return std::pow(static_cast<double>(n), 2.0 / (alpha + 2.0));
}

LightSinkField field_from_coeffs(const PriorSpec& spec, const CosineBasis& basis,
                                 const Eigen::VectorXd& coeffs) {
  const int dn = scalar_channels(spec.n);
  const int so = so_dim(spec.n);
  LightSinkField a(spec.n, basis);
  for (int j = 0; j < spec.modes(); ++j) {
    for (int i = 0; i < dn; ++i) a.coords(i / so)(j, i % so) = coeffs[j * dn + i];
  }
  return a;
}

Eigen::VectorXd coeffs_from_field(const PriorSpec& spec, const LightSinkField& field) {
  const int dn = scalar_channels(spec.n);
  const int so = so_dim(spec.n);
  Eigen::VectorXd c(spec.dim);
  for (int j = 0; j < spec.modes(); ++j) {
    for (int i = 0; i < dn; ++i) c[j * dn + i] = field.coords(i / so)(j, i % so);
  }
  return c;
}

Eigen::VectorXd prior_sd(const PriorSpec& spec, const CosineBasis& basis) {
  const int dn = scalar_channels(spec.n);
  Eigen::VectorXd sd(spec.dim);
  for (int j = 0; j < spec.modes(); ++j) sd.segment(j * dn, dn).setConstant(spec.mode_sd(basis, j));
  return sd;
}

LightSinkField sample_prior(const PriorSpec& spec, RandomStream& rng) {
  spec.validate();
  const CosineBasis basis(spec.basis_per_axis);
  const Eigen::VectorXd sd = prior_sd(spec, basis);
  Eigen::VectorXd c(spec.dim);
  for (int k = 0; k < spec.dim; ++k) c[k] = sd[k] * rng.normal();
  return field_from_coeffs(spec, basis, c);
}

LightSinkField reference_truth(const PriorSpec& spec, RandomStream& rng) {
  spec.validate();
  const CosineBasis basis(spec.basis_per_axis);
  const int dn = scalar_channels(spec.n);
  Eigen::VectorXd c(spec.dim);
  for (int k = 0; k < spec.dim; ++k) {
    c[k] = std::pow(basis.eigenvalue(k / dn), -spec.alpha / 2.0) * rng.normal();
  }
  return field_from_coeffs(spec, basis, c);
}

Dataset synthesize(const OneForm& truth, long count, const DiamondConfig& cfg, RandomStream& rng,
                   const SynthOptions& opts) {
  cfg.validate();
  Dataset d;
  d.n = truth.n();
  d.epsilon = cfg.epsilon;
  d.noise_sd = opts.noise_sd;
  d.steps = opts.steps;
  d.seed = rng.seed();
  d.observations.reserve(count);
  const TransportOptions to{opts.steps, false};
  for (long i = 0; i < count; ++i) {
    RandomStream s = rng.split(static_cast<std::uint64_t>(i));
    Observation ob;
    ob.path = sample_broken_path(cfg, s);
    ob.s_plus = scattering(truth, future_determined(ob.path.x, ob.path.y, cfg), to);
    ob.s_minus = scattering(truth, past_determined(ob.path.y, ob.path.z, cfg), to);
    for (int r = 0; r < d.n; ++r)
      for (int c = 0; c < d.n; ++c) ob.s_plus(r, c) += opts.noise_sd * s.normal();
    for (int r = 0; r < d.n; ++r)
      for (int c = 0; c < d.n; ++c) ob.s_minus(r, c) += opts.noise_sd * s.normal();
    d.observations.push_back(std::move(ob));
  }
  return d;
}

// Forward model with cached basis features

ForwardModel::ForwardModel(const Dataset& data, const PriorSpec& spec, const CosineBasis& basis,
                           int steps)
    : data_(data), n_(spec.n), modes_(spec.modes()), so_(so_dim(spec.n)) {
  if (steps < 1) throw Error(ErrorCode::InvalidConfig, "steps must be positive");
  if (data.n != spec.n) throw Error(ErrorCode::InvalidConfig, "dataset and prior disagree on n");
  const DiamondConfig cfg{data.epsilon, 1e-9};
  std::vector<double> vals(modes_);
  auto make_leg = [&](const Event& a, const Event& b) {
    const Segment seg(a, b);
    const Vec4 tau = seg.tangent();
    const double len = seg.length();
    Leg leg;
    leg.steps = steps;
    leg.h = len / steps;
    leg.features.assign(static_cast<std::size_t>(2 * steps + 1) * 3 * modes_, 0.0);
    double biggest = 0.0;
    const Vec3 tx = tau.tail<3>();
    const bool has_dir = tx.norm() > 1e-14;
    for (int k = 0; k <= 2 * steps; ++k) {
      const double s = 0.5 * leg.h * k;
      const Vec4 p = a.vec() + s * tau;
      const Vec3 x = p.tail<3>();
      const double r = x.norm();
      Vec3 xhat = Vec3::Zero();
      if (r >= 1e-9) {
        xhat = x / r;
      } else if (tau[0] != 0.0) {
        if (!has_dir) throw Error(ErrorCode::AxisUndefined, "leg runs along the axis");
        xhat = s < 0.5 * len ? Vec3(tx.normalized()) : Vec3(-tx.normalized());
      }
      basis.eval_all(p, vals);
      double* f = &leg.features[static_cast<std::size_t>(k) * 3 * modes_];
      for (int c = 0; c < 3; ++c) {
        const double w = tau[c + 1] + tau[0] * xhat[c];
        for (int j = 0; j < modes_; ++j) {
          f[c * modes_ + j] = w * vals[j];
          biggest = std::max(biggest, std::abs(w * vals[j]));
        }
      }
    }
    // A light-sink field is exactly trivial along rays into the axis.
    if (biggest < 1e-14) leg.steps = 0;
    return leg;
  };
  paths_.reserve(data.observations.size());
  for (const auto& ob : data.observations) {
    const auto ends = determined_endpoints(ob.path.y, cfg);
    PathCache pc;
    pc.plus.push_back(make_leg(ob.path.x, ob.path.y));
    pc.plus.push_back(make_leg(ob.path.y, ends.z_y));
    pc.minus.push_back(make_leg(ends.x_y, ob.path.y));
    pc.minus.push_back(make_leg(ob.path.y, ob.path.z));
    paths_.push_back(std::move(pc));
  }
}

Eigen::MatrixXd ForwardModel::coeff_matrix(const Eigen::VectorXd& coeffs) const {
  // rows: (spatial component c, mode j) -> c * modes + j; cols: so-coordinate
  const int dn = 3 * so_;
  Eigen::MatrixXd cm(3 * modes_, so_);
  for (int j = 0; j < modes_; ++j)
    for (int i = 0; i < dn; ++i) cm((i / so_) * modes_ + j, i % so_) = coeffs[j * dn + i];
  return cm;
}

namespace {

template <class M>
M skew_from(const double* c, int n) {
  M m = M::Zero(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j, ++k) {
      m(i, j) = c[k];
      m(j, i) = -c[k];
    }
  return m;
}

template <class M>
M node_matrix(const double* f, const Eigen::MatrixXd& cm, int n, int so) {
  double c[kMaxDim * (kMaxDim - 1) / 2] = {};
  const int rows = static_cast<int>(cm.rows());
  for (int r = 0; r < rows; ++r) {
    const double fr = f[r];
    if (fr == 0.0) continue;
    for (int a = 0; a < so; ++a) c[a] += fr * cm(r, a);
  }
  return skew_from<M>(c, n);
}

template <class M>
M transport_leg(int steps, double h, const std::vector<double>& features, int stride,
                const Eigen::MatrixXd& cm, int n, int so) {
  M u = M::Identity(n, n);
  if (steps == 0) return u;
  M m0 = node_matrix<M>(&features[0], cm, n, so);
  for (int k = 0; k < steps; ++k) {
    const M mh = node_matrix<M>(&features[static_cast<std::size_t>(2 * k + 1) * stride], cm, n, so);
    const M m1 = node_matrix<M>(&features[static_cast<std::size_t>(2 * k + 2) * stride], cm, n, so);
    const M k1 = -m0 * u;
    const M k2 = -mh * (u + 0.5 * h * k1);
    const M k3 = -mh * (u + 0.5 * h * k2);
    const M k4 = -m1 * (u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    m0 = m1;
  }
  return u;
}

// so(3) specialisation: coefficients as a flat row-major (3 * modes) x 3 array.
Eigen::Matrix3d transport_leg3(int steps, double h, const std::vector<double>& features, int stride,
                               const double* cm) {
  Eigen::Matrix3d u = Eigen::Matrix3d::Identity();
  if (steps == 0) return u;
  auto node = [&](int k) {
    const double* f = &features[static_cast<std::size_t>(k) * stride];
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    for (int r = 0; r < stride; ++r) {
      c0 += f[r] * cm[3 * r];
      c1 += f[r] * cm[3 * r + 1];
      c2 += f[r] * cm[3 * r + 2];
    }
    Eigen::Matrix3d m;
    m << 0.0, c0, c1, -c0, 0.0, c2, -c1, -c2, 0.0;
    return m;
  };
  Eigen::Matrix3d m0 = node(0);
  for (int k = 0; k < steps; ++k) {
    const Eigen::Matrix3d mh = node(2 * k + 1);
    const Eigen::Matrix3d m1 = node(2 * k + 2);
    const Eigen::Matrix3d k1 = -m0 * u;
    const Eigen::Matrix3d k2 = -mh * (u + 0.5 * h * k1);
    const Eigen::Matrix3d k3 = -mh * (u + 0.5 * h * k2);
    const Eigen::Matrix3d k4 = -m1 * (u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    m0 = m1;
  }
  return u;
}

}  // namespace

Mat ForwardModel::run_legs(const std::vector<Leg>& legs, const Eigen::MatrixXd& cmat) const {
  const int stride = 3 * modes_;
  if (n_ == 3) {
    const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> flat = cmat;
    Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
    for (const auto& leg : legs) s = transport_leg3(leg.steps, leg.h, leg.features, stride, flat.data()) * s;
    return Mat(s);
  }
  Mat s = identity(n_);
  for (const auto& leg : legs) s = transport_leg<Mat>(leg.steps, leg.h, leg.features, stride, cmat, n_, so_) * s;
  return s;
}

std::pair<Mat, Mat> ForwardModel::predict(int i, const Eigen::VectorXd& coeffs) const {
  const Eigen::MatrixXd cm = coeff_matrix(coeffs);
  return {run_legs(paths_.at(i).plus, cm), run_legs(paths_.at(i).minus, cm)};
}

double ForwardModel::misfit(const Eigen::VectorXd& coeffs) const {
  const Eigen::MatrixXd cm = coeff_matrix(coeffs);
  double sum = 0.0;
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    const auto& ob = data_.observations[i];
    sum += (ob.s_plus - run_legs(paths_[i].plus, cm)).squaredNorm();
    sum += (ob.s_minus - run_legs(paths_[i].minus, cm)).squaredNorm();
  }
  return 0.5 * sum;
}

double log_likelihood(const LightSinkField& a, const Dataset& data, const PriorSpec& spec) {
  const DiamondConfig cfg{data.epsilon, 1e-9};
  const TransportOptions to{data.steps, false};
  double misfit = 0.0;
  for (const auto& ob : data.observations) {
    const Mat sp = scattering(a, future_determined(ob.path.x, ob.path.y, cfg), to);
    const Mat sm = scattering(a, past_determined(ob.path.y, ob.path.z, cfg), to);
    misfit += (ob.s_plus - sp).squaredNorm() + (ob.s_minus - sm).squaredNorm();
  }
  const double h = sobolev_norm(a, spec.alpha);
  return -0.5 * misfit - 0.5 * penalty_weight(spec.alpha, data.size()) * h * h;
}

// Sampler

Potential::Potential(const Dataset& data, const PriorSpec& spec, int steps)
    : spec_(spec), basis_(spec.basis_per_axis) {
  spec_.validate();
  sd_ = prior_sd(spec_, basis_);
  const double w = penalty_weight(spec_.alpha, data.size());
  const int dn = scalar_channels(spec_.n);
  penalty_diag_.resize(spec_.dim);
  for (int k = 0; k < spec_.dim; ++k) {
    penalty_diag_[k] = w * std::pow(basis_.eigenvalue(k / dn), spec_.alpha) * sd_[k] * sd_[k];
  }
  if (data.size() > 0) model_.emplace(data, spec_, basis_, steps);
}

Eigen::VectorXd Potential::unwhiten(const Eigen::VectorXd& whitened) const {
  return sd_.cwiseProduct(whitened);
}

double Potential::operator()(const Eigen::VectorXd& whitened) const {
  const double pen = 0.5 * penalty_diag_.dot(whitened.cwiseProduct(whitened));
  if (!model_) return pen;
  return model_->misfit(unwhiten(whitened)) + pen;
}

ChainState initial_state(const Potential& phi, double beta) {
  ChainState s;
  s.coeffs = Eigen::VectorXd::Zero(phi.dim());
  s.potential = phi(s.coeffs);
  s.log_post = -s.potential;
  s.beta = beta;
  return s;
}

bool pcn_step(ChainState& state, const Potential& phi, double beta, RandomStream& rng) {
  Eigen::VectorXd xi(state.coeffs.size());
  for (int k = 0; k < xi.size(); ++k) xi[k] = rng.normal();
  const Eigen::VectorXd prop = std::sqrt(1.0 - beta * beta) * state.coeffs + beta * xi;
  const double u = rng.uniform();
  ++state.steps;
  state.beta = beta;
  const double next = phi(prop);
  state.last_proposal_finite = std::isfinite(next);
  if (!state.last_proposal_finite) return false;
  if (std::log(u) < state.potential - next) {
    state.coeffs = prop;
    state.potential = next;
    state.log_post = -next;
    ++state.accept_count;
    return true;
  }
  return false;
}

double effective_sample_size(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / n;
  };
  const double c0 = autocov(0);
  if (c0 <= 0.0) return static_cast<double>(n);
  double tau = -1.0;  // tau = -1 + 2 * sum of positive pair sums
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return static_cast<double>(n) / std::max(tau, 1.0 / n);
}

PosteriorSummary run_inversion(const Dataset& data, const PriorSpec& spec,
                               const InversionOptions& opts, RandomStream& rng,
                               const LightSinkField* truth) {
  if (opts.iters <= opts.burn_in) throw Error(ErrorCode::InvalidConfig, "iters must exceed burn_in");
  if (!(opts.beta0 > 0.0 && opts.beta0 <= 1.0)) throw Error(ErrorCode::InvalidConfig, "beta in (0, 1]");
  const Potential phi(data, spec, opts.steps);
  ChainState st = initial_state(phi, opts.beta0);
  if (!std::isfinite(st.potential)) throw Error(ErrorCode::DivergentChain, "initial potential is not finite");

  PosteriorSummary out{field_from_coeffs(spec, phi.basis(), Eigen::VectorXd::Zero(spec.dim)),
                       Eigen::VectorXd::Zero(spec.dim), Eigen::VectorXd::Zero(spec.dim),
                       std::nullopt, 0.0, 0.0, 0.0, {}, {}};
  double beta = opts.beta0;
  long window_accepts = 0, window = 0, post_accepts = 0, post_count = 0;
  int bad = 0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(spec.dim), m2 = Eigen::VectorXd::Zero(spec.dim);
  std::vector<double> lp_trace;
  for (long it = 0; it < opts.iters; ++it) {
    const bool acc = pcn_step(st, phi, beta, rng);
    bad = st.last_proposal_finite ? 0 : bad + 1;
    if (bad > opts.divergence_limit) throw Error(ErrorCode::DivergentChain, "repeated non-finite potential");
    const bool burning = it < opts.burn_in;
    if (burning) {
      window_accepts += acc;
      if (++window == 50) {
        const double rate = static_cast<double>(window_accepts) / window;
        beta = std::clamp(beta * std::exp(rate - opts.target_accept), 1e-4, 1.0);
        window = window_accepts = 0;
      }
    } else {
      ++post_count;
      post_accepts += acc;
      const Eigen::VectorXd c = phi.unwhiten(st.coeffs);
      const Eigen::VectorXd delta = c - mean;
      mean += delta / static_cast<double>(post_count);
      m2 += delta.cwiseProduct(c - mean);
      lp_trace.push_back(st.log_post);
      if (opts.keep_samples && (post_count - 1) % std::max(opts.thin, 1) == 0) out.samples.push_back(c);
    }
    double err = std::numeric_limits<double>::quiet_NaN();
    if (truth) err = sobolev_norm(field_from_coeffs(spec, phi.basis(), phi.unwhiten(st.coeffs)) - *truth, 0.0);
    out.trace.push_back({it, st.log_post, acc, err});
  }
  out.mean_coeffs = mean;
  out.var_coeffs = post_count > 1 ? Eigen::VectorXd(m2 / static_cast<double>(post_count - 1))
                                  : Eigen::VectorXd::Zero(spec.dim);
  out.mean = field_from_coeffs(spec, phi.basis(), mean);
  if (truth) out.l2_error = sobolev_norm(out.mean - *truth, 0.0);
  out.acceptance_rate = post_count > 0 ? static_cast<double>(post_accepts) / post_count : 0.0;
  out.beta = beta;
  out.ess = effective_sample_size(lp_trace);
  return out;
}

}  // namespace bxr
