#pragma once

// Light-sink projection rho(A) = A <| P^A_{y<-z_y}, the gauge-invariant
// discrepancy Delta(A,B) = A - B - d_{E(A,B)} p, and recovery of a gauge from
// scattering data of a light-sink connection and of a general one.

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "bxr/gauge.hpp"
#include "bxr/transport.hpp"

namespace bxr {

/// rho(A)_p(e_mu) for the four coordinate directions. Throws AxisPoint on the axis.
std::array<Mat, 4> rho_map(const OneForm& a, const Event& p, const TransportOptions& opts = {},
                           double r_axis_tol = 1e-9);

/// rho(A)_p(v).
Mat rho_eval(const OneForm& a, const Event& p, const Vec4& v, const TransportOptions& opts = {},
             double r_axis_tol = 1e-9);

/// rho(A) as a one-form (evaluated on demand).
class RhoConnection final : public OneForm {
 public:
  RhoConnection(const OneForm& a, TransportOptions opts = {}) : a_(a), opts_(opts) {}
  int n() const override { return a_.n(); }
  /// On the axis the value is the limit along `approach`.
  Mat eval(const Vec4& p, const Vec4& v, const Vec3* approach = nullptr) const override;
  bool axis_singular() const override { return true; }

 private:
  const OneForm& a_;
  TransportOptions opts_;
};

/// Gauge field y -> P^A_{y<-z_y} (identity on the axis).
class LightRayGauge final : public GaugeField {
 public:
  LightRayGauge(const OneForm& a, TransportOptions opts = {}) : a_(a), opts_(opts) {}
  int n() const override { return a_.n(); }
  Mat value(const Vec4& p) const override;
  Mat differential(const Vec4& p, const Vec4& v) const override;

 private:
  const OneForm& a_;
  TransportOptions opts_;
};

/// Delta(A,B) = A - B - d_{E(A,B)} p_(A,B).
class DeltaEvaluator {
 public:
  DeltaEvaluator(const OneForm& a, const OneForm& b, TransportOptions opts = {},
                 double fd_step = 1e-5)
      : a_(a), b_(b), opts_(opts), h_(fd_step) {}

  Mat form(const Event& y, const Vec4& v) const;
  /// Images of the four coordinate directions (Delta is linear in v).
  std::array<Mat, 4> map(const Event& y) const;

 private:
  const OneForm& a_;
  const OneForm& b_;
  TransportOptions opts_;
  double h_;
};

/// Operator norm over Euclidean-unit v of a linear map given by its four
/// coordinate images: best of a 24-point sphere design refined by power
/// iteration.
double operator_norm_design(const std::array<Mat, 4>& images);

/// ||Delta(A,B)_y||. Throws AxisPoint on the axis.
double delta_norm(const OneForm& a, const OneForm& b, const Event& y,
                  const TransportOptions& opts = {});

/// ||rho(A)_y - rho(B)_y||.
double rho_distance(const OneForm& a, const OneForm& b, const Event& y,
                    const TransportOptions& opts = {});

/// Frobenius residuals at (y, v) of
///   (i)   Delta(A,B)^T - Delta(B,A)
///   (ii)  Delta(A<|phi, B) - phi^-1 Delta(A,B)
///   (iii) Delta(A<|phi, B<|psi) - phi^-1 Delta(A,B) psi.
std::array<double, 3> delta_covariance_check(const OneForm& a, const OneForm& b, const GaugeField& phi,
                                        const GaugeField& psi, const Event& y, const Vec4& v,
                                        const TransportOptions& opts = {});

struct ExtensionOp {
  double clamp_radius = 0.25;     // data radius; values beyond are radially clamped
  double axis_tolerance = 1e-8;   // precondition: phi = Id on the axis
};

/// Extension of a tube gauge to the diamond: radial/temporal clamp into the
/// tube followed by polar projection onto the orthogonal group.
class ExtendedGauge final : public GaugeField {
 public:
  ExtendedGauge(const GaugeField& tube_data, ExtensionOp op);
  int n() const override { return data_.n(); }
  Mat value(const Vec4& p) const override;
  /// Point of the tube whose data is used at p.
  Vec4 clamp(const Vec4& p) const;

 private:
  const GaugeField& data_;
  ExtensionOp op_;
};

/// Checks the axis precondition and wraps the data. Throws PreconditionViolated.
ExtendedGauge extend(const GaugeField& tube_data, const ExtensionOp& op);

using ScatteringOracle = std::function<Mat(const BrokenPath&)>;

/// Tube values of P^B_{z_q<-q} recovered from the two oracles: on the
/// x-side from future-determined rays, on the z-side from past-determined
/// ones, averaged (and compared) where both apply.
class StitchedTubeGauge final : public GaugeField {
 public:
  StitchedTubeGauge(int n, ScatteringOracle sa, ScatteringOracle sb, DiamondConfig cfg,
                    double tolerance = 1e-4);

  int n() const override { return n_; }
  Mat value(const Vec4& p) const override;

  struct Pieces {
    std::optional<Mat> from_x;
    std::optional<Mat> from_z;
  };
  Pieces pieces(const Vec4& q) const;

  /// Break point used for a tube point on the given side, if any.
  std::optional<Event> break_point(const Event& q, Fiber side) const;

  double max_disagreement() const { return max_disagreement_; }
  double tolerance() const { return tolerance_; }

 private:
  int n_;
  ScatteringOracle sa_, sb_;
  DiamondConfig cfg_;
  double tolerance_;
  double ray_radius_;
  mutable double max_disagreement_ = 0.0;
};

struct RecoveryDiagnostics {
  double max_disagreement = 0.0;
  int overlap_samples = 0;
  double axis_deviation = 0.0;
};

struct RecoveredGauge {
  std::unique_ptr<StitchedTubeGauge> data;
  std::unique_ptr<ExtendedGauge> phi;
  RecoveryDiagnostics diagnostics;
};

/// From scattering oracles of a light-sink A and of B with A = B <| P^B_{y<-z_y},
/// build Phi with A <| Phi gauge-equivalent to B. Probes `probe_samples` tube
/// points; throws InconsistentData when the two sides disagree beyond 1e-4.
RecoveredGauge recover_gauge(int n, ScatteringOracle sa, ScatteringOracle sb,
                             const DiamondConfig& cfg, const ExtensionOp& op, RandomStream& rng,
                             int probe_samples = 64);

/// Least-squares light-sink field matching the spatial components of a one-form
/// on random off-axis points of the diamond.
struct LightSinkFit {
  LightSinkField field;
  double relative_residual;
};
LightSinkFit fit_lightsink(const OneForm& form, const CosineBasis& basis, int samples,
                           RandomStream& rng);

}  // namespace bxr
