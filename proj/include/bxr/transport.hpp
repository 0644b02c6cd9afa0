#pragma once

// Parallel transport along straight segments (fixed-step RK4), scattering
// data of broken rays, attenuated X-ray transforms and their broken variant,
// the endomorphism connection E(A,B)Q = AQ - QB and the potential p.

#include <utility>
#include <vector>

#include "bxr/connection.hpp"
#include "bxr/geometry.hpp"

namespace bxr {

struct TransportOptions {
  int steps = 256;
  bool reproject = false;
};

/// Straight segment traversed from a to b.
struct Segment {
  Event a, b;

  Segment(const Event& a_, const Event& b_);
  double length() const;
  Vec4 tangent() const;  // Euclidean unit
};

struct TransportResult {
  Mat u;
  double drift = 0.0;  // ||u^T u - I||_F
  int steps = 0;
};

/// P^A along a -> b: solution of U' + A(gamma')U = 0, U(0) = I.
TransportResult parallel_transport(const OneForm& a, const Segment& seg,
                                   const TransportOptions& opts = {});

/// Transport from a to every full-step node (u[k] at arclength k*h).
struct TransportTrajectory {
  std::vector<Mat> u;
  double length = 0.0;
  double h = 0.0;
  Vec4 tangent;
};
TransportTrajectory transport_trajectory(const OneForm& a, const Segment& seg,
                                         const TransportOptions& opts = {});

/// S^A = P_{z<-y} P_{y<-x}.
Mat scattering(const OneForm& a, const BrokenPath& path, const TransportOptions& opts = {});

struct ScatteringResult {
  Mat s;
  double drift = 0.0;
};
ScatteringResult scattering_with_drift(const OneForm& a, const BrokenPath& path,
                                       const TransportOptions& opts = {});

/// I^A_gamma(omega) = int P^A_{gamma(0)<-gamma(t)} omega(gamma') dt, from the
/// inhomogeneous ODE u' + A u = -omega, u(0) = 0 and I = -(P^A)^-1 u(T).
Mat attenuated_xray(const OneForm& a, const OneForm& omega, const Segment& seg,
                    const TransportOptions& opts = {});

/// E(A,B)Q = A Q - Q B acting on n x n matrices.
struct EndoConnection {
  const OneForm& a;
  const OneForm& b;
};

Mat attenuated_xray(const EndoConnection& e, const OneForm& omega, const Segment& seg,
                    const TransportOptions& opts = {});

/// I_{y<-x}(omega) + P_{x<-y} I_{z<-y}(omega).
Mat broken_xray(const OneForm& a, const OneForm& omega, const BrokenPath& path,
                const TransportOptions& opts = {});
Mat broken_xray(const EndoConnection& e, const OneForm& omega, const BrokenPath& path,
                const TransportOptions& opts = {});

/// Transport of E(A,B): Q -> P^A Q (P^B)^-1, assembled from the two factors.
struct EndoTransport {
  Mat pa, pb;

  Mat apply(const Mat& q) const;
  Mat apply_inverse(const Mat& q) const;
  /// n^2 x n^2 matrix acting on column-major vec(Q).
  Eigen::MatrixXd matrix() const;
};
EndoTransport endo_transport(const EndoConnection& e, const Segment& seg,
                             const TransportOptions& opts = {});

/// p_(A,B)(y) = Id - P^A_{y<-z_y} P^B_{z_y<-y}; zero on the axis.
Mat potential_p(const OneForm& a, const OneForm& b, const Event& y,
                const TransportOptions& opts = {});

/// Same quantity from its integral definition P^E_{y<-z_y} I^E_{y<-z_y}(A - B).
Mat potential_p_integral(const OneForm& a, const OneForm& b, const Event& y,
                         const TransportOptions& opts = {});

/// (d_E p)_y(v) = dp(v) + A(v) p - p B(v), dp by central differences of step h.
Mat covariant_dp(const OneForm& a, const OneForm& b, const Event& y, const Vec4& v,
                 const TransportOptions& opts = {}, double h = 1e-5);

/// Frobenius norm of (S^A)^-1 S^B - I - I^{E(A,B)}_{z<-y<-x}(A - B).
double pseudolin_residual(const OneForm& a, const OneForm& b, const BrokenPath& path,
                          const TransportOptions& opts = {});

/// d/ds P^A along the segments a + s v1 -> b + s v2 at s = 0, from the
/// boundary terms and the curvature integral (Simpson on the transport grid).
Mat transport_derivative(const OneForm& a, const Segment& seg, const Vec4& v1, const Vec4& v2,
                         const TransportOptions& opts = {});

/// Several variations of the same segment, sharing one transport solve.
std::vector<Mat> transport_derivatives(const OneForm& a, const Segment& seg,
                                       const std::vector<std::pair<Vec4, Vec4>>& variations,
                                       const TransportOptions& opts = {});

/// Spatial approach direction used at node s of a segment of length T.
Vec3 approach_direction(const Vec4& tangent, double s, double length);

}  // namespace bxr
