#pragma once

// so(n)-valued one-forms on the diamond: a common evaluation interface plus
// the concrete fields built on a separable cosine basis of [-1,1]^4.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "bxr/linalg.hpp"
#include "bxr/random.hpp"

namespace bxr {

/// Matrix-valued one-form: (p, v) -> A_p(v). Connections, differences of
/// connections and gauge-transformed connections all share this interface.
///
/// `approach` is the spatial unit direction along which an on-axis point is
/// reached; only fields with a radial singularity on the axis consult it.
class OneForm {
 public:
  virtual ~OneForm() = default;

  virtual int n() const = 0;
  virtual Mat eval(const Vec4& p, const Vec4& v, const Vec3* approach = nullptr) const = 0;

  /// (d/ds) A_{p + s*dir}(v) at s = 0. Central differences unless overridden.
  virtual Mat derivative(const Vec4& p, const Vec4& dir, const Vec4& v) const;

  /// True for forms that are only direction-continuous at the axis (light-sink
  /// type); curvature is then never evaluated on the axis itself.
  virtual bool axis_singular() const { return false; }

  /// Step for the default derivative.
  double fd_step = 1e-5;
};

using Connection = OneForm;

/// Neumann cosine modes of the box [-1,1]^4, ordered by eigenvalue then
/// lexicographically. Eigenvalue of mode k is (pi/2)^2 |k|^2, except the
/// constant mode which is assigned 1.
class CosineBasis {
 public:
  explicit CosineBasis(int per_axis = 2);

  int per_axis() const { return per_axis_; }
  int size() const { return static_cast<int>(modes_.size()); }
  const std::array<int, 4>& mode(int j) const;
  double eigenvalue(int j) const;
  int index_of(const std::array<int, 4>& k) const;

  /// e_j(p); L2([-1,1]^4)-orthonormal.
  double eval(int j, const Vec4& p) const;

  /// e_0..e_{count-1} at p into out.
  void eval_all(const Vec4& p, std::span<double> out) const;

  /// Values and gradients of the first out.size() modes.
  void eval_with_gradient(const Vec4& p, std::span<double> values, std::span<Vec4> grads) const;

 private:
  int per_axis_;
  std::vector<std::array<int, 4>> modes_;
  std::vector<double> eigenvalues_;
};

/// General connection: four component fields A_t, A_x1, A_x2, A_x3, each a
/// cosine expansion with so(n) coefficients (stored as so-coordinates).
class ConnectionField final : public OneForm {
 public:
  ConnectionField(int n, CosineBasis basis);

  int n() const override { return n_; }
  const CosineBasis& basis() const { return basis_; }

  void set_coeff(int axis, int mode, const Mat& skew);
  Mat coeff(int axis, int mode) const;

  /// Raw so-coordinates, rows = modes, cols = so_dim(n).
  const Eigen::MatrixXd& coords(int axis) const { return coords_[axis]; }
  Eigen::MatrixXd& coords(int axis) { return coords_[axis]; }

  /// Component matrix A_axis(p).
  Mat component(int axis, const Vec4& p) const;

  Mat eval(const Vec4& p, const Vec4& v, const Vec3* approach = nullptr) const override;
  Mat derivative(const Vec4& p, const Vec4& dir, const Vec4& v) const override;

  ConnectionField& operator+=(const ConnectionField& other);
  ConnectionField& operator-=(const ConnectionField& other);
  ConnectionField& operator*=(double s);

 private:
  int n_;
  CosineBasis basis_;
  std::array<Eigen::MatrixXd, 4> coords_;
};

ConnectionField operator-(ConnectionField a, const ConnectionField& b);
ConnectionField operator+(ConnectionField a, const ConnectionField& b);

/// Light-sink connection: only the spatial components are stored; the time
/// component is A_t = sum_i A_i x_i / |x|, so A(d_t) = A(d_r) off the axis.
class LightSinkField final : public OneForm {
 public:
  LightSinkField(int n, CosineBasis basis, double r_axis_tol = 1e-9);

  int n() const override { return n_; }
  const CosineBasis& basis() const { return basis_; }
  double r_axis_tol() const { return r_axis_tol_; }

  void set_coeff(int spatial_axis, int mode, const Mat& skew);  // spatial_axis in {0,1,2}
  Mat coeff(int spatial_axis, int mode) const;

  const Eigen::MatrixXd& coords(int spatial_axis) const { return coords_[spatial_axis]; }
  Eigen::MatrixXd& coords(int spatial_axis) { return coords_[spatial_axis]; }

  Mat spatial_component(int spatial_axis, const Vec4& p) const;

  /// Throws AxisUndefined on the axis without an approach direction.
  Mat eval(const Vec4& p, const Vec4& v, const Vec3* approach = nullptr) const override;
  bool axis_singular() const override { return true; }

  /// A_t is not a finite cosine expansion, so derivatives use the default
  /// differences.

  LightSinkField& operator-=(const LightSinkField& other);

 private:
  int n_;
  CosineBasis basis_;
  double r_axis_tol_;
  std::array<Eigen::MatrixXd, 3> coords_;
};

LightSinkField operator-(LightSinkField a, const LightSinkField& b);

/// A - B as a one-form.
class DifferenceForm final : public OneForm {
 public:
  DifferenceForm(const OneForm& a, const OneForm& b) : a_(a), b_(b) {}
  int n() const override { return a_.n(); }
  Mat eval(const Vec4& p, const Vec4& v, const Vec3* approach = nullptr) const override {
    return a_.eval(p, v, approach) - b_.eval(p, v, approach);
  }
  Mat derivative(const Vec4& p, const Vec4& dir, const Vec4& v) const override {
    return a_.derivative(p, dir, v) - b_.derivative(p, dir, v);
  }
  bool axis_singular() const override { return a_.axis_singular() || b_.axis_singular(); }

 private:
  const OneForm& a_;
  const OneForm& b_;
};

/// The zero connection.
class ZeroForm final : public OneForm {
 public:
  explicit ZeroForm(int n) : n_(n) {}
  int n() const override { return n_; }
  Mat eval(const Vec4&, const Vec4&, const Vec3* = nullptr) const override { return zeros(n_); }
  Mat derivative(const Vec4&, const Vec4&, const Vec4&) const override { return zeros(n_); }

 private:
  int n_;
};

/// Curvature F_A(u, v) = (d_u A)(v) - (d_v A)(u) + [A(u), A(v)].
Mat curvature(const OneForm& a, const Vec4& p, const Vec4& u, const Vec4& v);

/// sqrt(sum over components, so-coordinates and modes of lambda_j^s c^2).
double sobolev_norm(const ConnectionField& a, double s);
double sobolev_norm(const LightSinkField& a, double s);

/// Random field whose coefficient L2 norm equals coeff_norm.
ConnectionField random_connection(int n, const CosineBasis& basis, RandomStream& rng,
                                  double coeff_norm);
LightSinkField random_lightsink(int n, const CosineBasis& basis, RandomStream& rng,
                                double coeff_norm);

/// Field A = M dt with constant M.
ConnectionField constant_time_connection(const Mat& m, const CosineBasis& basis);

/// Operator norm of the one-form at p over Euclidean-unit v.
double pointwise_norm(const OneForm& a, const Vec4& p);

}  // namespace bxr
