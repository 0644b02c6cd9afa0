#include "bxr/connection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bxr/error.hpp"

namespace bxr {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

// Per-axis factors w_k cos(pi k (xi + 1) / 2), w_0 = 1, w_k = sqrt 2, and their
// derivatives. The overall 1/4 is applied in the product.
struct AxisTable {
  std::array<std::array<double, 8>, 4> val{};
  std::array<std::array<double, 8>, 4> der{};
};

void fill_table(const Vec4& p, int per_axis, AxisTable& tab, bool with_der) {
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < per_axis; ++k) {
      const double w = k == 0 ? 1.0 : std::numbers::sqrt2;
      const double arg = kHalfPi * k * (p[i] + 1.0);
      tab.val[i][k] = w * std::cos(arg);
      if (with_der) tab.der[i][k] = -w * kHalfPi * k * std::sin(arg);
    }
  }
}

}  // namespace

Mat OneForm::derivative(const Vec4& p, const Vec4& dir, const Vec4& v) const {
  const double h = fd_step;
  return (eval(p + h * dir, v) - eval(p - h * dir, v)) / (2.0 * h);
}

CosineBasis::CosineBasis(int per_axis) : per_axis_(per_axis) {
  if (per_axis < 1 || per_axis > 8) throw Error(ErrorCode::InvalidConfig, "basis per_axis in [1, 8]");
  for (int a = 0; a < per_axis; ++a)
    for (int b = 0; b < per_axis; ++b)
      for (int c = 0; c < per_axis; ++c)
        for (int d = 0; d < per_axis; ++d) modes_.push_back({a, b, c, d});
  auto lambda = [](const std::array<int, 4>& k) {
    const int s = k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + k[3] * k[3];
    return s == 0 ? 1.0 : kHalfPi * kHalfPi * s;
  };
  std::stable_sort(modes_.begin(), modes_.end(), [&](const auto& l, const auto& r) {
    const double ll = lambda(l), lr = lambda(r);
    if (ll != lr) return ll < lr;
    return l < r;
  });
  for (const auto& k : modes_) eigenvalues_.push_back(lambda(k));
}

const std::array<int, 4>& CosineBasis::mode(int j) const {
  if (j < 0 || j >= size()) throw Error(ErrorCode::IndexOutOfRange, "basis mode index");
  return modes_[j];
}

double CosineBasis::eigenvalue(int j) const {
  if (j < 0 || j >= size()) throw Error(ErrorCode::IndexOutOfRange, "basis mode index");
  return eigenvalues_[j];
}

int CosineBasis::index_of(const std::array<int, 4>& k) const {
  const auto it = std::find(modes_.begin(), modes_.end(), k);
  if (it == modes_.end()) throw Error(ErrorCode::IndexOutOfRange, "mode not in basis");
  return static_cast<int>(it - modes_.begin());
}

double CosineBasis::eval(int j, const Vec4& p) const {
  const auto& k = mode(j);
  double v = 0.25;
  for (int i = 0; i < 4; ++i) {
    v *= std::cos(kHalfPi * k[i] * (p[i] + 1.0)) * (k[i] == 0 ? 1.0 : std::numbers::sqrt2);
  }
  return v;
}

void CosineBasis::eval_all(const Vec4& p, std::span<double> out) const {
  if (static_cast<int>(out.size()) > size()) throw Error(ErrorCode::IndexOutOfRange, "too many modes");
  AxisTable tab;
  fill_table(p, per_axis_, tab, false);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& k = modes_[j];
    out[j] = 0.25 * tab.val[0][k[0]] * tab.val[1][k[1]] * tab.val[2][k[2]] * tab.val[3][k[3]];
  }
}

void CosineBasis::eval_with_gradient(const Vec4& p, std::span<double> values,
                                     std::span<Vec4> grads) const {
  if (static_cast<int>(values.size()) > size() || grads.size() < values.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "too many modes");
  }
  AxisTable tab;
  fill_table(p, per_axis_, tab, true);
  for (std::size_t j = 0; j < values.size(); ++j) {
    const auto& k = modes_[j];
    const double v0 = tab.val[0][k[0]], v1 = tab.val[1][k[1]];
    const double v2 = tab.val[2][k[2]], v3 = tab.val[3][k[3]];
    values[j] = 0.25 * v0 * v1 * v2 * v3;
    grads[j] = 0.25 * Vec4(tab.der[0][k[0]] * v1 * v2 * v3, v0 * tab.der[1][k[1]] * v2 * v3,
                           v0 * v1 * tab.der[2][k[2]] * v3, v0 * v1 * v2 * tab.der[3][k[3]]);
  }
}

// ConnectionField

ConnectionField::ConnectionField(int n, CosineBasis basis) : n_(n), basis_(std::move(basis)) {
  if (n < 2 || n > kMaxDim) throw Error(ErrorCode::InvalidConfig, "matrix size out of range");
  for (auto& c : coords_) c = Eigen::MatrixXd::Zero(basis_.size(), so_dim(n));
}

void ConnectionField::set_coeff(int axis, int mode, const Mat& skew) {
  if (axis < 0 || axis > 3 || mode < 0 || mode >= basis_.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "coefficient index");
  }
  coords_[axis].row(mode) = so_coords(skew).transpose();
}

Mat ConnectionField::coeff(int axis, int mode) const {
  const Eigen::VectorXd c = coords_.at(axis).row(mode).transpose();
  return so_from_coords(n_, c.data());
}

Mat ConnectionField::component(int axis, const Vec4& p) const {
  Eigen::VectorXd vals(basis_.size());
  basis_.eval_all(p, {vals.data(), static_cast<std::size_t>(vals.size())});
  const Eigen::VectorXd c = coords_.at(axis).transpose() * vals;
  return so_from_coords(n_, c.data());
}

Mat ConnectionField::eval(const Vec4& p, const Vec4& v, const Vec3*) const {
  Eigen::VectorXd vals(basis_.size());
  basis_.eval_all(p, {vals.data(), static_cast<std::size_t>(vals.size())});
  Eigen::VectorXd c = Eigen::VectorXd::Zero(so_dim(n_));
  for (int mu = 0; mu < 4; ++mu) {
    if (v[mu] != 0.0) c += v[mu] * (coords_[mu].transpose() * vals);
  }
  return so_from_coords(n_, c.data());
}

Mat ConnectionField::derivative(const Vec4& p, const Vec4& dir, const Vec4& v) const {
  const int m = basis_.size();
  Eigen::VectorXd vals(m);
  std::vector<Vec4> grads(m);
  basis_.eval_with_gradient(p, {vals.data(), static_cast<std::size_t>(m)}, grads);
  Eigen::VectorXd dd(m);
  for (int j = 0; j < m; ++j) dd[j] = grads[j].dot(dir);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(so_dim(n_));
  for (int mu = 0; mu < 4; ++mu) {
    if (v[mu] != 0.0) c += v[mu] * (coords_[mu].transpose() * dd);
  }
  return so_from_coords(n_, c.data());
}

ConnectionField& ConnectionField::operator+=(const ConnectionField& other) {
  for (int mu = 0; mu < 4; ++mu) coords_[mu] += other.coords_[mu];
  return *this;
}

ConnectionField& ConnectionField::operator-=(const ConnectionField& other) {
  for (int mu = 0; mu < 4; ++mu) coords_[mu] -= other.coords_[mu];
  return *this;
}

ConnectionField& ConnectionField::operator*=(double s) {
  for (auto& c : coords_) c *= s;
  return *this;
}

ConnectionField operator-(ConnectionField a, const ConnectionField& b) { return a -= b; }
ConnectionField operator+(ConnectionField a, const ConnectionField& b) { return a += b; }

// LightSinkField

LightSinkField::LightSinkField(int n, CosineBasis basis, double r_axis_tol)
    : n_(n), basis_(std::move(basis)), r_axis_tol_(r_axis_tol) {
  if (n < 2 || n > kMaxDim) throw Error(ErrorCode::InvalidConfig, "matrix size out of range");
  for (auto& c : coords_) c = Eigen::MatrixXd::Zero(basis_.size(), so_dim(n));
}

void LightSinkField::set_coeff(int spatial_axis, int mode, const Mat& skew) {
  if (spatial_axis < 0 || spatial_axis > 2 || mode < 0 || mode >= basis_.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "coefficient index");
  }
  coords_[spatial_axis].row(mode) = so_coords(skew).transpose();
}

Mat LightSinkField::coeff(int spatial_axis, int mode) const {
  const Eigen::VectorXd c = coords_.at(spatial_axis).row(mode).transpose();
  return so_from_coords(n_, c.data());
}

Mat LightSinkField::spatial_component(int spatial_axis, const Vec4& p) const {
  Eigen::VectorXd vals(basis_.size());
  basis_.eval_all(p, {vals.data(), static_cast<std::size_t>(vals.size())});
  const Eigen::VectorXd c = coords_.at(spatial_axis).transpose() * vals;
  return so_from_coords(n_, c.data());
}

Mat LightSinkField::eval(const Vec4& p, const Vec4& v, const Vec3* approach) const {
  const Vec3 x = p.tail<3>();
  const double r = x.norm();
  Vec3 xhat;
  if (r < r_axis_tol_) {
    if (v[0] == 0.0) {
      xhat.setZero();
    } else if (approach == nullptr) {
      throw Error(ErrorCode::AxisUndefined, "light-sink time component on the axis");
    } else {
      xhat = approach->normalized();
    }
  } else {
    xhat = x / r;
  }
  Eigen::VectorXd vals(basis_.size());
  basis_.eval_all(p, {vals.data(), static_cast<std::size_t>(vals.size())});
  Eigen::VectorXd c = Eigen::VectorXd::Zero(so_dim(n_));
  for (int i = 0; i < 3; ++i) {
    const double w = v[i + 1] + v[0] * xhat[i];
    if (w != 0.0) c += w * (coords_[i].transpose() * vals);
  }
  return so_from_coords(n_, c.data());
}

LightSinkField& LightSinkField::operator-=(const LightSinkField& other) {
  for (int i = 0; i < 3; ++i) coords_[i] -= other.coords_[i];
  return *this;
}

LightSinkField operator-(LightSinkField a, const LightSinkField& b) { return a -= b; }

Mat curvature(const OneForm& a, const Vec4& p, const Vec4& u, const Vec4& v) {
  const Mat au = a.eval(p, u), av = a.eval(p, v);
  return a.derivative(p, u, v) - a.derivative(p, v, u) + au * av - av * au;
}

static double weighted_norm(const Eigen::MatrixXd& coords, const CosineBasis& basis, double s) {
  double sum = 0.0;
  for (int j = 0; j < coords.rows(); ++j) {
    sum += std::pow(basis.eigenvalue(j), s) * coords.row(j).squaredNorm();
  }
  return sum;
}

double sobolev_norm(const ConnectionField& a, double s) {
  double sum = 0.0;
  for (int mu = 0; mu < 4; ++mu) sum += weighted_norm(a.coords(mu), a.basis(), s);
  return std::sqrt(sum);
}

double sobolev_norm(const LightSinkField& a, double s) {
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += weighted_norm(a.coords(i), a.basis(), s);
  return std::sqrt(sum);
}

ConnectionField random_connection(int n, const CosineBasis& basis, RandomStream& rng,
                                  double coeff_norm) {
  ConnectionField a(n, basis);
  double sq = 0.0;
  for (int mu = 0; mu < 4; ++mu) {
    auto& c = a.coords(mu);
    for (int j = 0; j < c.rows(); ++j)
      for (int k = 0; k < c.cols(); ++k) c(j, k) = rng.normal();
    sq += c.squaredNorm();
  }
  a *= coeff_norm / std::sqrt(sq);
  return a;
}

LightSinkField random_lightsink(int n, const CosineBasis& basis, RandomStream& rng,
                                double coeff_norm) {
  LightSinkField a(n, basis);
  double sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto& c = a.coords(i);
    for (int j = 0; j < c.rows(); ++j)
      for (int k = 0; k < c.cols(); ++k) c(j, k) = rng.normal();
    sq += c.squaredNorm();
  }
  const double s = coeff_norm / std::sqrt(sq);
  for (int i = 0; i < 3; ++i) a.coords(i) *= s;
  return a;
}

ConnectionField constant_time_connection(const Mat& m, const CosineBasis& basis) {
  ConnectionField a(static_cast<int>(m.rows()), basis);
  // the constant mode is 1/4 on the box
  a.set_coeff(0, basis.index_of({0, 0, 0, 0}), 4.0 * m);
  return a;
}

double pointwise_norm(const OneForm& a, const Vec4& p) {
  std::vector<Mat> images;
  for (int mu = 0; mu < 4; ++mu) images.push_back(a.eval(p, Vec4::Unit(mu)));
  return operator_norm4(images);
}

}  // namespace bxr
