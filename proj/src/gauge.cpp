#include "bxr/gauge.hpp"

#include <cmath>

#include "bxr/error.hpp"

namespace bxr {

Mat GaugeField::differential(const Vec4& p, const Vec4& v) const {
  const double h = fd_step;
  return (value(p + h * v) - value(p - h * v)) / (2.0 * h);
}

double PolynomialField::value(const Vec4& p) const {
  double sum = 0.0;
  for (const auto& term : terms_) {
    double m = term.coeff;
    for (int i = 0; i < 4; ++i) m *= std::pow(p[i], term.powers[i]);
    sum += m;
  }
  return sum;
}

Vec4 PolynomialField::gradient(const Vec4& p) const {
  Vec4 g = Vec4::Zero();
  for (const auto& term : terms_) {
    for (int d = 0; d < 4; ++d) {
      if (term.powers[d] == 0) continue;
      double m = term.coeff * term.powers[d];
      for (int i = 0; i < 4; ++i) {
        m *= std::pow(p[i], i == d ? term.powers[i] - 1 : term.powers[i]);
      }
      g[d] += m;
    }
  }
  return g;
}

bool PolynomialField::vanishes_on_axis() const {
  for (const auto& term : terms_) {
    if (term.powers[1] + term.powers[2] + term.powers[3] == 0 && term.coeff != 0.0) return false;
  }
  return true;
}

double RadialBumpField::value(const Vec4& p) const {
  const double r = p.tail<3>().norm();
  if (r <= radius_) return 0.0;
  return amplitude_ * std::exp(-width_ / (r - radius_)) * (1.0 + tilt_.dot(p));
}

Vec4 RadialBumpField::gradient(const Vec4& p) const {
  const Vec3 x = p.tail<3>();
  const double r = x.norm();
  if (r <= radius_) return Vec4::Zero();
  const double d = r - radius_;
  const double e = std::exp(-width_ / d);
  const double de = e * width_ / (d * d);
  const double lin = 1.0 + tilt_.dot(p);
  Vec4 g = amplitude_ * e * tilt_;
  g.tail<3>() += amplitude_ * de * lin * x / r;
  return g;
}

ExpProductGauge::ExpProductGauge(int n, std::vector<Factor> factors)
    : n_(n), factors_(std::move(factors)) {
  for (const auto& f : factors_) {
    if (f.generator.rows() != n || f.generator.cols() != n) {
      throw Error(ErrorCode::InvalidConfig, "generator size mismatch");
    }
    if ((f.generator + f.generator.transpose()).norm() > 1e-12) {
      throw Error(ErrorCode::InvalidConfig, "generator must be skew-symmetric");
    }
  }
}

Mat ExpProductGauge::value(const Vec4& p) const {
  Mat u = identity(n_);
  for (const auto& f : factors_) u = u * expm(f.field->value(p) * f.generator);
  return u;
}

Mat ExpProductGauge::differential(const Vec4& p, const Vec4& v) const {
  const std::size_t m = factors_.size();
  std::vector<Mat> e(m);
  for (std::size_t k = 0; k < m; ++k) e[k] = expm(factors_[k].field->value(p) * factors_[k].generator);
  Mat total = zeros(n_);
  Mat left = identity(n_);
  for (std::size_t k = 0; k < m; ++k) {
    const double df = factors_[k].field->gradient(p).dot(v);
    if (df != 0.0) {
      Mat term = left * (df * factors_[k].generator) * e[k];
      for (std::size_t l = k + 1; l < m; ++l) term = term * e[l];
      total += term;
    }
    left = left * e[k];
  }
  return total;
}

Mat ProductGauge::differential(const Vec4& p, const Vec4& v) const {
  return phi_.differential(p, v) * psi_.value(p) + phi_.value(p) * psi_.differential(p, v);
}

Mat InverseGauge::differential(const Vec4& p, const Vec4& v) const {
  const Mat inv = phi_.value(p).inverse();
  return -inv * phi_.differential(p, v) * inv;
}

Mat gauge_act(const OneForm& a, const GaugeField& phi, const Vec4& p, const Vec4& v,
              const Vec3* approach) {
  const Mat u = phi.value(p);
  const Mat inv = u.inverse();
  return inv * phi.differential(p, v) + inv * a.eval(p, v, approach) * u;
}

double axis_deviation(const GaugeField& phi, int samples) {
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = -1.0 + 2.0 * (k + 0.5) / samples;
    worst = std::max(worst, (phi.value(Vec4(t, 0, 0, 0)) - identity(phi.n())).norm());
  }
  return worst;
}

}  // namespace bxr
