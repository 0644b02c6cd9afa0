#pragma once

// Group-valued fields and the right action A <| phi = phi^-1 dphi + phi^-1 A phi.

#include <functional>
#include <memory>
#include <vector>

#include "bxr/connection.hpp"

namespace bxr {

class GaugeField {
 public:
  virtual ~GaugeField() = default;

  virtual int n() const = 0;
  virtual Mat value(const Vec4& p) const = 0;

  /// (d phi)_p(v). Central differences with fd_step unless overridden.
  virtual Mat differential(const Vec4& p, const Vec4& v) const;

  double fd_step = 1e-5;
};

/// Smooth scalar field with its gradient, used to build closed-form gauges.
class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual double value(const Vec4& p) const = 0;
  virtual Vec4 gradient(const Vec4& p) const = 0;
};

/// Sum of monomials c * t^a x1^b x2^c x3^d.
class PolynomialField final : public ScalarField {
 public:
  struct Term {
    double coeff;
    std::array<int, 4> powers;
  };

  explicit PolynomialField(std::vector<Term> terms) : terms_(std::move(terms)) {}
  double value(const Vec4& p) const override;
  Vec4 gradient(const Vec4& p) const override;
  const std::vector<Term>& terms() const { return terms_; }

  /// True when every term carries a spatial power, i.e. the field vanishes on the axis.
  bool vanishes_on_axis() const;

 private:
  std::vector<Term> terms_;
};

/// amplitude * exp(-width / (|x| - radius)) * (1 + tilt . (t, x)) for |x| > radius,
/// zero inside the radius. Smooth, and identically zero on the tube of that radius.
class RadialBumpField final : public ScalarField {
 public:
  RadialBumpField(double radius, double amplitude, double width = 1.0, Vec4 tilt = Vec4::Zero())
      : radius_(radius), amplitude_(amplitude), width_(width), tilt_(tilt) {}
  double value(const Vec4& p) const override;
  Vec4 gradient(const Vec4& p) const override;

 private:
  double radius_, amplitude_, width_;
  Vec4 tilt_;
};

/// phi(p) = exp(f_1(p) X_1) exp(f_2(p) X_2) ... with X_k in so(n).
class ExpProductGauge final : public GaugeField {
 public:
  struct Factor {
    Mat generator;
    std::shared_ptr<const ScalarField> field;
  };

  ExpProductGauge(int n, std::vector<Factor> factors);

  int n() const override { return n_; }
  Mat value(const Vec4& p) const override;
  Mat differential(const Vec4& p, const Vec4& v) const override;
  const std::vector<Factor>& factors() const { return factors_; }

 private:
  int n_;
  std::vector<Factor> factors_;
};

class ConstantGauge final : public GaugeField {
 public:
  explicit ConstantGauge(Mat u) : u_(std::move(u)) {}
  int n() const override { return static_cast<int>(u_.rows()); }
  Mat value(const Vec4&) const override { return u_; }
  Mat differential(const Vec4&, const Vec4&) const override { return zeros(n()); }

 private:
  Mat u_;
};

/// Pointwise product phi * psi.
class ProductGauge final : public GaugeField {
 public:
  ProductGauge(const GaugeField& phi, const GaugeField& psi) : phi_(phi), psi_(psi) {}
  int n() const override { return phi_.n(); }
  Mat value(const Vec4& p) const override { return phi_.value(p) * psi_.value(p); }
  Mat differential(const Vec4& p, const Vec4& v) const override;

 private:
  const GaugeField& phi_;
  const GaugeField& psi_;
};

/// Pointwise inverse phi^-1.
class InverseGauge final : public GaugeField {
 public:
  explicit InverseGauge(const GaugeField& phi) : phi_(phi) {}
  int n() const override { return phi_.n(); }
  Mat value(const Vec4& p) const override { return phi_.value(p).inverse(); }
  Mat differential(const Vec4& p, const Vec4& v) const override;

 private:
  const GaugeField& phi_;
};

/// Gauge given by an arbitrary callable; differential by central differences.
class FunctionGauge final : public GaugeField {
 public:
  FunctionGauge(int n, std::function<Mat(const Vec4&)> fn) : n_(n), fn_(std::move(fn)) {}
  int n() const override { return n_; }
  Mat value(const Vec4& p) const override { return fn_(p); }

 private:
  int n_;
  std::function<Mat(const Vec4&)> fn_;
};

/// (A <| phi)_p(v).
Mat gauge_act(const OneForm& a, const GaugeField& phi, const Vec4& p, const Vec4& v,
              const Vec3* approach = nullptr);

/// A <| phi as a one-form. Holds references.
class GaugedConnection final : public OneForm {
 public:
  GaugedConnection(const OneForm& a, const GaugeField& phi) : a_(a), phi_(phi) {}
  int n() const override { return a_.n(); }
  Mat eval(const Vec4& p, const Vec4& v, const Vec3* approach = nullptr) const override {
    return gauge_act(a_, phi_, p, v, approach);
  }
  bool axis_singular() const override { return a_.axis_singular(); }

 private:
  const OneForm& a_;
  const GaugeField& phi_;
};

/// Maximum of ||phi(t, 0) - Id||_F over `samples` axis points in (-1, 1).
double axis_deviation(const GaugeField& phi, int samples = 33);

}  // namespace bxr
