#include "bxr/stability.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bxr/error.hpp"
#include "bxr/io.hpp"

namespace bxr {

namespace {

bool admissible(const BrokenPath& p, const DiamondConfig& cfg) {
  auto tube = [&](const Event& e) { return e.radius() < cfg.epsilon && in_open_diamond(e); };
  return tube(p.x) && tube(p.z) && in_open_diamond(p.y) && p.y.radius() >= cfg.epsilon;
}

BrokenPath moved(const BrokenPath& base, PathDirection which, double t, const DiamondConfig& cfg) {
  BrokenPath p = base;
  switch (which) {
    case PathDirection::y_from_x:
      p.y = base.y + t * unit_direction(base.x, base.y).v;
      break;
    case PathDirection::x_from_y:
      p.x = base.x + t * unit_direction(base.y, base.x).v;
      break;
    case PathDirection::y_from_z:
      p.y = base.y + t * unit_direction(base.z, base.y).v;
      break;
    case PathDirection::z_from_y:
      p.z = base.z + t * unit_direction(base.y, base.z).v;
      break;
  }
  if (which == PathDirection::y_from_x || which == PathDirection::y_from_z) {
    if (base.kind == PathKind::future_determined) p.z = determined_endpoints(p.y, cfg).z_y;
    if (base.kind == PathKind::past_determined) p.x = determined_endpoints(p.y, cfg).x_y;
  }
  return p;
}

Vec3 ball_point(double radius, RandomStream& rng) {
  const Vec3 d(rng.normal(), rng.normal(), rng.normal());
  return d.normalized() * radius * std::cbrt(rng.uniform());
}

Mat inverse_product(const OneForm& a, const OneForm& b, const BrokenPath& p,
                    const TransportOptions& o) {
  return scattering(a, p, o).inverse() * scattering(b, p, o);
}

Mat product_inverse(const OneForm& a, const OneForm& b, const BrokenPath& p,
                    const TransportOptions& o) {
  return scattering(a, p, o) * scattering(b, p, o).inverse();
}

// Orthonormal frame (e1 = xhat, e2, e3) used to rotate the sample construction.
std::array<Vec3, 3> frame(const Vec3& xhat) {
  const Vec3 seed = std::abs(xhat[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
  const Vec3 e2 = (seed - seed.dot(xhat) * xhat).normalized();
  return {xhat, e2, xhat.cross(e2)};
}

}  // namespace

Mat path_derivative(const PathFunctional& f, const BrokenPath& base, PathDirection which,
                    const FDConfig& cfg, const DiamondConfig& dcfg) {
  if (!(cfg.h > 0.0)) throw Error(ErrorCode::InvalidConfig, "finite-difference step must be positive");
  const int reach = cfg.scheme == FDScheme::richardson_4th ? 2 : 1;
  double h = cfg.h;
  for (;;) {
    bool ok = true;
    for (int k = -reach; k <= reach && ok; ++k) {
      if (k == 0) continue;
      ok = admissible(moved(base, which, k * h, dcfg), dcfg);
    }
    if (ok) break;
    h *= 0.5;
    if (h < cfg.min_h) throw Error(ErrorCode::StepUnderflow, "perturbed path leaves its admissible set");
  }
  const Mat d1 = f(moved(base, which, h, dcfg)) - f(moved(base, which, -h, dcfg));
  if (cfg.scheme == FDScheme::central_2nd) return d1 / (2.0 * h);
  const Mat d2 = f(moved(base, which, 2 * h, dcfg)) - f(moved(base, which, -2 * h, dcfg));
  return (8.0 * d1 - d2) / (12.0 * h);
}

static Eigen::Matrix4d column_matrix(const std::array<Vec4, 4>& basis) {
  Eigen::Matrix4d b;
  for (int i = 0; i < 4; ++i) b.col(i) = basis[i];
  return b;
}

double linalg_bound(const std::array<Vec4, 4>& basis) {
  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(column_matrix(basis));
  const auto& s = svd.singularValues();
  if (s[3] <= 0.0 || s[0] / s[3] > 1e12) throw Error(ErrorCode::SingularBasis, "basis is singular");
  return 2.0 / s[3];
}

double inverse_frobenius(const std::array<Vec4, 4>& basis) {
  linalg_bound(basis);
  return column_matrix(basis).inverse().norm();
}

std::array<Vec4, 4> sample_directions(double epsilon) {
  const double c = std::sqrt(1.0 + epsilon * epsilon);
  return {Vec4(1, 1, 0, 0).normalized(), Vec4(c, 1, epsilon, 0).normalized(),
          Vec4(c, 1, 0, epsilon).normalized(), Vec4(-1, 1, 0, 0).normalized()};
}

std::array<Event, 3> sample_fiber_points(const Event& y, double epsilon) {
  const double r = y.radius();
  if (r < 1e-12) throw Error(ErrorCode::AxisPoint, "sample construction on the axis");
  const auto f = frame(y.x / r);
  return {fiber_point(y, Fiber::FX, Vec3::Zero()), fiber_point(y, Fiber::FX, -epsilon * f[1]),
          fiber_point(y, Fiber::FX, -epsilon * f[2])};
}

EstimateReport estimate_in(const OneForm& a, const OneForm& b, const DiamondConfig& cfg,
                           int n_x, int n_y, RandomStream& rng, const StabilityOptions& opts) {
  EstimateReport rep;
  rep.name = "estimate_in";
  rep.epsilon = cfg.epsilon;
  rep.seed = rng.seed();
  const DifferenceForm diff(a, b);

  // LHS over the x-side of the tube; its volume is estimated by the acceptance rate.
  double lhs_sum = 0.0;
  int accepted = 0;
  for (int i = 0; i < n_x; ++i) {
    const Event x = sample_tube(cfg, rng);
    if (!in_tube_x(x, cfg)) continue;
    ++accepted;
    const double v = pointwise_norm(diff, x.vec());
    lhs_sum += v * v;
  }
  const double vol_x = tube_volume(cfg.epsilon) * accepted / std::max(n_x, 1);
  rep.lhs = accepted > 0 ? std::sqrt(vol_x * lhs_sum / accepted) : 0.0;

  // RHS over the fiber bundle: y uniform outside the tube, x uniform in its fiber.
  const double vol_out = diamond_volume() - tube_volume(cfg.epsilon);
  double rhs_sum = 0.0;
  int count = 0;
  const PathFunctional fn = [&](const BrokenPath& p) {
    return product_inverse(a, b, p, opts.transport);
  };
  for (int j = 0; j < n_y; ++j) {
    const Event y = sample_outside_tube(cfg, rng);
    for (int k = 0; k < opts.fiber_samples; ++k) {
      ++count;
      const Event x = fiber_point(y, Fiber::FX, ball_point(cfg.epsilon, rng));
      if (!in_tube_x(x, cfg)) continue;
      const BrokenPath path = future_determined(x, y, cfg);
      if (!admissible(path, cfg)) continue;
      const double v = path_derivative(fn, path, PathDirection::x_from_y, opts.fd, cfg).norm();
      rhs_sum += v * v;
    }
  }
  rep.rhs = count > 0 ? std::sqrt(vol_out * fiber_volume(cfg.epsilon) * rhs_sum / count) : 0.0;
  rep.samples = n_x + count;
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
  return rep;
}

EstimateOutReport estimate_out(const OneForm& a, const OneForm& b, const DiamondConfig& cfg,
                               int n_y, int n_x_per_y, RandomStream& rng,
                               const StabilityOptions& opts) {
  EstimateOutReport out;
  const double eps = cfg.epsilon;
  const double eps4 = eps * eps * eps * eps;
  const double vol_out = diamond_volume() - tube_volume(eps);
  const double fvol = fiber_volume(eps);
  const PathFunctional fn = [&](const BrokenPath& p) {
    return inverse_product(a, b, p, opts.transport);
  };
  auto fiber_derivative = [&](const Event& x, const Event& y) -> std::optional<double> {
    if (!in_tube_x(x, cfg)) return std::nullopt;
    const BrokenPath path = future_determined(x, y, cfg);
    if (!admissible(path, cfg)) return std::nullopt;
    return path_derivative(fn, path, PathDirection::y_from_x, opts.fd, cfg).norm();
  };

  double lhs_sq = 0.0, rhs_sq = 0.0;
  int rhs_count = 0;
  for (int j = 0; j < n_y; ++j) {
    Event y = sample_outside_tube(cfg, rng);
    while (y.radius() < 1e-6) y = sample_outside_tube(cfg, rng);
    PointReport pr;
    pr.y = y;
    pr.lhs = delta_norm(a, b, y, opts.transport);
    double integral = 0.0;
    for (int k = 0; k < n_x_per_y; ++k) {
      const auto v = fiber_derivative(fiber_point(y, Fiber::FX, ball_point(eps, rng)), y);
      ++rhs_count;
      if (!v) continue;
      integral += *v;
      rhs_sq += *v * *v;
    }
    integral *= fvol / std::max(n_x_per_y, 1);
    pr.rhs_integral = integral / eps4;
    double best = 0.0;
    for (const Event& x : sample_fiber_points(y, eps * (1.0 - 1e-9))) {
      if (const auto v = fiber_derivative(x, y)) best = std::max(best, *v);
    }
    pr.rhs_directions = 8.0 / eps * best;
    pr.ratio = pr.rhs_integral > 0.0 ? pr.lhs / pr.rhs_integral
                                     : (pr.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    pr.full_fiber = y.t - y.radius() > -1.0 + 2.0 * eps;
    if (pr.full_fiber) out.fitted_constant = std::max(out.fitted_constant, pr.ratio);
    lhs_sq += pr.lhs * pr.lhs;
    out.points.push_back(pr);
  }
  auto& rep = out.integrated;
  rep.name = "estimate_out";
  rep.epsilon = eps;
  rep.seed = rng.seed();
  rep.samples = n_y * n_x_per_y;
  rep.lhs = n_y > 0 ? std::sqrt(vol_out * lhs_sq / n_y) : 0.0;
  rep.rhs = rhs_count > 0 ? std::sqrt(vol_out * fvol * rhs_sq / rhs_count) / eps4 : 0.0;
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
  return out;
}

double curvature_norm(const OneForm& a, const Vec4& p) {
  std::array<std::array<Mat, 4>, 4> f;
  for (int m = 0; m < 4; ++m) {
    f[m][m] = zeros(a.n());
    for (int k = m + 1; k < 4; ++k) {
      f[m][k] = curvature(a, p, Vec4::Unit(m), Vec4::Unit(k));
      f[k][m] = -f[m][k];
    }
  }
  auto images = [&](const Vec4& u) {
    std::array<Mat, 4> out;
    for (int k = 0; k < 4; ++k) {
      out[k] = zeros(a.n());
      for (int m = 0; m < 4; ++m) out[k] += u[m] * f[m][k];
    }
    return out;
  };
  double best = 0.0;
  for (int start = 0; start < 4; ++start) {
    Vec4 u = Vec4::Unit(start);
    double val = 0.0;
    for (int it = 0; it < 50; ++it) {
      // best v for fixed u, then best u for fixed v (F is antisymmetric)
      const auto iu = images(u);
      const Eigen::MatrixXd mu = stack_images(std::vector<Mat>(iu.begin(), iu.end()));
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(mu, Eigen::ComputeFullV);
      const Vec4 v = svd.matrixV().col(0);
      const double next = svd.singularValues()[0];
      u = v;
      if (std::abs(next - val) <= 1e-13 * std::max(1.0, next)) {
        val = next;
        break;
      }
      val = next;
    }
    best = std::max(best, val);
  }
  return best;
}

PsiTerms psi_terms(const OneForm& a, int grid) {
  PsiTerms out;
  const int g = std::max(grid, 2);
  for (int i0 = 0; i0 < g; ++i0)
    for (int i1 = 0; i1 < g; ++i1)
      for (int i2 = 0; i2 < g; ++i2)
        for (int i3 = 0; i3 < g; ++i3) {
          const Vec4 p(-1.0 + 2.0 * i0 / (g - 1), -1.0 + 2.0 * i1 / (g - 1),
                       -1.0 + 2.0 * i2 / (g - 1), -1.0 + 2.0 * i3 / (g - 1));
          const Event e(p);
          if (!in_open_diamond(e)) continue;
          if (a.axis_singular() && e.radius() < 1e-9) continue;
          out.curvature_sup = std::max(out.curvature_sup, curvature_norm(a, p));
        }
  const std::array<Vec3, 6> dirs = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0),
                                    Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
  for (int k = 1; k < g; ++k) {
    const Vec4 p(-1.0 + 2.0 * k / g, 0, 0, 0);
    if (a.axis_singular()) {
      for (const auto& d : dirs) {
        out.axis_sup = std::max(out.axis_sup, a.eval(p, Vec4::Unit(0), &d).norm());
      }
    } else {
      out.axis_sup = std::max(out.axis_sup, a.eval(p, Vec4::Unit(0)).norm());
    }
  }
  return out;
}

double psi_factor(const OneForm& a, const OneForm& b, int grid) {
  return 1.0 + std::min(psi_terms(a, grid).total(), psi_terms(b, grid).total());
}

EstimateReport h1_estimate(const OneForm& a, const OneForm& b, const DiamondConfig& cfg,
                           const H1Sizes& sizes, RandomStream& rng,
                           const StabilityOptions& opts) {
  EstimateReport rep;
  rep.name = "h1_estimate";
  rep.epsilon = cfg.epsilon;
  rep.seed = rng.seed();
  const double eps = cfg.epsilon;
  const double eps4 = eps * eps * eps * eps;
  const double vol_out = diamond_volume() - tube_volume(eps);
  const PathFunctional diff = [&](const BrokenPath& p) {
    return Mat(scattering(a, p, opts.transport) - scattering(b, p, opts.transport));
  };
  double lhs_sq = 0.0, h1_sq = 0.0;
  int count = 0;
  for (int j = 0; j < sizes.n_y; ++j) {
    Event y = sample_outside_tube(cfg, rng);
    while (y.radius() < 1e-6) y = sample_outside_tube(cfg, rng);
    const double l = rho_distance(a, b, y, opts.transport);
    lhs_sq += l * l;
    for (int k = 0; k < opts.fiber_samples; ++k) {
      ++count;
      const Event x = fiber_point(y, Fiber::FX, ball_point(eps, rng));
      if (!in_tube_x(x, cfg)) continue;
      const BrokenPath path = future_determined(x, y, cfg);
      if (!admissible(path, cfg)) continue;
      const double v0 = diff(path).norm();
      const double v1 = path_derivative(diff, path, PathDirection::y_from_x, opts.fd, cfg).norm();
      const double v2 = path_derivative(diff, path, PathDirection::x_from_y, opts.fd, cfg).norm();
      h1_sq += v0 * v0 + v1 * v1 + v2 * v2;
    }
  }
  rep.samples = count;
  rep.lhs = sizes.n_y > 0 ? std::sqrt(vol_out * lhs_sq / sizes.n_y) : 0.0;
  const double h1 = count > 0 ? std::sqrt(vol_out * fiber_volume(eps) * h1_sq / count) : 0.0;
  rep.rhs = psi_factor(a, b, sizes.psi_grid) * h1 / eps4;
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
  return rep;
}

double sup_norm_grid(const OneForm& a, const OneForm& b, int grid) {
  const DifferenceForm diff(a, b);
  const int g = std::max(grid, 2);
  double best = 0.0;
  for (int i0 = 0; i0 < g; ++i0)
    for (int i1 = 0; i1 < g; ++i1)
      for (int i2 = 0; i2 < g; ++i2)
        for (int i3 = 0; i3 < g; ++i3) {
          const Vec4 p(-1.0 + 2.0 * i0 / (g - 1), -1.0 + 2.0 * i1 / (g - 1),
                       -1.0 + 2.0 * i2 / (g - 1), -1.0 + 2.0 * i3 / (g - 1));
          if (!in_open_diamond(Event(p))) continue;
          if (diff.axis_singular() && p.tail<3>().norm() < 1e-9) continue;
          best = std::max(best, pointwise_norm(diff, p));
        }
  return best;
}

std::string estimate_csv_header() { return "estimate_name,epsilon,lhs,rhs,ratio,n_samples,seed"; }

std::string to_csv_row(const EstimateReport& r) {
  std::ostringstream os;
  os << r.name << ',' << fmt_double(r.epsilon) << ',' << fmt_double(r.lhs) << ','
     << fmt_double(r.rhs) << ',' << fmt_double(r.ratio) << ',' << r.samples << ',' << r.seed;
  return os.str();
}

}  // namespace bxr
