#include "bxr/geometry.hpp"

#include <cmath>
#include <numbers>

#include "bxr/error.hpp"

namespace bxr {

void DiamondConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "epsilon must lie in (0, 1/2)");
  }
  if (!(r_axis_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "r_axis_tol must be positive");
}

std::string_view to_string(PathKind kind) {
  switch (kind) {
    case PathKind::future_determined: return "future_determined";
    case PathKind::past_determined: return "past_determined";
    case PathKind::free: return "free";
  }
  return "free";
}

PathKind path_kind_from_string(std::string_view s) {
  if (s == "future_determined") return PathKind::future_determined;
  if (s == "past_determined") return PathKind::past_determined;
  if (s == "free") return PathKind::free;
  throw Error(ErrorCode::ParseError, "unknown path kind: " + std::string(s));
}

bool in_open_diamond(const Event& p) {
  const double r = p.radius();
  return r < p.t + 1.0 && r < 1.0 - p.t;
}

static bool in_closed_diamond(const Event& p) {
  const double r = p.radius();
  return r <= p.t + 1.0 && r <= 1.0 - p.t;
}

static bool in_tube(const Event& p, const DiamondConfig& cfg) {
  return p.radius() < cfg.epsilon && in_open_diamond(p);
}

bool contains(const Event& p, Region region, const DiamondConfig& cfg) {
  switch (region) {
    case Region::diamond: return in_closed_diamond(p);
    case Region::tube: return in_tube(p, cfg);
    case Region::diamond_minus_tube: return in_closed_diamond(p) && !in_tube(p, cfg);
  }
  return false;
}

bool in_tube_x(const Event& p, const DiamondConfig& cfg) {
  return in_tube(p, cfg) && p.t - p.radius() < 1.0 - 2.0 * cfg.epsilon;
}

bool in_tube_z(const Event& p, const DiamondConfig& cfg) {
  return in_tube(p, cfg) && p.t + p.radius() > -1.0 + 2.0 * cfg.epsilon;
}

DeterminedEndpoints determined_endpoints(const Event& y, const DiamondConfig& cfg) {
  const double r = y.radius();
  if (r < cfg.r_axis_tol) throw Error(ErrorCode::AxisPoint, "determined endpoints on the axis");
  return {Event(y.t - r, 0.0, 0.0, 0.0), Event(y.t + r, 0.0, 0.0, 0.0)};
}

UnitTangent unit_direction(const Event& from, const Event& to) {
  const Vec4 d = to.vec() - from.vec();
  const double len = d.norm();
  if (len < 1e-12) throw Error(ErrorCode::DegenerateSegment, "coincident endpoints");
  return {d / len, to};
}

double lightlike_residual(const Event& a, const Event& b) {
  const double dt = b.t - a.t;
  return std::abs(dt * dt - (b.x - a.x).squaredNorm());
}

static bool future_lightlike(const Event& a, const Event& b, double tol) {
  return b.t - a.t > 0.0 && lightlike_residual(a, b) <= tol;
}

void BrokenPath::validate(const DiamondConfig& cfg, double tol) const {
  if (!future_lightlike(x, y, tol)) {
    throw Error(ErrorCode::PreconditionViolated, "leg x -> y is not future lightlike");
  }
  if (!future_lightlike(y, z, tol)) {
    throw Error(ErrorCode::PreconditionViolated, "leg y -> z is not future lightlike");
  }
  if (!in_tube(x, cfg) || !in_tube(z, cfg)) {
    throw Error(ErrorCode::PreconditionViolated, "endpoints must lie in the tube");
  }
  if (in_tube(y, cfg) || !in_open_diamond(y)) {
    throw Error(ErrorCode::PreconditionViolated, "break point must lie in D minus the tube");
  }
  if (kind == PathKind::future_determined && z.radius() > tol) {
    throw Error(ErrorCode::PreconditionViolated, "future-determined path must end on the axis");
  }
  if (kind == PathKind::past_determined && x.radius() > tol) {
    throw Error(ErrorCode::PreconditionViolated, "past-determined path must start on the axis");
  }
}

static Vec3 ball_sample(double radius, RandomStream& rng) {
  Vec3 d(rng.normal(), rng.normal(), rng.normal());
  while (d.norm() < 1e-300) d = Vec3(rng.normal(), rng.normal(), rng.normal());
  return d.normalized() * (radius * std::cbrt(rng.uniform()));
}

Event fiber_point(const Event& y, Fiber which, const Vec3& spatial) {
  const double dist = (spatial - y.x).norm();
  return Event(which == Fiber::FX ? y.t - dist : y.t + dist, spatial);
}

Event fiber_sample(const Event& y, Fiber which, const DiamondConfig& cfg, RandomStream& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Event p = fiber_point(y, which, ball_sample(cfg.epsilon, rng));
    if (in_open_diamond(p)) return p;
  }
  throw Error(ErrorCode::EmptyFiber, "1000 consecutive fiber rejections");
}

Event sample_outside_tube(const DiamondConfig& cfg, RandomStream& rng) {
  for (;;) {
    const Event p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    if (in_open_diamond(p) && p.radius() >= cfg.epsilon) return p;
  }
}

Event sample_tube(const DiamondConfig& cfg, RandomStream& rng) {
  const double e = cfg.epsilon;
  for (;;) {
    const Event p(rng.uniform(-1, 1), rng.uniform(-e, e), rng.uniform(-e, e), rng.uniform(-e, e));
    if (in_tube(p, cfg)) return p;
  }
}

BrokenPath sample_broken_path(const DiamondConfig& cfg, RandomStream& rng) {
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const Event y = sample_outside_tube(cfg, rng);
    try {
      const Event x = fiber_sample(y, Fiber::FX, cfg, rng);
      const Event z = fiber_sample(y, Fiber::FZ, cfg, rng);
      return {x, y, z, PathKind::free};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyFiber) throw;
    }
  }
  throw Error(ErrorCode::EmptyFiber, "no admissible break point found");
}

BrokenPath future_determined(const Event& x, const Event& y, const DiamondConfig& cfg) {
  return {x, y, determined_endpoints(y, cfg).z_y, PathKind::future_determined};
}

BrokenPath past_determined(const Event& y, const Event& z, const DiamondConfig& cfg) {
  return {determined_endpoints(y, cfg).x_y, y, z, PathKind::past_determined};
}

double diamond_volume() { return 2.0 * std::numbers::pi / 3.0; }

double tube_volume(double epsilon) {
  const double e3 = epsilon * epsilon * epsilon;
  return 8.0 * std::numbers::pi * (e3 / 3.0 - e3 * epsilon / 4.0);
}

double fiber_volume(double epsilon) {
  return std::sqrt(2.0) * 4.0 / 3.0 * std::numbers::pi * epsilon * epsilon * epsilon;
}

}  // namespace bxr
