#pragma once

// Causal diamond D = {|x| <= 1 - |t|} in 1+3 Minkowski space, the observation
// tube around the origin's world line, and broken light rays x -> y -> z.

#include <array>
#include <string_view>

#include "bxr/linalg.hpp"
#include "bxr/random.hpp"

namespace bxr {

struct Event {
  double t = 0.0;
  Vec3 x = Vec3::Zero();

  Event() = default;
  Event(double t_, double x1, double x2, double x3) : t(t_), x(x1, x2, x3) {}
  Event(double t_, const Vec3& x_) : t(t_), x(x_) {}
  explicit Event(const Vec4& v) : t(v[0]), x(v.tail<3>()) {}

  Vec4 vec() const { return Vec4(t, x[0], x[1], x[2]); }
  double radius() const { return x.norm(); }
};

inline Event operator+(const Event& p, const Vec4& v) { return Event(p.vec() + v); }

struct DiamondConfig {
  double epsilon = 0.25;
  double r_axis_tol = 1e-9;

  void validate() const;
};

enum class Region { diamond, tube, diamond_minus_tube };

enum class PathKind { future_determined, past_determined, free };

std::string_view to_string(PathKind kind);
PathKind path_kind_from_string(std::string_view s);

/// Admissible broken ray x -> y -> z: both legs future-pointing lightlike,
/// x, z in the tube, y outside it.
struct BrokenPath {
  Event x, y, z;
  PathKind kind = PathKind::free;

  /// Checks the leg and membership invariants; throws PreconditionViolated.
  void validate(const DiamondConfig& cfg, double tol = 1e-12) const;
};

struct UnitTangent {
  Vec4 v;
  Event base;
};

enum class Fiber { FX, FZ };

bool contains(const Event& p, Region region, const DiamondConfig& cfg);

/// Strict interior of the diamond.
bool in_open_diamond(const Event& p);

/// Tube points that can start (resp. end) a future-determined (resp.
/// past-determined) broken ray.
bool in_tube_x(const Event& p, const DiamondConfig& cfg);
bool in_tube_z(const Event& p, const DiamondConfig& cfg);

struct DeterminedEndpoints {
  Event x_y;  // past endpoint on the axis
  Event z_y;  // future endpoint on the axis
};

/// Axis points lightlike-connected to y. Throws AxisPoint when y is on the axis.
DeterminedEndpoints determined_endpoints(const Event& y, const DiamondConfig& cfg = {});

/// Euclidean unit vector from `from` to `to`, based at `to`.
UnitTangent unit_direction(const Event& from, const Event& to);

/// Residual |dt^2 - |dx|^2| of the leg a -> b.
double lightlike_residual(const Event& a, const Event& b);

/// Uniform point of the fiber of y (spatial part uniform in the eps-ball).
Event fiber_sample(const Event& y, Fiber which, const DiamondConfig& cfg, RandomStream& rng);

/// Point of the fiber of y whose spatial part is `spatial` (no rejection).
Event fiber_point(const Event& y, Fiber which, const Vec3& spatial);

/// y uniform on D \ tube, then x and z uniform on their fibers.
BrokenPath sample_broken_path(const DiamondConfig& cfg, RandomStream& rng);

/// Uniform point of D \ tube (rejection from the bounding box).
Event sample_outside_tube(const DiamondConfig& cfg, RandomStream& rng);

/// Uniform point of the tube.
Event sample_tube(const DiamondConfig& cfg, RandomStream& rng);

/// Replace z by z_y (resp. x by x_y).
BrokenPath future_determined(const Event& x, const Event& y, const DiamondConfig& cfg = {});
BrokenPath past_determined(const Event& y, const Event& z, const DiamondConfig& cfg = {});

/// Volumes (Lebesgue, 4D) of the diamond and of the tube.
double diamond_volume();
double tube_volume(double epsilon);

/// Euclidean 3-volume of a fiber: the eps-ball lifted onto a light cone.
double fiber_volume(double epsilon);

}  // namespace bxr
