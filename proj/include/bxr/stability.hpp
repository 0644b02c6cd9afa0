#pragma once

// Both sides of the stability estimates, evaluated numerically.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "bxr/lightsink.hpp"

namespace bxr {

enum class FDScheme { central_2nd, richardson_4th };

struct FDConfig {
  double h = 1e-4;
  FDScheme scheme = FDScheme::central_2nd;
  double min_h = 1e-7;
};

enum class PathDirection { y_from_x, x_from_y, y_from_z, z_from_y };

using PathFunctional = std::function<Mat(const BrokenPath&)>;

/// Directional derivative of F along the path-moving vector field named by
/// `which`. Future-determined paths re-derive z_y when y moves, past-determined
/// ones re-derive x_y. The step is halved while a perturbed path would leave
/// its admissible set; throws StepUnderflow below cfg.min_h.
Mat path_derivative(const PathFunctional& f, const BrokenPath& base, PathDirection which,
                    const FDConfig& cfg, const DiamondConfig& dcfg);

/// sqrt(m) ||B^-1|| for the matrix B whose columns are the given unit vectors.
/// Throws SingularBasis if cond(B) > 1e12.
double linalg_bound(const std::array<Vec4, 4>& basis);

/// ||B^-1||_F for the same matrix.
double inverse_frobenius(const std::array<Vec4, 4>& basis);

/// Unit directions v_{y<-x_i} (i = 1..3) and v_{y<-z_y} for y = (0,1,0,0) and
/// fiber points on the tube boundary.
std::array<Vec4, 4> sample_directions(double epsilon);

/// The same construction rotated and translated to a general off-axis y:
/// the three fiber points and z_y.
std::array<Event, 3> sample_fiber_points(const Event& y, double epsilon);

struct EstimateReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  int samples = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
};

struct PointReport {
  Event y;
  double lhs = 0.0;          // ||Delta(A,B)_y||
  double rhs_integral = 0.0; // eps^-4 * int over the fiber of |d_{y<-x}((S^A)^-1 S^B)|
  double rhs_directions = 0.0;  // (8/eps) max over the three sample directions
  double ratio = 0.0;        // lhs / rhs_integral
  bool full_fiber = false;   // the whole eps-ball fiber of y lies in the diamond
};

struct EstimateOutReport {
  EstimateReport integrated;
  std::vector<PointReport> points;
  double fitted_constant = 0.0;  // max pointwise ratio over full-fiber points
};

struct StabilityOptions {
  TransportOptions transport{128, false};
  FDConfig fd{};
  int fiber_samples = 1;  // x-samples per y in Monte-Carlo integrals
};

/// ||A - B||_{L2(tube_x)} against ||d_{x<-y}(S^A (S^B)^-1)||_{L2(F^X)}.
EstimateReport estimate_in(const OneForm& a, const OneForm& b, const DiamondConfig& cfg,
                           int n_x, int n_y, RandomStream& rng, const StabilityOptions& opts = {});

/// Pointwise ||Delta_y|| against eps^-4 times the fiber integral of
/// |d_{y<-x}((S^A)^-1 S^B)|, plus the integrated L2 form.
EstimateOutReport estimate_out(const OneForm& a, const OneForm& b, const DiamondConfig& cfg,
                               int n_y, int n_x_per_y, RandomStream& rng,
                               const StabilityOptions& opts = {});

/// Sup over unit u, v of |F(u, v)| at one point (alternating maximisation).
double curvature_norm(const OneForm& a, const Vec4& p);

/// Grid-sup of ||F_A|| over the diamond plus sup of |A(d_t)| on the axis.
struct PsiTerms {
  double curvature_sup = 0.0;
  double axis_sup = 0.0;
  double total() const { return curvature_sup + axis_sup; }
};
PsiTerms psi_terms(const OneForm& a, int grid);

/// 1 + min(psi_terms(A).total(), psi_terms(B).total()).
double psi_factor(const OneForm& a, const OneForm& b, int grid);

struct H1Sizes {
  int n_y = 256;
  int psi_grid = 9;
};

/// ||rho(A) - rho(B)||_{L2(D \ tube)} against Psi eps^-4 ||S^A - S^B||_{H1(F^X)}.
EstimateReport h1_estimate(const OneForm& a, const OneForm& b, const DiamondConfig& cfg,
                           const H1Sizes& sizes, RandomStream& rng,
                           const StabilityOptions& opts = {});

/// Grid estimate of sup over points and unit v of |(A - B)_p(v)|.
double sup_norm_grid(const OneForm& a, const OneForm& b, int grid);

/// CSV row {estimate_name, epsilon, lhs, rhs, ratio, n_samples, seed}.
std::string to_csv_row(const EstimateReport& r);
std::string estimate_csv_header();

}  // namespace bxr
