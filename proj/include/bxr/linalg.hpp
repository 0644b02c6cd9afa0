#pragma once

#include <Eigen/Dense>
#include <vector>

namespace bxr {

/// Largest matrix size supported by the fixed-capacity matrix type.
inline constexpr int kMaxDim = 8;

/// Small dense matrix with inline storage (no heap traffic in inner loops).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

inline Mat identity(int n) { return Mat::Identity(n, n); }
inline Mat zeros(int n) { return Mat::Zero(n, n); }

/// ||U^T U - I||_F
double orthogonality_drift(const Mat& u);

/// Nearest orthogonal matrix (polar factor U V^T of the SVD). Throws
/// NonInvertibleProjection when the smallest singular value is below min_sv.
Mat polar_project(const Mat& m, double min_sv = 1e-12);

/// Matrix exponential.
Mat expm(const Mat& m);

/// Dimension of so(n).
inline int so_dim(int n) { return n * (n - 1) / 2; }

/// Basis element L_a = E_ij - E_ji of so(n), pairs (i<j) in lexicographic order.
Mat so_basis(int n, int a);

/// Coordinates of a skew matrix in the so_basis (the strictly upper entries).
Eigen::VectorXd so_coords(const Mat& m);

/// Skew matrix with the given so_basis coordinates.
Mat so_from_coords(int n, const double* coords);

/// Largest singular value of a linear map R^4 -> R^{n^2} given by its four
/// images of the standard basis (Frobenius norm on the target).
double operator_norm4(const std::vector<Mat>& images);

/// Same map, as an (n*n) x 4 matrix with vec() columns.
Eigen::MatrixXd stack_images(const std::vector<Mat>& images);

}  // namespace bxr
