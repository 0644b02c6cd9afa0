#include "bxr/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "bxr/error.hpp"

namespace bxr {

double orthogonality_drift(const Mat& u) {
  return (u.transpose() * u - identity(static_cast<int>(u.rows()))).norm();
}

Mat polar_project(const Mat& m, double min_sv) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m), Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() < min_sv) {
    throw Error(ErrorCode::NonInvertibleProjection, "singular value below threshold");
  }
  return Mat(svd.matrixU() * svd.matrixV().transpose());
}

Mat expm(const Mat& m) {
  Eigen::MatrixXd d = m;
  return Mat(d.exp());
}

Mat so_basis(int n, int a) {
  Mat l = zeros(n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++k) {
      if (k == a) {
        l(i, j) = 1.0;
        l(j, i) = -1.0;
        return l;
      }
    }
  }
  throw Error(ErrorCode::IndexOutOfRange, "so(n) basis index");
}

Eigen::VectorXd so_coords(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd c(so_dim(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) c[k++] = m(i, j);
  }
  return c;
}

Mat so_from_coords(int n, const double* coords) {
  Mat m = zeros(n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++k) {
      m(i, j) = coords[k];
      m(j, i) = -coords[k];
    }
  }
  return m;
}

Eigen::MatrixXd stack_images(const std::vector<Mat>& images) {
  const int rows = static_cast<int>(images.front().size());
  Eigen::MatrixXd out(rows, static_cast<int>(images.size()));
  for (std::size_t c = 0; c < images.size(); ++c) {
    out.col(static_cast<int>(c)) = Eigen::Map<const Eigen::VectorXd>(images[c].data(), rows);
  }
  return out;
}

double operator_norm4(const std::vector<Mat>& images) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack_images(images));
  return svd.singularValues()[0];
}

}  // namespace bxr
