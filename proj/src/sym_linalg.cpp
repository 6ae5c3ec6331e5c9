#include "nssjd/sym_linalg.hpp"

#include <string>

namespace nssjd {

SpdMatrix SpdMatrix::from(const Eigen::MatrixXd& m, double tol_pd) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("SpdMatrix: input not square");
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1e-300, m.norm())) {
    throw std::invalid_argument("SpdMatrix: input not symmetric (max |M_ij - M_ji| = " +
                                std::to_string(asym) + ")");
  }
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (tol_pd < 0) {
    tol_pd = 1e-10 * sym.trace() / static_cast<double>(sym.rows());
  }
  if (!(min_eig > tol_pd)) {
    throw DefinitenessError(
        "matrix not positive definite: min eigenvalue " + std::to_string(min_eig) +
            " <= tolerance " + std::to_string(tol_pd),
        min_eig);
  }
  return SpdMatrix{std::move(sym), min_eig};
}

Eigen::MatrixXd inv_sqrt_spd(const SpdMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.values);
  return eig.eigenvectors() *
         eig.eigenvalues().array().rsqrt().matrix().asDiagonal() *
         eig.eigenvectors().transpose();
}

Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& m, double tol_pd) {
  return inv_sqrt_spd(SpdMatrix::from(m, tol_pd));
}

double off_diag_sq(const Eigen::MatrixXd& m) {
  return m.squaredNorm() - m.diagonal().squaredNorm();
}

}  // namespace nssjd
