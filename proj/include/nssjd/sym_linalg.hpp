// Symmetric eigendecomposition utilities: inverse square root, definiteness
// checks, off-diagonal mass.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace nssjd {

class DefinitenessError : public std::runtime_error {
 public:
  DefinitenessError(const std::string& msg, double min_eig)
      : std::runtime_error(msg), min_eig(min_eig) {}
  double min_eig;
};

// Validated symmetric positive definite matrix. Construction symmetrizes the
// input as (M + M')/2 to absorb roundoff and records the smallest eigenvalue.
struct SpdMatrix {
  Eigen::MatrixXd values;
  double min_eig;

  // Throws std::invalid_argument on asymmetry beyond 1e-12 * ||M||_F and
  // DefinitenessError when min_eig <= tol_pd (default 1e-10 * trace / p).
  static SpdMatrix from(const Eigen::MatrixXd& m, double tol_pd = -1.0);
};

// Unique symmetric positive definite N with N * m * N = I. Near-singular
// input is a hard error; eigenvalues are never clamped.
Eigen::MatrixXd inv_sqrt_spd(const SpdMatrix& m);
Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& m, double tol_pd = -1.0);

// Sum of squared off-diagonal elements.
double off_diag_sq(const Eigen::MatrixXd& m);

}  // namespace nssjd
