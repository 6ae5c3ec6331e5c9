// Orthogonal joint approximate diagonalization by cyclic Jacobi rotations.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace nssjd {

struct JdOptions {
  double tol = 1e-10;   // convergence threshold on the largest sweep angle
  int max_sweeps = 200;
};

struct JdResult {
  Eigen::MatrixXd u;       // orthogonal, rows canonicalized
  double objective = 0.0;  // sum_i ||diag(U M_i U')||_F^2
  int sweeps = 0;
  bool converged = false;
  double final_max_angle = 0.0;
  // Objective and total off-diagonal mass after each completed sweep; their
  // sum is invariant (orthogonal invariance of the Frobenius norm).
  std::vector<double> sweep_objective;
  std::vector<double> sweep_offdiag;
};

// sum_i ||diag(U M_i U')||_F^2 for orthogonal u.
double objective_g(const Eigen::MatrixXd& u,
                   const std::vector<Eigen::MatrixXd>& mats);

// Cyclic sweeps over pairs (a, b) in lexicographic order; per pair the
// rotation angle is the closed-form maximizer of the pairwise objective
// (dominant eigenvector of the accumulated 2x2 matrix of
// (M_aa - M_bb, 2 M_ab) outer products), restricted to (-pi/4, pi/4].
// Exhausting max_sweeps is reported via converged=false, not an error.
JdResult joint_diagonalize(const std::vector<Eigen::MatrixXd>& mats,
                           const JdOptions& opts = {});

}  // namespace nssjd
