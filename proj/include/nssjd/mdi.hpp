// Minimum distance index and optimal signed-permutation matching.
#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace nssjd {

// One +-1 per row and column: as a matrix, G(i, perm[i]) = signs[i].
struct SignedPermutation {
  std::vector<int> perm;
  std::vector<int> signs;

  Eigen::MatrixXd matrix() const;
};

struct MdiReport {
  double mdi = 0.0;      // in [0, 1] under the unit average covariance scaling
  double adapted = 0.0;  // K (p-1) mdi^2, filled when the block count is known
  SignedPermutation best_g;
  Eigen::MatrixXd gain;  // w * a
};

// Minimizes ||G m - I||_F over signed permutations. Per assignment
// (row i <- source row j) the optimal sign is sign(m(j, i)) and the cell
// cost is ||m_j||^2 - 2 |m(j, i)| + 1; the assignment itself is solved
// exactly in O(p^3). Ties break toward the lowest row index.
std::pair<SignedPermutation, double> optimal_signed_permutation(
    const Eigen::MatrixXd& m);

// Exact minimum-cost linear assignment (square cost matrix); returns
// row -> column. Deterministic for tied costs.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

// (1 / sqrt(p-1)) * inf_G ||G w a - I||_F. Values above 1 are possible for
// inputs that do not follow the unit average covariance convention; the
// formula is computed as-is. `adapted` in the result is NaN until
// adapted_mdi is applied.
MdiReport mdi(const Eigen::MatrixXd& w, const Eigen::MatrixXd& a);

// k (p-1) mdi^2.
double adapted_mdi(double mdi_value, int k_blocks, int p);

}  // namespace nssjd
