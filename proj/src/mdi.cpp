#include "nssjd/mdi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nssjd {

Eigen::MatrixXd SignedPermutation::matrix() const {
  const int p = static_cast<int>(perm.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) g(i, perm[i]) = signs[i];
  return g;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  // Jonker-Volgenant style shortest augmenting path, O(n^3).
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost not square");
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

std::pair<SignedPermutation, double> optimal_signed_permutation(
    const Eigen::MatrixXd& m) {
  const int p = static_cast<int>(m.rows());
  if (m.cols() != p) {
    throw std::invalid_argument("optimal_signed_permutation: input not square");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("optimal_signed_permutation: non-finite entries");
  }
  // cost(i, j): squared residual of row i of G m against e_i' when row i of G
  // selects source row j with the optimal sign.
  Eigen::MatrixXd cost(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      cost(i, j) = m.row(j).squaredNorm() - 2.0 * std::abs(m(j, i)) + 1.0;
    }
  }
  const std::vector<int> assign = solve_assignment(cost);
  SignedPermutation g;
  g.perm.resize(p);
  g.signs.resize(p);
  std::vector<double> chosen(p);
  for (int i = 0; i < p; ++i) {
    const int j = assign[i];
    g.perm[i] = j;
    g.signs[i] = (m(j, i) >= 0.0) ? 1 : -1;
    chosen[i] = cost(i, j);
  }
  // Summing in sorted order makes the distance bit-identical under row
  // permutations and sign flips of m (the chosen cost multiset is invariant).
  std::sort(chosen.begin(), chosen.end());
  double total = 0.0;
  for (double c : chosen) total += c;
  return {std::move(g), std::sqrt(std::max(0.0, total))};
}

MdiReport mdi(const Eigen::MatrixXd& w, const Eigen::MatrixXd& a) {
  const int p = static_cast<int>(w.rows());
  if (p < 2) throw std::invalid_argument("mdi: requires p >= 2");
  if (w.cols() != p || a.rows() != p || a.cols() != p) {
    throw std::invalid_argument("mdi: dimension mismatch");
  }
  MdiReport report;
  report.gain = w * a;
  auto [g, dist] = optimal_signed_permutation(report.gain);
  report.best_g = std::move(g);
  report.mdi = dist / std::sqrt(static_cast<double>(p - 1));
  report.adapted = std::numeric_limits<double>::quiet_NaN();
  return report;
}

double adapted_mdi(double mdi_value, int k_blocks, int p) {
  return static_cast<double>(k_blocks) * (p - 1) * mdi_value * mdi_value;
}

}  // namespace nssjd
