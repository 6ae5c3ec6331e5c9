#include "nssjd/joint_diag.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nssjd {

namespace {

// Largest-|entry| of each row made positive; row order untouched.
void canonicalize_rows(Eigen::MatrixXd& u) {
  for (int i = 0; i < u.rows(); ++i) {
    int j = 0;
    u.row(i).cwiseAbs().maxCoeff(&j);
    if (u(i, j) < 0) u.row(i) = -u.row(i);
  }
}

// Angle maximizing sum_i (cos(2t) * alpha_i + sin(2t) * beta_i)^2 over the
// branch (-pi/4, pi/4], from the dominant eigenvector of G = sum_i h_i h_i'.
double optimal_angle(double gxx, double gxy, double gyy) {
  const double x = gxx - gyy;
  const double y = 2.0 * gxy;
  const double r = std::hypot(x, y);
  if (r <= 0.0) return 0.0;
  if (x + r <= 1e-15 * r) {
    // Dominant eigenvector is (0, 1): 2t = pi/2.
    return 0.25 * std::numbers::pi;
  }
  return 0.5 * std::atan2(y, x + r);
}

}  // namespace

double objective_g(const Eigen::MatrixXd& u,
                   const std::vector<Eigen::MatrixXd>& mats) {
  const int p = static_cast<int>(u.rows());
  const double orth = (u.transpose() * u - Eigen::MatrixXd::Identity(p, p)).norm();
  if (orth > 1e-8 * p) {
    throw std::invalid_argument("objective_g: u is not orthogonal");
  }
  double g = 0.0;
  for (const auto& m : mats) {
    if (m.rows() != p || m.cols() != p) {
      throw std::invalid_argument("objective_g: dimension mismatch");
    }
    for (int j = 0; j < p; ++j) {
      const double d = u.row(j) * m * u.row(j).transpose();
      g += d * d;
    }
  }
  return g;
}

JdResult joint_diagonalize(const std::vector<Eigen::MatrixXd>& input,
                           const JdOptions& opts) {
  if (input.empty()) {
    throw std::invalid_argument("joint_diagonalize: need at least one matrix");
  }
  const int p = static_cast<int>(input.front().rows());
  if (opts.tol <= 0) throw std::invalid_argument("joint_diagonalize: tol must be > 0");

  double total_sq = 0.0;
  for (const auto& m : input) {
    if (m.rows() != p || m.cols() != p) {
      throw std::invalid_argument("joint_diagonalize: dimension mismatch");
    }
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9 * std::max(1e-300, m.norm())) {
      throw std::invalid_argument("joint_diagonalize: input matrix not symmetric");
    }
    total_sq += m.squaredNorm();
  }

  std::vector<Eigen::MatrixXd> mats = input;
  JdResult res;
  res.u = Eigen::MatrixXd::Identity(p, p);

  double max_angle = 0.0;
  for (int sweep = 0; sweep < opts.max_sweeps && p > 1; ++sweep) {
    max_angle = 0.0;
    for (int a = 0; a < p - 1; ++a) {
      for (int b = a + 1; b < p; ++b) {
        double gxx = 0.0, gxy = 0.0, gyy = 0.0;
        for (const auto& m : mats) {
          const double alpha = m(a, a) - m(b, b);
          const double beta = 2.0 * m(a, b);
          gxx += alpha * alpha;
          gxy += alpha * beta;
          gyy += beta * beta;
        }
        const double theta = optimal_angle(gxx, gxy, gyy);
        max_angle = std::max(max_angle, std::abs(theta));
        if (theta == 0.0) continue;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (auto& m : mats) {
          // M <- R M R' with R the Givens rotation in the (a, b) plane.
          for (int j = 0; j < p; ++j) {
            const double ma = m(a, j), mb = m(b, j);
            m(a, j) = c * ma + s * mb;
            m(b, j) = -s * ma + c * mb;
          }
          for (int i = 0; i < p; ++i) {
            const double ma = m(i, a), mb = m(i, b);
            m(i, a) = c * ma + s * mb;
            m(i, b) = -s * ma + c * mb;
          }
        }
        for (int j = 0; j < p; ++j) {
          const double ua = res.u(a, j), ub = res.u(b, j);
          res.u(a, j) = c * ua + s * ub;
          res.u(b, j) = -s * ua + c * ub;
        }
      }
    }
    double diag_sq = 0.0, off_sq = 0.0;
    for (const auto& m : mats) {
      const double d = m.diagonal().squaredNorm();
      diag_sq += d;
      off_sq += m.squaredNorm() - d;
    }
    res.sweep_objective.push_back(diag_sq);
    res.sweep_offdiag.push_back(off_sq);
    ++res.sweeps;
    if (max_angle < opts.tol) {
      res.converged = true;
      break;
    }
  }
  if (p == 1) res.converged = true;
  res.final_max_angle = max_angle;
  canonicalize_rows(res.u);
  res.objective = objective_g(res.u, input);
  return res;
}

}  // namespace nssjd
