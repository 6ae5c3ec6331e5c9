#include "nssjd/block_cov.hpp"

#include <stdexcept>

namespace nssjd {

BlockCovSet block_covariances(const SeriesMatrix& x, int s) {
  const int t = x.t_len();
  const int p = x.dim();
  if (s < 2) throw std::invalid_argument("block length s must be >= 2");
  if (t < s) throw std::invalid_argument("series shorter than one block");

  BlockCovSet out;
  out.block_len = s;
  out.n_blocks = t / s;
  out.n_dropped_tail = t % s;
  out.per_block.reserve(out.n_blocks);

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < out.n_blocks; ++i) {
    const auto block = x.values.middleRows(i * s, s);
    const Eigen::RowVectorXd mean = block.colwise().mean();
    const Eigen::MatrixXd centered = block.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(s);
    cov = 0.5 * (cov + cov.transpose());
    sum += cov;
    out.per_block.push_back(std::move(cov));
  }
  out.average = sum / static_cast<double>(out.n_blocks);
  return out;
}

Eigen::MatrixXd centered_block_moments(const AutocovFn& gamma, int component,
                                       int block_start, int s) {
  Eigen::MatrixXd g(s, s);
  for (int a = 0; a < s; ++a) {
    for (int b = a; b < s; ++b) {
      const double v = gamma(component, block_start + a, block_start + b);
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  const Eigen::VectorXd row_mean = g.rowwise().mean();
  const double grand_mean = g.mean();
  Eigen::MatrixXd d(s, s);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) {
      d(a, b) = g(a, b) - row_mean(a) - row_mean(b) + grand_mean;
    }
  }
  return d;
}

std::vector<Eigen::VectorXd> population_block_covariances(const AutocovFn& gamma,
                                                          int p, int k_blocks,
                                                          int s) {
  if (k_blocks < 1 || s < 1) {
    throw std::invalid_argument("population_block_covariances: K and s must be >= 1");
  }
  std::vector<Eigen::VectorXd> out(k_blocks, Eigen::VectorXd::Zero(p));
  for (int i = 0; i < k_blocks; ++i) {
    for (int c = 0; c < p; ++c) {
      const Eigen::MatrixXd d = centered_block_moments(gamma, c, i * s + 1, s);
      out[i](c) = d.diagonal().mean();
    }
  }
  return out;
}

}  // namespace nssjd
