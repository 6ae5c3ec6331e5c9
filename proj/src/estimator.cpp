#include "nssjd/estimator.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "nssjd/sym_linalg.hpp"

namespace nssjd {

UnmixingEstimate nss_jd(const SeriesMatrix& x, int s, const NssJdOptions& opts) {
  UnmixingEstimate est;
  est.blockcov = block_covariances(x, s);
  if (est.blockcov.n_blocks < 2) {
    throw std::invalid_argument("nss_jd: at least 2 blocks required for separation");
  }
  est.whitener = inv_sqrt_spd(est.blockcov.average);

  // Whitening by explicit congruence keeps N * average * N = I bit-exact in
  // the diagonalized set.
  std::vector<Eigen::MatrixXd> whitened;
  whitened.reserve(est.blockcov.per_block.size());
  for (const auto& c : est.blockcov.per_block) {
    Eigen::MatrixXd w = est.whitener * c * est.whitener;
    w = 0.5 * (w + w.transpose());
    whitened.push_back(std::move(w));
  }

  est.jd = joint_diagonalize(whitened, opts.jd);
  est.u = est.jd.u;

  if (opts.order_by_volatility) {
    const int p = x.dim();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(p);
    for (const auto& m : whitened) {
      const Eigen::VectorXd d = (est.u * m * est.u.transpose()).diagonal();
      mean += d;
      sq += d.cwiseProduct(d);
    }
    const double k = static_cast<double>(whitened.size());
    const Eigen::VectorXd volatility = sq / k - (mean / k).cwiseAbs2();
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return volatility(a) > volatility(b); });
    Eigen::MatrixXd reordered(p, p);
    for (int i = 0; i < p; ++i) reordered.row(i) = est.u.row(order[i]);
    est.u = reordered;
  }

  est.w = est.u * est.whitener;
  est.whitening_residual =
      (est.w * est.blockcov.average * est.w.transpose() -
       Eigen::MatrixXd::Identity(x.dim(), x.dim()))
          .norm();
  return est;
}

SeriesMatrix recover_sources(const UnmixingEstimate& est, const SeriesMatrix& x) {
  if (est.w.cols() != x.dim()) {
    throw std::invalid_argument("recover_sources: dimension mismatch");
  }
  return SeriesMatrix{x.values * est.w.transpose()};
}

}  // namespace nssjd
