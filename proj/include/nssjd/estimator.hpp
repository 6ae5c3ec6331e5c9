// The NSS-JD unmixing estimator: whiten by the average block covariance,
// jointly diagonalize the whitened block covariances.
#pragma once

#include <Eigen/Dense>

#include "nssjd/block_cov.hpp"
#include "nssjd/joint_diag.hpp"
#include "nssjd/series.hpp"

namespace nssjd {

struct NssJdOptions {
  JdOptions jd;
  // Optional convenience ordering of the unmixing rows by the variance of
  // their per-block variances (most volatile source first). Off by default;
  // ordering and signs are free in the model.
  bool order_by_volatility = false;
};

struct UnmixingEstimate {
  Eigen::MatrixXd w;         // u * whitener
  Eigen::MatrixXd u;         // orthogonal joint diagonalizer
  Eigen::MatrixXd whitener;  // symmetric inverse square root of the average
  BlockCovSet blockcov;
  JdResult jd;

  // ||w * blockcov.average * w' - I||_F, recorded at construction.
  double whitening_residual = 0.0;
};

UnmixingEstimate nss_jd(const SeriesMatrix& x, int s, const NssJdOptions& opts = {});

// Row-wise application of w: sources_t = w x_t.
SeriesMatrix recover_sources(const UnmixingEstimate& est, const SeriesMatrix& x);

}  // namespace nssjd
