// Block-wise centered covariance matrices and their average.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "nssjd/series.hpp"

namespace nssjd {

struct BlockCovSet {
  std::vector<Eigen::MatrixXd> per_block;  // K symmetric p x p matrices
  Eigen::MatrixXd average;                 // (1/K) * sum of per_block
  int block_len = 0;                       // s
  int n_blocks = 0;                        // K
  int n_dropped_tail = 0;                  // r = T mod s
};

// Splits the series into K = floor(T/s) blocks of length s, dropping the
// tail, and computes each block's covariance about its own mean (divisor s,
// no Bessel correction). The average uses a fixed left-to-right summation.
BlockCovSet block_covariances(const SeriesMatrix& x, int s);

// Autocovariance of one source component between absolute time points
// (1-based): gamma(component, t_a, t_b).
using AutocovFn = std::function<double(int component, int t_a, int t_b)>;

// s x s matrix of centered second moments for one component of block i
// (block start 1-based absolute time): entry (a, b) is
//   gamma(a,b) - (1/s) sum_c gamma(a,c) - (1/s) sum_c gamma(b,c)
//            + (1/s^2) sum_{c,d} gamma(c,d).
Eigen::MatrixXd centered_block_moments(const AutocovFn& gamma, int component,
                                       int block_start, int s);

// Population block covariances cov_{Z,i} for sources with independent
// components: K diagonal matrices, each diagonal entry the mean of the
// centered second-moment diagonal for that component.
std::vector<Eigen::VectorXd> population_block_covariances(const AutocovFn& gamma,
                                                          int p, int k_blocks,
                                                          int s);

}  // namespace nssjd
