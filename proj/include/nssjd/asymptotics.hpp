// Monte Carlo construction of the limiting covariance of the unmixing
// estimator and the expected adapted minimum distance index.
//
// Index conventions, used by every p^2 x p^2 matrix here:
//   quad_flat(e, f)  = e * p + f           (0-based, row-major vec)
//   pair_flat(e, f)  = lexicographic rank of (e, f), e < f, 0-based
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "nssjd/rng.hpp"
#include "nssjd/sim_models.hpp"

namespace nssjd {

class SeparabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int pair_count(int p) { return p * (p - 1) / 2; }

inline int pair_flat(int e, int f, int p) {
  // e < f, 0-based.
  return e * p - e * (e + 1) / 2 + (f - e - 1);
}

std::pair<int, int> pair_unflat(int idx, int p);

inline int quad_flat(int e, int f, int p) { return e * p + f; }

inline std::pair<int, int> quad_unflat(int idx, int p) { return {idx / p, idx % p}; }

// Row-major vectorization matching quad_flat.
Eigen::VectorXd vec_row_major(const Eigen::MatrixXd& m);
Eigen::MatrixXd unvec_row_major(const Eigen::VectorXd& v, int p);

// The averaged expectations entering the gradient expression:
//   q_outer[k]    = (1/K) sum_i E[ (C_i e_k)(C_i e_k)' ]
//   q_mixed[j][k] = (1/K) sum_i E[ (C_i)_kk * C_i e_j ]
// with C_i the block covariances of the sources. Estimated by Monte Carlo
// with entrywise standard errors.
struct ETerms {
  std::vector<Eigen::MatrixXd> q_outer;
  std::vector<Eigen::MatrixXd> q_outer_se;
  std::vector<std::vector<Eigen::VectorXd>> q_mixed;
  std::vector<std::vector<Eigen::VectorXd>> q_mixed_se;
  int n_replicates = 0;
};

// Monte Carlo estimate of the E-terms; refuses n_mc < 100.
ETerms expectation_terms(const ModelSpec& spec, int k_blocks, int s, RngStream rng,
                         int n_mc);

// The gradient of the diagonalization objective over the skew-symmetric
// chart, evaluated at the identity: one entry per pair (j, k), j < k.
// block_covs are the source block covariances of one realization, covbar
// their average.
Eigen::VectorXd bar_nabla0(const std::vector<Eigen::MatrixXd>& block_covs,
                           const ETerms& expectations,
                           const Eigen::MatrixXd& covbar);

// Separation strength between components e and f: a variance-gap term plus a
// centered cross-moment gap term. Throws SeparabilityError if any entry is
// not positive (the limiting covariance is undefined).
Eigen::MatrixXd compute_h(const PopulationMoments& moments);

// The piecewise map taking the covariance of the scaled gradient to the
// p^2 x p^2 covariance of the orthogonal factor; exactly zero on indices
// with e == f or g == h.
Eigen::MatrixXd sigma_u_from_nabla(const Eigen::MatrixXd& sigma_nabla,
                                   const Eigen::MatrixXd& h);

// Closed-form separation strengths for iid dynamics on a realized layout,
// O(K s p^2) instead of materializing the s x s moment matrices. Agrees with
// compute_h(population_block_moments(...)) on iid models.
Eigen::MatrixXd h_iid_layout(const ModelSpec& spec, const Eigen::MatrixXd& layout,
                             int k_blocks, int s);

struct AsymptoticCov {
  int p = 0;
  int k_blocks = 0;
  int block_len = 0;
  int n_mc = 0;  // total replicates over both passes

  Eigen::MatrixXd sigma_nabla;   // pair x pair, covariance of sqrt(K) gradient
  Eigen::MatrixXd h;             // p x p separation strengths
  Eigen::MatrixXd sigma_u;       // p^2 x p^2
  Eigen::MatrixXd sigma_covbar;  // p^2 x p^2, covariance of sqrt(K)(covbar - I)
  Eigen::MatrixXd sigma_cross;   // p^2 x p^2, symmetrized cross covariance
  Eigen::MatrixXd sigma_w;       // p^2 x p^2, direct covariance (authoritative)
  Eigen::MatrixXd sigma_w_decomposed;  // sigma_u + sigma_covbar/4 - sigma_cross
  Eigen::MatrixXd mc_se;         // p^2 x p^2 standard errors for sigma_w

  // One row per second-pass replicate: vec of the influence matrix
  // S(scaled gradient / H) - (1/2) sqrt(K)(covbar - I). Kept so downstream
  // consumers can transform replicates exactly (mixing congruence, adapted
  // MDI standard errors).
  Eigen::MatrixXd influence;
};

// Two-pass Monte Carlo: expectations and separation strengths from the first
// half of the replicates, covariances from the second half. Layouts are
// resampled per replicate for models with random segment lengths.
// Requires n_mc >= 200.
AsymptoticCov sigma_w_z(const ModelSpec& spec, int k_blocks, int s, RngStream rng,
                        int n_mc);

// Covariance of vec(M A^{-1}) for vec(M) distributed with the given
// covariance: the exact congruence induced by right multiplication.
Eigen::MatrixXd sigma_w_x(const Eigen::MatrixXd& sigma_w_z_cov, const Eigen::MatrixXd& a);

// Expected limiting value of K (p-1) MDI^2: the sum over off-diagonal
// positions (e, f), e != f, of the variance entries [S]_{(e,f),(e,f)}.
// literal_offdiag_sum instead sums every off-diagonal element of the
// p^2 x p^2 matrix (exposed for comparison only).
double expected_adapted_mdi(const Eigen::MatrixXd& quad_cov, int p,
                            bool literal_offdiag_sum = false);

struct TheoryAdaptedMdi {
  double value = 0.0;
  double se = 0.0;
};

// Expected adapted MDI for observations mixed by `a`, with a Monte Carlo
// standard error computed from the per-replicate influence vectors.
//
// The signed-permutation index computed by this project keeps the diagonal
// deviations of G W A - I (only a scale-inclusive index absorbs them), so
// its limiting mean sums the variance entries over all p^2 positions;
// include_diagonal = false restricts to the off-diagonal positions, the
// published reading for the scale-inclusive index.
TheoryAdaptedMdi theory_adapted_mdi(const AsymptoticCov& cov, const Eigen::MatrixXd& a,
                                    bool include_diagonal = true);

// JSON with the index conventions embedded; excludes the replicate matrix.
std::string asymptotic_cov_to_json(const AsymptoticCov& cov);

}  // namespace nssjd
