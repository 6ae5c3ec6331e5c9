// Latent-source generators (four standard models plus custom variants),
// their population block moments, unit-covariance rescaling, and
// separability diagnostics.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nssjd/block_cov.hpp"
#include "nssjd/rng.hpp"
#include "nssjd/series.hpp"

namespace nssjd {

enum class ModelId { M1, M2, M3, M4, Custom };

// How variance segments are laid out over time.
enum class LayoutKind {
  NbShared,       // negative binomial lengths, one draw shared by all components
  NbIndependent,  // negative binomial lengths, independent per component
  FixedLength,    // deterministic segments of fixed_block_len
  EqualThirds     // three equal spans of 1..T
};

enum class DynamicsKind { Iid, MovingAverage };

struct ModelSpec {
  ModelId id = ModelId::Custom;
  int dim = 0;
  LayoutKind layout = LayoutKind::FixedLength;
  DynamicsKind dynamics = DynamicsKind::Iid;

  // Per-component cyclic variance lists. For Iid these are marginal
  // variances; for MovingAverage they are innovation variances.
  std::vector<std::vector<double>> variance_patterns;

  int nb_size = 6;        // negative binomial size parameter
  double nb_prob = 0.05;  // negative binomial success probability
  int fixed_block_len = 0;

  std::vector<std::vector<double>> ma_coeffs;  // theta_1..theta_q; theta_0 = 1
  int n_variance_blocks = 3;

  std::vector<double> scale_factors;  // componentwise output scaling
  std::uint64_t coeff_seed = 0;       // seed the M4 coefficients were drawn from
};

// The standard parameterizations of M1-M4. M4 materializes its moving
// average coefficients (lengths 40/50/60, U(-1,1)) from coeff_seed at
// construction, so repeated generate calls share one coefficient draw.
ModelSpec standard_model(ModelId id, std::uint64_t coeff_seed = 0);

// Throws std::invalid_argument describing the first violated requirement.
void validate_model(const ModelSpec& spec);

// Number of failures before the size-th success, P(success) = prob.
int sample_negative_binomial(RngStream& rng, int size, double prob);

// Segment lengths covering exactly t_len points. Raw draws of zero are
// coerced to length one; the final segment is truncated at t_len.
std::vector<int> segment_lengths(int t_len, const std::function<int()>& raw_length);

// T x p matrix of unscaled per-time variances (marginal for Iid, innovation
// for MovingAverage). Uses rng.child(0) for shared negative binomial draws
// and rng.child(0).child(c) for per-component draws.
Eigen::MatrixXd draw_variance_layout(const ModelSpec& spec, int t_len, RngStream rng);

struct GeneratedSeries {
  SeriesMatrix series;
  Eigen::MatrixXd layout;  // the realized variance layout the draw used
};

// Component c draws its noise from rng.child(1).child(c), in time order with
// moving-average warm-up innovations first.
SeriesMatrix generate_from_layout(const ModelSpec& spec, const Eigen::MatrixXd& layout,
                                  RngStream rng);

GeneratedSeries generate(const ModelSpec& spec, int t_len, RngStream rng);

struct PopulationMoments {
  // c[i]: diagonal of the population covariance of block i (after centering
  // about the block mean, divisor s).
  std::vector<Eigen::VectorXd> c;
  // d[i][component]: s x s matrix of centered within-block second moments.
  std::vector<std::vector<Eigen::MatrixXd>> d;
  int block_len = 0;
};

// Analytic block moments for the first k_blocks * s time points. Models with
// random layouts (NbShared / NbIndependent) require the realized layout;
// deterministic layouts may pass nullptr.
PopulationMoments population_block_moments(const ModelSpec& spec, int k_blocks, int s,
                                           const Eigen::MatrixXd* layout = nullptr);

// Just the c-part of population_block_moments.
std::vector<Eigen::VectorXd> population_block_covariances(
    const ModelSpec& spec, int k_blocks, int s,
    const Eigen::MatrixXd* layout = nullptr);

// Componentwise autocovariance function of the model (including scale
// factors) for a given layout; the kernel shared by all moment code.
AutocovFn model_autocov(const ModelSpec& spec, const Eigen::MatrixXd& layout);

// Rescales so the population average block covariance is the identity.
// Deterministic layouts are handled analytically; random layouts average
// over n_layout_draws realizations drawn from rng.
ModelSpec calibrate_unit_covariance(ModelSpec spec, int k_blocks, int s,
                                    RngStream rng = RngStream(0x5ca1eull),
                                    int n_layout_draws = 10000);

struct ConditionReport {
  // Fraction of blocks whose variances are pairwise separated by at least
  // delta and all at least delta.
  double separable_fraction = 0.0;
  double min_gap = 0.0;             // smallest pairwise variance gap seen
  double min_block_variance = 0.0;
  double max_block_variance = 0.0;  // boundedness surrogate
};

ConditionReport check_conditions(const PopulationMoments& moments, double delta);

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

}  // namespace nssjd
