#include "nssjd/sim_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nssjd {

namespace {

const std::vector<std::vector<double>> kStandardPatterns = {
    {1.0, 2.0, 3.0}, {3.0, 1.0, 5.0}, {4.0, 7.0, 1.0}};

const std::vector<std::vector<double>> kModel3Coeffs = {
    {0.9, -0.8, 0.3, -0.5}, {0.8, 0.2, 0.3}, {-0.6, 0.7, 0.1}};

int third_index(int t, int t_len) {
  // 1-based t mapped onto three equal spans of 1..t_len.
  return std::min(2, (3 * (t - 1)) / t_len);
}

bool layout_is_random(const ModelSpec& spec) {
  return spec.layout == LayoutKind::NbShared ||
         spec.layout == LayoutKind::NbIndependent;
}

}  // namespace

ModelSpec standard_model(ModelId id, std::uint64_t coeff_seed) {
  ModelSpec spec;
  spec.id = id;
  spec.dim = 3;
  spec.variance_patterns = kStandardPatterns;
  spec.scale_factors = {1.0, 1.0, 1.0};
  spec.coeff_seed = coeff_seed;
  switch (id) {
    case ModelId::M1:
      spec.layout = LayoutKind::NbShared;
      spec.dynamics = DynamicsKind::Iid;
      break;
    case ModelId::M2:
      spec.layout = LayoutKind::NbIndependent;
      spec.dynamics = DynamicsKind::Iid;
      break;
    case ModelId::M3:
      spec.layout = LayoutKind::EqualThirds;
      spec.dynamics = DynamicsKind::MovingAverage;
      spec.ma_coeffs = kModel3Coeffs;
      break;
    case ModelId::M4: {
      spec.layout = LayoutKind::EqualThirds;
      spec.dynamics = DynamicsKind::MovingAverage;
      const int orders[3] = {40, 50, 60};
      spec.ma_coeffs.resize(3);
      for (int c = 0; c < 3; ++c) {
        RngStream coeff_rng(coeff_seed, static_cast<std::uint64_t>(c));
        spec.ma_coeffs[c].resize(orders[c]);
        for (double& v : spec.ma_coeffs[c]) v = 2.0 * coeff_rng.uniform() - 1.0;
      }
      break;
    }
    case ModelId::Custom:
      throw std::invalid_argument("standard_model: Custom has no standard parameters");
  }
  return spec;
}

void validate_model(const ModelSpec& spec) {
  if (spec.dim < 1) throw std::invalid_argument("model: dim must be >= 1");
  if (static_cast<int>(spec.variance_patterns.size()) != spec.dim) {
    throw std::invalid_argument("model: need one variance pattern per component");
  }
  for (const auto& pat : spec.variance_patterns) {
    if (pat.empty()) throw std::invalid_argument("model: empty variance pattern");
    for (double v : pat) {
      if (!(v > 0) || !std::isfinite(v)) {
        throw std::invalid_argument("model: variances must be positive and finite");
      }
    }
  }
  if (static_cast<int>(spec.scale_factors.size()) != spec.dim) {
    throw std::invalid_argument("model: need one scale factor per component");
  }
  for (double v : spec.scale_factors) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw std::invalid_argument("model: scale factors must be positive and finite");
    }
  }
  if (spec.dynamics == DynamicsKind::MovingAverage &&
      static_cast<int>(spec.ma_coeffs.size()) != spec.dim) {
    throw std::invalid_argument("model: need one coefficient list per component");
  }
  if (spec.layout == LayoutKind::FixedLength && spec.fixed_block_len < 1) {
    throw std::invalid_argument("model: fixed_block_len must be >= 1");
  }
  if (layout_is_random(spec)) {
    if (spec.nb_size < 1 || !(spec.nb_prob > 0) || !(spec.nb_prob < 1)) {
      throw std::invalid_argument("model: invalid negative binomial parameters");
    }
  }
  if (spec.layout == LayoutKind::EqualThirds) {
    for (const auto& pat : spec.variance_patterns) {
      if (static_cast<int>(pat.size()) != spec.n_variance_blocks) {
        throw std::invalid_argument(
            "model: variance pattern length must equal n_variance_blocks");
      }
    }
  }
}

int sample_negative_binomial(RngStream& rng, int size, double prob) {
  // Sum of `size` geometric(prob) failure counts, each by CDF inversion.
  const double log_q = std::log1p(-prob);
  long total = 0;
  for (int i = 0; i < size; ++i) {
    const double u = rng.uniform();
    if (u > 0.0) {
      total += static_cast<long>(std::floor(std::log1p(-u) / log_q));
    }
  }
  return static_cast<int>(std::min<long>(total, 1L << 30));
}

std::vector<int> segment_lengths(int t_len, const std::function<int()>& raw_length) {
  std::vector<int> lengths;
  int covered = 0;
  while (covered < t_len) {
    int len = std::max(1, raw_length());
    len = std::min(len, t_len - covered);
    lengths.push_back(len);
    covered += len;
  }
  return lengths;
}

Eigen::MatrixXd draw_variance_layout(const ModelSpec& spec, int t_len, RngStream rng) {
  validate_model(spec);
  if (t_len < 1) throw std::invalid_argument("draw_variance_layout: t_len must be >= 1");
  Eigen::MatrixXd layout(t_len, spec.dim);
  RngStream layout_rng = rng.child(0);

  switch (spec.layout) {
    case LayoutKind::NbShared: {
      auto draw = [&]() { return sample_negative_binomial(layout_rng, spec.nb_size, spec.nb_prob); };
      const auto lengths = segment_lengths(t_len, draw);
      int t = 0;
      for (std::size_t b = 0; b < lengths.size(); ++b) {
        for (int j = 0; j < lengths[b]; ++j, ++t) {
          for (int c = 0; c < spec.dim; ++c) {
            const auto& pat = spec.variance_patterns[c];
            layout(t, c) = pat[b % pat.size()];
          }
        }
      }
      break;
    }
    case LayoutKind::NbIndependent: {
      for (int c = 0; c < spec.dim; ++c) {
        RngStream comp_rng = layout_rng.child(static_cast<std::uint64_t>(c));
        auto draw = [&]() { return sample_negative_binomial(comp_rng, spec.nb_size, spec.nb_prob); };
        const auto lengths = segment_lengths(t_len, draw);
        const auto& pat = spec.variance_patterns[c];
        int t = 0;
        for (std::size_t b = 0; b < lengths.size(); ++b) {
          for (int j = 0; j < lengths[b]; ++j, ++t) layout(t, c) = pat[b % pat.size()];
        }
      }
      break;
    }
    case LayoutKind::FixedLength: {
      for (int t = 0; t < t_len; ++t) {
        const int b = t / spec.fixed_block_len;
        for (int c = 0; c < spec.dim; ++c) {
          const auto& pat = spec.variance_patterns[c];
          layout(t, c) = pat[b % pat.size()];
        }
      }
      break;
    }
    case LayoutKind::EqualThirds: {
      for (int t = 0; t < t_len; ++t) {
        const int b = third_index(t + 1, t_len);
        for (int c = 0; c < spec.dim; ++c) layout(t, c) = spec.variance_patterns[c][b];
      }
      break;
    }
  }
  return layout;
}

SeriesMatrix generate_from_layout(const ModelSpec& spec, const Eigen::MatrixXd& layout,
                                  RngStream rng) {
  validate_model(spec);
  const int t_len = static_cast<int>(layout.rows());
  if (layout.cols() != spec.dim || t_len < 1) {
    throw std::invalid_argument("generate_from_layout: layout shape mismatch");
  }
  Eigen::MatrixXd values(t_len, spec.dim);
  RngStream noise_rng = rng.child(1);

  for (int c = 0; c < spec.dim; ++c) {
    RngStream comp_rng = noise_rng.child(static_cast<std::uint64_t>(c));
    const double scale = spec.scale_factors[c];
    if (spec.dynamics == DynamicsKind::Iid) {
      for (int t = 0; t < t_len; ++t) {
        values(t, c) = scale * std::sqrt(layout(t, c)) * comp_rng.normal();
      }
    } else {
      const auto& theta = spec.ma_coeffs[c];
      const int q = static_cast<int>(theta.size());
      // Innovations indexed 1-q .. t_len; warm-up uses the first variance.
      std::vector<double> eps(t_len + q);
      for (int u = 1 - q; u <= t_len; ++u) {
        const int tv = std::clamp(u, 1, t_len);
        eps[u + q - 1] = std::sqrt(layout(tv - 1, c)) * comp_rng.normal();
      }
      for (int t = 1; t <= t_len; ++t) {
        double z = eps[t + q - 1];
        for (int l = 1; l <= q; ++l) z += theta[l - 1] * eps[t - l + q - 1];
        values(t - 1, c) = scale * z;
      }
    }
  }
  return SeriesMatrix{std::move(values)};
}

GeneratedSeries generate(const ModelSpec& spec, int t_len, RngStream rng) {
  Eigen::MatrixXd layout = draw_variance_layout(spec, t_len, rng);
  SeriesMatrix series = generate_from_layout(spec, layout, rng);
  return GeneratedSeries{std::move(series), std::move(layout)};
}

AutocovFn model_autocov(const ModelSpec& spec, const Eigen::MatrixXd& layout) {
  const int t_len = static_cast<int>(layout.rows());
  if (spec.dynamics == DynamicsKind::Iid) {
    return [spec, layout](int c, int ta, int tb) -> double {
      if (ta != tb) return 0.0;
      const double s = spec.scale_factors[c];
      return s * s * layout(ta - 1, c);
    };
  }
  return [spec, layout, t_len](int c, int ta, int tb) -> double {
    const auto& theta = spec.ma_coeffs[c];
    const int q = static_cast<int>(theta.size());
    const int lo = std::max(std::max(ta, tb) - q, 1 - q);
    const int hi = std::min(ta, tb);
    double acc = 0.0;
    for (int u = lo; u <= hi; ++u) {
      const double ca = (ta - u == 0) ? 1.0 : theta[ta - u - 1];
      const double cb = (tb - u == 0) ? 1.0 : theta[tb - u - 1];
      const int tv = std::clamp(u, 1, t_len);
      acc += ca * cb * layout(tv - 1, c);
    }
    const double s = spec.scale_factors[c];
    return s * s * acc;
  };
}

PopulationMoments population_block_moments(const ModelSpec& spec, int k_blocks, int s,
                                           const Eigen::MatrixXd* layout) {
  validate_model(spec);
  if (k_blocks < 1 || s < 1) {
    throw std::invalid_argument("population_block_moments: K and s must be >= 1");
  }
  Eigen::MatrixXd local;
  if (layout == nullptr) {
    if (layout_is_random(spec)) {
      throw std::invalid_argument(
          "population_block_moments: a realized layout is required for models "
          "with random segment lengths");
    }
    local = draw_variance_layout(spec, k_blocks * s, RngStream(0));
    layout = &local;
  }
  if (layout->rows() < static_cast<long>(k_blocks) * s) {
    throw std::invalid_argument("population_block_moments: layout shorter than K*s");
  }
  const AutocovFn gamma = model_autocov(spec, *layout);

  PopulationMoments moments;
  moments.block_len = s;
  moments.c.resize(k_blocks);
  moments.d.resize(k_blocks);
  for (int i = 0; i < k_blocks; ++i) {
    moments.c[i] = Eigen::VectorXd::Zero(spec.dim);
    moments.d[i].resize(spec.dim);
    for (int c = 0; c < spec.dim; ++c) {
      moments.d[i][c] = centered_block_moments(gamma, c, i * s + 1, s);
      moments.c[i](c) = moments.d[i][c].diagonal().mean();
    }
  }
  return moments;
}

std::vector<Eigen::VectorXd> population_block_covariances(
    const ModelSpec& spec, int k_blocks, int s, const Eigen::MatrixXd* layout) {
  return population_block_moments(spec, k_blocks, s, layout).c;
}

ModelSpec calibrate_unit_covariance(ModelSpec spec, int k_blocks, int s,
                                    RngStream rng, int n_layout_draws) {
  validate_model(spec);
  if (k_blocks < 1 || s < 2) {
    throw std::invalid_argument("calibrate_unit_covariance: need K >= 1, s >= 2");
  }
  const int t_len = k_blocks * s;
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(spec.dim);

  if (!layout_is_random(spec)) {
    const auto cov = population_block_covariances(spec, k_blocks, s);
    for (const auto& ci : cov) avg += ci;
    avg /= static_cast<double>(k_blocks);
  } else {
    // Iid dynamics with random segments: the population average block
    // covariance given a layout is (1 - 1/s) * (time average of per-time
    // variances); average that over layout draws.
    if (n_layout_draws < 1) {
      throw std::invalid_argument("calibrate_unit_covariance: need at least one draw");
    }
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec.dim);
    for (int r = 0; r < n_layout_draws; ++r) {
      const Eigen::MatrixXd layout =
          draw_variance_layout(spec, t_len, rng.child(static_cast<std::uint64_t>(r)));
      acc += layout.colwise().mean();
    }
    acc /= static_cast<double>(n_layout_draws);
    const double centering = 1.0 - 1.0 / static_cast<double>(s);
    for (int c = 0; c < spec.dim; ++c) {
      avg(c) = centering * spec.scale_factors[c] * spec.scale_factors[c] * acc(c);
    }
  }

  for (int c = 0; c < spec.dim; ++c) {
    spec.scale_factors[c] /= std::sqrt(avg(c));
  }
  return spec;
}

ConditionReport check_conditions(const PopulationMoments& moments, double delta) {
  ConditionReport report;
  if (moments.c.empty()) return report;
  const int p = static_cast<int>(moments.c.front().size());
  report.min_gap = std::numeric_limits<double>::infinity();
  report.min_block_variance = std::numeric_limits<double>::infinity();
  report.max_block_variance = 0.0;
  int separable = 0;
  for (const auto& ci : moments.c) {
    double gap = std::numeric_limits<double>::infinity();
    for (int j = 0; j < p; ++j) {
      for (int k = j + 1; k < p; ++k) gap = std::min(gap, std::abs(ci(j) - ci(k)));
    }
    const double lo = ci.minCoeff();
    const double hi = ci.maxCoeff();
    report.min_gap = std::min(report.min_gap, gap);
    report.min_block_variance = std::min(report.min_block_variance, lo);
    report.max_block_variance = std::max(report.max_block_variance, hi);
    if (gap >= delta && lo >= delta) ++separable;
  }
  report.separable_fraction =
      static_cast<double>(separable) / static_cast<double>(moments.c.size());
  return report;
}

namespace {

const char* model_id_name(ModelId id) {
  switch (id) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
    case ModelId::Custom: return "custom";
  }
  return "custom";
}

const char* layout_name(LayoutKind k) {
  switch (k) {
    case LayoutKind::NbShared: return "nb_shared";
    case LayoutKind::NbIndependent: return "nb_independent";
    case LayoutKind::FixedLength: return "fixed_length";
    case LayoutKind::EqualThirds: return "equal_thirds";
  }
  return "fixed_length";
}

const char* dynamics_name(DynamicsKind k) {
  return k == DynamicsKind::Iid ? "iid" : "moving_average";
}

}  // namespace

std::string model_spec_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["model_id"] = model_id_name(spec.id);
  j["p"] = spec.dim;
  j["layout"] = layout_name(spec.layout);
  j["dynamics"] = dynamics_name(spec.dynamics);
  j["variance_patterns"] = spec.variance_patterns;
  j["nb_params"] = {{"size", spec.nb_size}, {"prob", spec.nb_prob}};
  j["fixed_block_len"] = spec.fixed_block_len;
  j["ma_coeffs"] = spec.ma_coeffs;
  j["n_variance_blocks"] = spec.n_variance_blocks;
  j["scale_factors"] = spec.scale_factors;
  j["coeff_seed"] = spec.coeff_seed;
  return j.dump(2);
}

ModelSpec model_spec_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ModelSpec spec;
  const std::string id = j.at("model_id").get<std::string>();
  if (id == "M1") spec.id = ModelId::M1;
  else if (id == "M2") spec.id = ModelId::M2;
  else if (id == "M3") spec.id = ModelId::M3;
  else if (id == "M4") spec.id = ModelId::M4;
  else if (id == "custom") spec.id = ModelId::Custom;
  else throw std::invalid_argument("model: unknown model_id '" + id + "'");

  spec.dim = j.at("p").get<int>();
  const std::string layout = j.at("layout").get<std::string>();
  if (layout == "nb_shared") spec.layout = LayoutKind::NbShared;
  else if (layout == "nb_independent") spec.layout = LayoutKind::NbIndependent;
  else if (layout == "fixed_length") spec.layout = LayoutKind::FixedLength;
  else if (layout == "equal_thirds") spec.layout = LayoutKind::EqualThirds;
  else throw std::invalid_argument("model: unknown layout '" + layout + "'");

  const std::string dyn = j.at("dynamics").get<std::string>();
  if (dyn == "iid") spec.dynamics = DynamicsKind::Iid;
  else if (dyn == "moving_average") spec.dynamics = DynamicsKind::MovingAverage;
  else throw std::invalid_argument("model: unknown dynamics '" + dyn + "'");

  spec.variance_patterns = j.at("variance_patterns").get<std::vector<std::vector<double>>>();
  if (j.contains("nb_params")) {
    spec.nb_size = j["nb_params"].at("size").get<int>();
    spec.nb_prob = j["nb_params"].at("prob").get<double>();
  }
  spec.fixed_block_len = j.value("fixed_block_len", 0);
  if (j.contains("ma_coeffs")) {
    spec.ma_coeffs = j["ma_coeffs"].get<std::vector<std::vector<double>>>();
  }
  spec.n_variance_blocks = j.value("n_variance_blocks", 3);
  spec.scale_factors = j.at("scale_factors").get<std::vector<double>>();
  spec.coeff_seed = j.value("coeff_seed", std::uint64_t{0});
  validate_model(spec);
  return spec;
}

}  // namespace nssjd
