#include "nssjd/asymptotics.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nssjd/block_cov.hpp"

namespace nssjd {

namespace {

// Sample covariance (denominator R-1) of centered rows.
Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& rows) {
  const int r = static_cast<int>(rows.rows());
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(r - 1);
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd sample_cross_cov(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const int r = static_cast<int>(x.rows());
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean().eval();
  const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean().eval();
  return (xc.transpose() * yc) / static_cast<double>(r - 1);
}

// Standard errors of the entries of sample_cov(rows).
Eigen::MatrixXd cov_entry_se(const Eigen::MatrixXd& rows) {
  const int r = static_cast<int>(rows.rows());
  const int d = static_cast<int>(rows.cols());
  const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean().eval();
  Eigen::MatrixXd mean_prod = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd mean_prod_sq = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < r; ++i) {
    const Eigen::MatrixXd prod = centered.row(i).transpose() * centered.row(i);
    mean_prod += prod;
    mean_prod_sq += prod.cwiseAbs2();
  }
  mean_prod /= static_cast<double>(r);
  mean_prod_sq /= static_cast<double>(r);
  return ((mean_prod_sq - mean_prod.cwiseAbs2()).cwiseMax(0.0) /
          static_cast<double>(r))
      .cwiseSqrt();
}

Eigen::MatrixXd h_from_moments(const PopulationMoments& moments) {
  const int k = static_cast<int>(moments.c.size());
  const int p = static_cast<int>(moments.c.front().size());
  const int s = moments.block_len;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < k; ++i) {
    for (int e = 0; e < p; ++e) {
      for (int f = e + 1; f < p; ++f) {
        const double gap = moments.c[i](e) - moments.c[i](f);
        const double cross =
            (moments.d[i][e] - moments.d[i][f]).squaredNorm() /
            (static_cast<double>(s) * s);
        h(e, f) += 4.0 * gap * gap + 8.0 * cross;
      }
    }
  }
  h /= static_cast<double>(k);
  h = (h + h.transpose()).eval();
  return h;
}

void check_h_positive(const Eigen::MatrixXd& h) {
  const int p = static_cast<int>(h.rows());
  const double tol = 1e-12 * (1.0 + h.maxCoeff());
  for (int e = 0; e < p; ++e) {
    for (int f = e + 1; f < p; ++f) {
      if (!(h(e, f) > tol)) {
        throw SeparabilityError(
            "separation strength between components " + std::to_string(e + 1) +
            " and " + std::to_string(f + 1) + " is not positive (" +
            std::to_string(h(e, f)) + "); limiting covariance undefined");
      }
    }
  }
}

}  // namespace

// With w_a the per-time variance differences of a component pair inside a
// block, the centered cross-moment gap reduces to
//   sum_a (w_a (1 - 2/s) + wbar/s)^2
//   + [2 s sum_a w_a^2 - s^2 wbar^2 - sum_a (2 w_a - wbar)^2] / s^2.
Eigen::MatrixXd h_iid_layout(const ModelSpec& spec, const Eigen::MatrixXd& layout,
                             int k_blocks, int s) {
  const int p = spec.dim;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);
  const double centering = 1.0 - 1.0 / static_cast<double>(s);
  std::vector<double> w(s);
  for (int i = 0; i < k_blocks; ++i) {
    for (int e = 0; e < p; ++e) {
      const double se2 = spec.scale_factors[e] * spec.scale_factors[e];
      for (int f = e + 1; f < p; ++f) {
        const double sf2 = spec.scale_factors[f] * spec.scale_factors[f];
        double sum_w = 0.0, sum_w2 = 0.0;
        for (int a = 0; a < s; ++a) {
          w[a] = se2 * layout(i * s + a, e) - sf2 * layout(i * s + a, f);
          sum_w += w[a];
          sum_w2 += w[a] * w[a];
        }
        const double wbar = sum_w / s;
        double diag_sq = 0.0, corner_sq = 0.0;
        for (int a = 0; a < s; ++a) {
          const double da = w[a] * (1.0 - 2.0 / s) + wbar / s;
          diag_sq += da * da;
          const double ca = 2.0 * w[a] - wbar;
          corner_sq += ca * ca;
        }
        const double off_sq =
            (2.0 * s * sum_w2 - static_cast<double>(s) * s * wbar * wbar - corner_sq) /
            (static_cast<double>(s) * s);
        const double gap = centering * wbar;
        h(e, f) += 4.0 * gap * gap +
                   8.0 * (diag_sq + off_sq) / (static_cast<double>(s) * s);
      }
    }
  }
  h /= static_cast<double>(k_blocks);
  h = (h + h.transpose()).eval();
  return h;
}

std::pair<int, int> pair_unflat(int idx, int p) {
  for (int e = 0; e < p - 1; ++e) {
    const int row_len = p - e - 1;
    if (idx < row_len) return {e, e + 1 + idx};
    idx -= row_len;
  }
  throw std::out_of_range("pair_unflat: index out of range");
}

Eigen::VectorXd vec_row_major(const Eigen::MatrixXd& m) {
  const int p = static_cast<int>(m.rows());
  Eigen::VectorXd v(p * m.cols());
  for (int e = 0; e < p; ++e) {
    for (int f = 0; f < m.cols(); ++f) v(e * m.cols() + f) = m(e, f);
  }
  return v;
}

Eigen::MatrixXd unvec_row_major(const Eigen::VectorXd& v, int p) {
  Eigen::MatrixXd m(p, p);
  for (int e = 0; e < p; ++e) {
    for (int f = 0; f < p; ++f) m(e, f) = v(e * p + f);
  }
  return m;
}

ETerms expectation_terms(const ModelSpec& spec, int k_blocks, int s, RngStream rng,
                         int n_mc) {
  validate_model(spec);
  if (n_mc < 100) {
    throw std::invalid_argument(
        "expectation_terms: n_mc < 100 refused (standard errors meaningless)");
  }
  const int p = spec.dim;
  const int t_len = k_blocks * s;

  std::vector<Eigen::MatrixXd> outer_sum(p, Eigen::MatrixXd::Zero(p, p));
  std::vector<Eigen::MatrixXd> outer_sq(p, Eigen::MatrixXd::Zero(p, p));
  std::vector<std::vector<Eigen::VectorXd>> mixed_sum(
      p, std::vector<Eigen::VectorXd>(p, Eigen::VectorXd::Zero(p)));
  std::vector<std::vector<Eigen::VectorXd>> mixed_sq(
      p, std::vector<Eigen::VectorXd>(p, Eigen::VectorXd::Zero(p)));

  for (int r = 0; r < n_mc; ++r) {
    RngStream stream = rng.child(static_cast<std::uint64_t>(r));
    const SeriesMatrix z =
        generate_from_layout(spec, draw_variance_layout(spec, t_len, stream), stream);
    const BlockCovSet bc = block_covariances(z, s);

    std::vector<Eigen::MatrixXd> rep_outer(p, Eigen::MatrixXd::Zero(p, p));
    std::vector<std::vector<Eigen::VectorXd>> rep_mixed(
        p, std::vector<Eigen::VectorXd>(p, Eigen::VectorXd::Zero(p)));
    for (const auto& c : bc.per_block) {
      for (int k = 0; k < p; ++k) {
        rep_outer[k].noalias() += c.col(k) * c.col(k).transpose();
        for (int j = 0; j < p; ++j) rep_mixed[j][k] += c(k, k) * c.col(j);
      }
    }
    const double inv_k = 1.0 / static_cast<double>(bc.n_blocks);
    for (int k = 0; k < p; ++k) {
      rep_outer[k] *= inv_k;
      outer_sum[k] += rep_outer[k];
      outer_sq[k] += rep_outer[k].cwiseAbs2();
      for (int j = 0; j < p; ++j) {
        rep_mixed[j][k] *= inv_k;
        mixed_sum[j][k] += rep_mixed[j][k];
        mixed_sq[j][k] += rep_mixed[j][k].cwiseAbs2();
      }
    }
  }

  ETerms et;
  et.n_replicates = n_mc;
  et.q_outer.resize(p);
  et.q_outer_se.resize(p);
  et.q_mixed.assign(p, std::vector<Eigen::VectorXd>(p));
  et.q_mixed_se.assign(p, std::vector<Eigen::VectorXd>(p));
  const double n = static_cast<double>(n_mc);
  for (int k = 0; k < p; ++k) {
    et.q_outer[k] = outer_sum[k] / n;
    et.q_outer_se[k] =
        ((outer_sq[k] / n - et.q_outer[k].cwiseAbs2()).cwiseMax(0.0) / n).cwiseSqrt();
    for (int j = 0; j < p; ++j) {
      et.q_mixed[j][k] = mixed_sum[j][k] / n;
      et.q_mixed_se[j][k] =
          ((mixed_sq[j][k] / n - et.q_mixed[j][k].cwiseAbs2()).cwiseMax(0.0) / n)
              .cwiseSqrt();
    }
  }
  return et;
}

Eigen::VectorXd bar_nabla0(const std::vector<Eigen::MatrixXd>& block_covs,
                           const ETerms& expectations,
                           const Eigen::MatrixXd& covbar) {
  if (block_covs.empty()) {
    throw std::invalid_argument("bar_nabla0: no block covariances");
  }
  const int p = static_cast<int>(covbar.rows());
  if (covbar.cols() != p || block_covs.front().rows() != p ||
      static_cast<int>(expectations.q_outer.size()) != p) {
    throw std::invalid_argument("bar_nabla0: dimension mismatch");
  }
  const double inv_k = 1.0 / static_cast<double>(block_covs.size());
  const Eigen::MatrixXd t_hat =
      -0.5 * (covbar - Eigen::MatrixXd::Identity(p, p));

  Eigen::VectorXd nabla(pair_count(p));
  for (int j = 0; j < p - 1; ++j) {
    for (int k = j + 1; k < p; ++k) {
      double kk_kj = 0.0, jj_jk = 0.0;
      for (const auto& c : block_covs) {
        kk_kj += c(k, k) * c(k, j);
        jj_jk += c(j, j) * c(j, k);
      }
      kk_kj *= inv_k;
      jj_jk *= inv_k;

      const auto& qk = expectations.q_outer[k];
      const auto& qj = expectations.q_outer[j];
      double v = -4.0 * kk_kj;
      v -= 8.0 * t_hat.row(k).dot(qk.col(j));
      v -= 4.0 * t_hat.row(k).dot(expectations.q_mixed[j][k]);
      v -= 4.0 * qk.row(k).dot(t_hat.col(j));
      v += 4.0 * jj_jk;
      v += 8.0 * t_hat.row(j).dot(qj.col(k));
      v += 4.0 * t_hat.row(j).dot(expectations.q_mixed[k][j]);
      v += 4.0 * qj.row(j).dot(t_hat.col(k));
      nabla(pair_flat(j, k, p)) = v;
    }
  }
  return nabla;
}

Eigen::MatrixXd compute_h(const PopulationMoments& moments) {
  if (moments.c.empty()) throw std::invalid_argument("compute_h: empty moments");
  Eigen::MatrixXd h = h_from_moments(moments);
  check_h_positive(h);
  return h;
}

Eigen::MatrixXd sigma_u_from_nabla(const Eigen::MatrixXd& sigma_nabla,
                                   const Eigen::MatrixXd& h) {
  const int p = static_cast<int>(h.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p * p, p * p);
  for (int e = 0; e < p; ++e) {
    for (int f = 0; f < p; ++f) {
      if (e == f) continue;
      for (int g = 0; g < p; ++g) {
        for (int hh = 0; hh < p; ++hh) {
          if (g == hh) continue;
          const double denom = h(e, f) * h(g, hh);
          double val = 0.0;
          if (e < f && g < hh) {
            val = sigma_nabla(pair_flat(e, f, p), pair_flat(g, hh, p));
          } else if (e < f && g > hh) {
            val = -sigma_nabla(pair_flat(e, f, p), pair_flat(hh, g, p));
          } else if (e > f && g < hh) {
            val = -sigma_nabla(pair_flat(f, e, p), pair_flat(g, hh, p));
          } else {
            val = sigma_nabla(pair_flat(f, e, p), pair_flat(hh, g, p));
          }
          out(quad_flat(e, f, p), quad_flat(g, hh, p)) = val / denom;
        }
      }
    }
  }
  return out;
}

AsymptoticCov sigma_w_z(const ModelSpec& spec, int k_blocks, int s, RngStream rng,
                        int n_mc) {
  validate_model(spec);
  if (k_blocks < 2 || s < 2) {
    throw std::invalid_argument("sigma_w_z: need K >= 2 and s >= 2");
  }
  if (n_mc < 200) {
    throw std::invalid_argument("sigma_w_z: n_mc < 200 refused (split passes)");
  }
  const int p = spec.dim;
  const int t_len = k_blocks * s;
  const int n1 = n_mc / 2;
  const int n2 = n_mc - n1;
  const bool random_layout = (spec.layout == LayoutKind::NbShared ||
                              spec.layout == LayoutKind::NbIndependent);

  Eigen::MatrixXd fixed_layout;
  if (!random_layout) {
    fixed_layout = draw_variance_layout(spec, t_len, RngStream(0));
  }

  // Pass 1: expectation terms, and separation strengths averaged over the
  // layout randomness where the layout is part of the data-generating
  // process.
  std::vector<Eigen::MatrixXd> outer_sum(p, Eigen::MatrixXd::Zero(p, p));
  std::vector<std::vector<Eigen::VectorXd>> mixed_sum(
      p, std::vector<Eigen::VectorXd>(p, Eigen::VectorXd::Zero(p)));
  Eigen::MatrixXd h_accum = Eigen::MatrixXd::Zero(p, p);

  for (int r = 0; r < n1; ++r) {
    RngStream stream = rng.child(static_cast<std::uint64_t>(r));
    Eigen::MatrixXd layout =
        random_layout ? draw_variance_layout(spec, t_len, stream) : fixed_layout;
    const SeriesMatrix z = generate_from_layout(spec, layout, stream);
    const BlockCovSet bc = block_covariances(z, s);
    const double inv_k = 1.0 / static_cast<double>(bc.n_blocks);
    for (const auto& c : bc.per_block) {
      for (int k = 0; k < p; ++k) {
        outer_sum[k].noalias() += inv_k * (c.col(k) * c.col(k).transpose());
        for (int j = 0; j < p; ++j) mixed_sum[j][k] += inv_k * c(k, k) * c.col(j);
      }
    }
    if (random_layout) {
      if (spec.dynamics == DynamicsKind::Iid) {
        h_accum += h_iid_layout(spec, layout, k_blocks, s);
      } else {
        h_accum +=
            h_from_moments(population_block_moments(spec, k_blocks, s, &layout));
      }
    }
  }

  ETerms et;
  et.n_replicates = n1;
  et.q_outer.resize(p);
  et.q_mixed.assign(p, std::vector<Eigen::VectorXd>(p));
  for (int k = 0; k < p; ++k) {
    et.q_outer[k] = outer_sum[k] / static_cast<double>(n1);
    for (int j = 0; j < p; ++j) et.q_mixed[j][k] = mixed_sum[j][k] / static_cast<double>(n1);
  }

  Eigen::MatrixXd h;
  if (random_layout) {
    h = h_accum / static_cast<double>(n1);
    check_h_positive(h);
  } else {
    h = compute_h(population_block_moments(spec, k_blocks, s, &fixed_layout));
  }

  // Pass 2: per-replicate influence pair and its covariance blocks.
  const int pairs = pair_count(p);
  const double sqrt_k = std::sqrt(static_cast<double>(k_blocks));
  Eigen::MatrixXd nabla_rows(n2, pairs);
  Eigen::MatrixXd a_rows(n2, p * p);
  Eigen::MatrixXd b_rows(n2, p * p);
  Eigen::MatrixXd m_rows(n2, p * p);

  for (int r = 0; r < n2; ++r) {
    RngStream stream = rng.child(static_cast<std::uint64_t>(n1 + r));
    Eigen::MatrixXd layout =
        random_layout ? draw_variance_layout(spec, t_len, stream) : fixed_layout;
    const SeriesMatrix z = generate_from_layout(spec, layout, stream);
    const BlockCovSet bc = block_covariances(z, s);

    const Eigen::VectorXd scaled =
        sqrt_k * bar_nabla0(bc.per_block, et, bc.average);
    Eigen::MatrixXd a_mat = Eigen::MatrixXd::Zero(p, p);
    for (int e = 0; e < p - 1; ++e) {
      for (int f = e + 1; f < p; ++f) {
        const double v = scaled(pair_flat(e, f, p)) / h(e, f);
        a_mat(e, f) = v;
        a_mat(f, e) = -v;
      }
    }
    const Eigen::MatrixXd b_mat =
        sqrt_k * (bc.average - Eigen::MatrixXd::Identity(p, p));

    nabla_rows.row(r) = scaled.transpose();
    a_rows.row(r) = vec_row_major(a_mat).transpose();
    b_rows.row(r) = vec_row_major(b_mat).transpose();
    m_rows.row(r) = vec_row_major(a_mat - 0.5 * b_mat).transpose();
  }

  AsymptoticCov out;
  out.p = p;
  out.k_blocks = k_blocks;
  out.block_len = s;
  out.n_mc = n_mc;
  out.h = h;
  out.sigma_nabla = sample_cov(nabla_rows);
  out.sigma_u = sigma_u_from_nabla(out.sigma_nabla, h);
  out.sigma_covbar = sample_cov(b_rows);
  const Eigen::MatrixXd cross = sample_cross_cov(a_rows, b_rows);
  out.sigma_cross = 0.5 * (cross + cross.transpose());
  out.sigma_w = sample_cov(m_rows);
  out.sigma_w_decomposed =
      out.sigma_u + 0.25 * out.sigma_covbar - out.sigma_cross;
  out.mc_se = cov_entry_se(m_rows);
  out.influence = std::move(m_rows);
  return out;
}

Eigen::MatrixXd sigma_w_x(const Eigen::MatrixXd& sigma_w_z_cov,
                          const Eigen::MatrixXd& a) {
  const int p = static_cast<int>(a.rows());
  if (a.cols() != p || sigma_w_z_cov.rows() != p * p ||
      sigma_w_z_cov.cols() != p * p) {
    throw std::invalid_argument("sigma_w_x: dimension mismatch");
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw std::invalid_argument("sigma_w_x: mixing matrix is singular");
  }
  const Eigen::MatrixXd b = lu.inverse();
  // vec(M b) = L vec(M) with L = I_p (x) b' under the row-major convention.
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p * p, p * p);
  for (int e = 0; e < p; ++e) {
    for (int f = 0; f < p; ++f) {
      for (int hh = 0; hh < p; ++hh) {
        l(quad_flat(e, f, p), quad_flat(e, hh, p)) = b(hh, f);
      }
    }
  }
  Eigen::MatrixXd out = l * sigma_w_z_cov * l.transpose();
  return 0.5 * (out + out.transpose());
}

double expected_adapted_mdi(const Eigen::MatrixXd& quad_cov, int p,
                            bool literal_offdiag_sum) {
  if (quad_cov.rows() != p * p || quad_cov.cols() != p * p) {
    throw std::invalid_argument("expected_adapted_mdi: dimension mismatch");
  }
  if (literal_offdiag_sum) {
    return quad_cov.sum() - quad_cov.trace();
  }
  double total = 0.0;
  for (int e = 0; e < p; ++e) {
    for (int f = 0; f < p; ++f) {
      if (e == f) continue;
      const int q = quad_flat(e, f, p);
      total += quad_cov(q, q);
    }
  }
  return total;
}

TheoryAdaptedMdi theory_adapted_mdi(const AsymptoticCov& cov,
                                    const Eigen::MatrixXd& a,
                                    bool include_diagonal) {
  const int p = cov.p;
  const int r = static_cast<int>(cov.influence.rows());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    throw std::invalid_argument("theory_adapted_mdi: mixing matrix is singular");
  }
  const Eigen::MatrixXd b = lu.inverse();

  Eigen::MatrixXd transformed(r, p * p);
  for (int i = 0; i < r; ++i) {
    const Eigen::MatrixXd m = unvec_row_major(cov.influence.row(i).transpose(), p);
    transformed.row(i) = vec_row_major(m * b).transpose();
  }
  const Eigen::RowVectorXd mean = transformed.colwise().mean();
  const Eigen::MatrixXd centered = transformed.rowwise() - mean;

  Eigen::VectorXd q(r);
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int e = 0; e < p; ++e) {
      for (int f = 0; f < p; ++f) {
        if (e == f && !include_diagonal) continue;
        const double v = centered(i, quad_flat(e, f, p));
        acc += v * v;
      }
    }
    q(i) = acc;
  }
  TheoryAdaptedMdi out;
  out.value = q.sum() / static_cast<double>(r - 1);
  const double qm = q.mean();
  const double var = (q.array() - qm).square().sum() / static_cast<double>(r - 1);
  out.se = std::sqrt(var / static_cast<double>(r));
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string asymptotic_cov_to_json(const AsymptoticCov& cov) {
  nlohmann::json j;
  j["p"] = cov.p;
  j["k_blocks"] = cov.k_blocks;
  j["block_len"] = cov.block_len;
  j["n_mc"] = cov.n_mc;
  j["index_convention"] = {
      {"quad_flat", "(e-1)*p + f for 1-based (e,f); row-major vec"},
      {"pair_flat", "lexicographic rank of (e,f), e < f, 1-based"}};
  j["sigma_nabla"] = matrix_to_json(cov.sigma_nabla);
  j["h"] = matrix_to_json(cov.h);
  j["sigma_u"] = matrix_to_json(cov.sigma_u);
  j["sigma_covbar"] = matrix_to_json(cov.sigma_covbar);
  j["sigma_cross"] = matrix_to_json(cov.sigma_cross);
  j["sigma_w"] = matrix_to_json(cov.sigma_w);
  j["sigma_w_decomposed"] = matrix_to_json(cov.sigma_w_decomposed);
  j["mc_se"] = matrix_to_json(cov.mc_se);
  return j.dump(2);
}

}  // namespace nssjd
