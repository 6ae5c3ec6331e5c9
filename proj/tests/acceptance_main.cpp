// Acceptance suite: one pass/fail line per criterion, exit code equal to the
// number of failed criteria. The experiment-determinism criterion drives the
// command-line binary, whose path is argv[1].
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nssjd/asymptotics.hpp"
#include "nssjd/block_cov.hpp"
#include "nssjd/estimator.hpp"
#include "nssjd/mdi.hpp"
#include "nssjd/rng.hpp"
#include "nssjd/series.hpp"
#include "nssjd/sim_models.hpp"
#include "nssjd/sym_linalg.hpp"
#include "test_support.hpp"

using namespace nssjd;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// --------------------------------------------------------------------------

void criterion_1_whitening() {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(101);
  double worst = 0.0;
  for (int p = 2; p <= 6; ++p) {
    const SeriesMatrix x = SeriesMatrix::from(testsup::random_gaussian(1000, p, rng));
    const UnmixingEstimate est = nss_jd(x, 10);
    worst = std::max(worst, (est.w * est.blockcov.average * est.w.transpose() -
                             Eigen::MatrixXd::Identity(p, p))
                                .norm());
  }
  const double secs = seconds_since(t0);
  report(1, worst < 1e-10 && secs < 1.0,
         fmt("whitening exactness: worst residual %.2e (< 1e-10), %.2f s (< 1 s)",
             worst, secs));
}

void criterion_2_jd_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_recovery = 0.0, worst_offdiag = 0.0, worst_conservation = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, 2000);
    const Eigen::MatrixXd u0 = testsup::random_orthogonal(4, rng);
    std::vector<Eigen::MatrixXd> mats;
    double total = 0.0;
    for (int i = 0; i < 20; ++i) {
      Eigen::VectorXd d(4);
      for (int j = 0; j < 4; ++j) d(j) = 0.5 + j + rng.uniform() * 3.0;
      mats.push_back(u0.transpose() * d.asDiagonal() * u0);
      total += mats.back().squaredNorm();
    }
    const JdResult res = joint_diagonalize(mats);
    const auto [g, cost] =
        optimal_signed_permutation((res.u * u0.transpose()).eval());
    worst_recovery = std::max(worst_recovery, cost);
    double off = 0.0;
    for (const auto& m : mats) {
      off += off_diag_sq((res.u * m * res.u.transpose()).eval());
    }
    worst_offdiag = std::max(worst_offdiag, off / total);
    for (int i = 0; i < res.sweeps; ++i) {
      worst_conservation =
          std::max(worst_conservation,
                   std::abs(res.sweep_objective[i] + res.sweep_offdiag[i] - total) /
                       total);
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_recovery < 1e-8 && worst_offdiag < 1e-14 &&
                    worst_conservation < 1e-9 && secs < 5.0;
  report(2, pass,
         fmt("joint diagonalization oracle: recovery %.2e (< 1e-8), off-diag "
             "%.2e (< 1e-14), conservation %.2e (< 1e-9), %.2f s (< 5 s)",
             worst_recovery, worst_offdiag, worst_conservation, secs));
}

void criterion_3_mdi_exact() {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(103);
  double worst = 0.0;
  for (int p : {3, 4}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const Eigen::MatrixXd m = testsup::random_gaussian(p, p, rng);
      const auto [g, cost] = optimal_signed_permutation(m);
      worst = std::max(worst, std::abs(cost - testsup::exhaustive_signed_perm_cost(m)));
    }
  }
  const double secs = seconds_since(t0);
  report(3, worst < 1e-12 && secs < 10.0,
         fmt("assignment vs exhaustive MDI: worst gap %.2e (< 1e-12) over 2000 "
             "matrices, %.2f s (< 10 s)",
             worst, secs));
}

void criterion_4_equivariance() {
  ModelSpec spec = standard_model(ModelId::M1, 104);
  spec = calibrate_unit_covariance(spec, 60, 50, RngStream(104, 1));
  const GeneratedSeries gen = generate(spec, 3000, RngStream(104, 2));
  const SeriesMatrix& x = gen.series;
  const SeriesMatrix src_x = recover_sources(nss_jd(x, 50), x);

  RngStream rng(104, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd l = testsup::random_invertible(3, rng);
    const SeriesMatrix lx{x.values * l.transpose()};
    const SeriesMatrix src_lx = recover_sources(nss_jd(lx, 50), lx);
    worst = std::max(worst,
                     testsup::exhaustive_source_match(src_lx.values, src_x.values) /
                         src_x.values.norm());
  }
  report(4, worst < 1e-6,
         fmt("affine equivariance over 50 invertible maps: worst relative "
             "mismatch %.2e (< 1e-6)",
             worst));
}

double mean_mdi(const ModelSpec& spec, int t_len, int s, int reps, RngStream rng,
                std::vector<double>* adapted_out = nullptr) {
  double sum = 0.0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(spec.dim, spec.dim);
  for (int r = 0; r < reps; ++r) {
    const GeneratedSeries gen = generate(spec, t_len, rng.child(r));
    const UnmixingEstimate est = nss_jd(gen.series, s);
    const double m = mdi(est.w, eye).mdi;
    sum += m;
    if (adapted_out) {
      adapted_out->push_back(adapted_mdi(m, est.blockcov.n_blocks, spec.dim));
    }
  }
  return sum / reps;
}

void criterion_5_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  const int s = 100, reps = 200;
  ModelSpec spec = standard_model(ModelId::M1, 105);
  spec = calibrate_unit_covariance(spec, 160, s, RngStream(105, 1));
  const double mdi_small = mean_mdi(spec, 1000, s, reps, RngStream(105, 2));
  const double mdi_large = mean_mdi(spec, 16000, s, reps, RngStream(105, 3));
  const double secs = seconds_since(t0);
  report(5, mdi_large < 0.4 * mdi_small && secs < 300.0,
         fmt("consistency: mean MDI %.4f at T=16000 vs %.4f at T=1000 "
             "(ratio %.3f < 0.4), %.1f s (< 300 s)",
             mdi_large, mdi_small, mdi_large / mdi_small, secs));
}

void criterion_6_efficiency_curves() {
  const auto t0 = std::chrono::steady_clock::now();
  const int s = 100, reps = 500, n_mc = 20000;
  bool pass = true;
  std::string detail = "efficiency curves, theory vs simulation (M1, s=100):";
  for (int t_len : {4000, 16000}) {
    const int k = t_len / s;
    ModelSpec spec = standard_model(ModelId::M1, 106);
    spec = calibrate_unit_covariance(spec, k, s, RngStream(106, 1).child(t_len));
    const AsymptoticCov cov =
        sigma_w_z(spec, k, s, RngStream(106, 2).child(t_len), n_mc);
    const TheoryAdaptedMdi theory =
        theory_adapted_mdi(cov, Eigen::MatrixXd::Identity(3, 3));

    std::vector<double> adapted;
    mean_mdi(spec, t_len, s, reps, RngStream(106, 3).child(t_len), &adapted);
    const double sim = testsup::mean(adapted);
    const double sim_se = testsup::standard_error(adapted);

    const double diff = std::abs(sim - theory.value);
    const double band =
        std::max(0.15 * theory.value,
                 4.0 * std::sqrt(sim_se * sim_se + theory.se * theory.se));
    pass = pass && diff < band;
    detail += fmt(" [T=%d: sim %.4f vs theory %.4f, |diff| %.4f < %.4f]", t_len,
                  sim, theory.value, diff, band);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 900.0;
  detail += fmt(" %.1f s (< 900 s)", secs);
  report(6, pass, detail);
}

void criterion_7_slow_convergence() {
  // First half: at s=10 the simulated mean must exceed its theoretical value
  // by more than 3 combined standard errors. The theory is built from
  // full-series replicates, so short-block effects are already inside the
  // theoretical value and the remaining excess (finite-sample nonlinearity
  // of the estimator) is only a few percent; detecting it needs the high
  // replication used here.
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);

  // The excess to detect is small (about 3% of the theoretical value), so
  // this half runs at high replication; the criterion fixes no counts.
  const int s1 = 10, t1 = 4000, k1 = t1 / s1;
  ModelSpec spec1 = standard_model(ModelId::M3, 107);
  spec1 = calibrate_unit_covariance(spec1, k1, s1);
  const AsymptoticCov cov1 = sigma_w_z(spec1, k1, s1, RngStream(107, 2), 100000);
  const TheoryAdaptedMdi th1 = theory_adapted_mdi(cov1, eye);
  const TheoryAdaptedMdi th1_off = theory_adapted_mdi(cov1, eye, false);
  std::vector<double> adapted1;
  mean_mdi(spec1, t1, s1, 50000, RngStream(107, 3), &adapted1);
  const double sim1 = testsup::mean(adapted1);
  const double se1 = testsup::standard_error(adapted1);
  const double combined1 = std::sqrt(se1 * se1 + th1.se * th1.se);
  const bool half1 = (sim1 - th1.value) > 3.0 * combined1;

  const int s2 = 100, t2 = 16000, k2 = t2 / s2;
  ModelSpec spec2 = standard_model(ModelId::M3, 107);
  spec2 = calibrate_unit_covariance(spec2, k2, s2);
  const AsymptoticCov cov2 = sigma_w_z(spec2, k2, s2, RngStream(107, 4), 20000);
  const TheoryAdaptedMdi th2 = theory_adapted_mdi(cov2, eye);
  std::vector<double> adapted2;
  mean_mdi(spec2, t2, s2, 1000, RngStream(107, 5), &adapted2);
  const double sim2 = testsup::mean(adapted2);
  const bool half2 = (sim2 - th2.value) < 0.15 * th2.value;

  report(7, half1 && half2,
         fmt("slow convergence (M3): s=10 excess %.4f = %.1f combined SE (need "
             "> 3; off-diag-only theory %.4f would give %.1f SE), s=100 excess "
             "%.1f%% (< 15%%)",
             sim1 - th1.value, (sim1 - th1.value) / combined1, th1_off.value,
             (sim1 - th1_off.value) / std::sqrt(se1 * se1 + th1_off.se * th1_off.se),
             100.0 * (sim2 - th2.value) / th2.value));
}

void criterion_8_isserlis() {
  const auto t0 = std::chrono::steady_clock::now();
  const int p = 3, s = 5, reps = 100000;
  const double vars[3] = {1.0, 2.0, 3.0};

  // Direct Monte Carlo of E[C_{l1 m1} C_{l2 m2}] for one centered block of
  // iid Gaussian data.
  std::vector<double> sum(81, 0.0), sumsq(81, 0.0);
  RngStream rng(108);
  Eigen::MatrixXd block(s, p);
  for (int r = 0; r < reps; ++r) {
    for (int a = 0; a < s; ++a) {
      for (int c = 0; c < p; ++c) block(a, c) = std::sqrt(vars[c]) * rng.normal();
    }
    const Eigen::RowVectorXd mean = block.colwise().mean();
    const Eigen::MatrixXd centered = block.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / s;
    int idx = 0;
    for (int l1 = 0; l1 < p; ++l1) {
      for (int m1 = 0; m1 < p; ++m1) {
        for (int l2 = 0; l2 < p; ++l2) {
          for (int m2 = 0; m2 < p; ++m2, ++idx) {
            const double v = cov(l1, m1) * cov(l2, m2);
            sum[idx] += v;
            sumsq[idx] += v * v;
          }
        }
      }
    }
  }

  // Closed form via the three-term fourth-moment identity with centered
  // within-block second moments D_l(a,b) = vars_l (1{a=b} - 1/s).
  const double centering = 1.0 - 1.0 / s;
  const double phi_factor = (s - 1.0) / (static_cast<double>(s) * s);
  int idx = 0, checked = 0;
  double worst_sigmas = 0.0;
  for (int l1 = 0; l1 < p; ++l1) {
    for (int m1 = 0; m1 < p; ++m1) {
      for (int l2 = 0; l2 < p; ++l2) {
        for (int m2 = 0; m2 < p; ++m2, ++idx) {
          const double c1 = (l1 == m1) ? vars[l1] * centering : 0.0;
          const double c2 = (l2 == m2) ? vars[l2] * centering : 0.0;
          const double phi = vars[l1] * vars[m1] * phi_factor;
          double expected = c1 * c2;
          if (l1 == l2 && m1 == m2) expected += phi;
          if (l1 == m2 && m1 == l2) expected += phi;

          const double mc_mean = sum[idx] / reps;
          const double mc_var = sumsq[idx] / reps - mc_mean * mc_mean;
          const double se = std::sqrt(mc_var / reps);
          worst_sigmas = std::max(worst_sigmas, std::abs(mc_mean - expected) /
                                                    std::max(se, 1e-300));
          ++checked;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  report(8, worst_sigmas < 4.0 && checked == 81 && secs < 60.0,
         fmt("fourth-moment oracle: all 81 combinations within %.2f SE (< 4), "
             "%.1f s (< 60 s)",
             worst_sigmas, secs));
}

void criterion_9_decomposition() {
  ModelSpec spec = standard_model(ModelId::M1, 109);
  const int k = 100, s = 10;
  spec = calibrate_unit_covariance(spec, k, s, RngStream(109, 1));
  const AsymptoticCov cov = sigma_w_z(spec, k, s, RngStream(109, 2), 20000);
  const Eigen::MatrixXd gap = (cov.sigma_w - cov.sigma_w_decomposed).cwiseAbs() -
                              4.0 * cov.mc_se;
  const double worst = gap.maxCoeff();
  report(9, worst <= 0.0,
         fmt("covariance decomposition self-consistency: worst |direct - "
             "decomposed| - 4 SE = %.2e (<= 0)",
             worst));
}

void criterion_10_determinism(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / "nssjd_acceptance_exp";
  fs::create_directories(dir);
  const fs::path config = dir / "config.json";
  {
    std::ofstream f(config);
    f << R"({"models":["M1","M3"],"t_grid":[600],"s_grid":[10,20],"reps":6,
            "mc_reps":400,"seed":1234,"out_dir":")"
      << (dir / "run").string() << R"("})";
  }
  auto run = [&]() {
    const std::string cmd = cli + " experiment --config " + config.string() +
                            " >/dev/null 2>/dev/null";
    return std::system(cmd.c_str());
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const int rc1 = run();
  const std::string first = slurp(dir / "run" / "results.csv");
  const int rc2 = run();
  const std::string second = slurp(dir / "run" / "results.csv");
  const bool pass = rc1 == 0 && rc2 == 0 && !first.empty() && first == second;
  report(10, pass,
         fmt("experiment rerun determinism: %zu-byte results identical: %s",
             first.size(), pass ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <path-to-cli-binary>\n", argv[0]);
    return 64;
  }
  criterion_1_whitening();
  criterion_2_jd_oracle();
  criterion_3_mdi_exact();
  criterion_4_equivariance();
  criterion_5_consistency();
  criterion_6_efficiency_curves();
  criterion_7_slow_convergence();
  criterion_8_isserlis();
  criterion_9_decomposition();
  criterion_10_determinism(argv[1]);
  std::printf("%d of 10 criteria passed\n", 10 - g_failures);
  return g_failures;
}
