// Command-line harness: generate model data, run the unmixing estimator,
// compute the minimum distance index, build theoretical efficiency values,
// and run full experiment grids producing plot-ready CSV.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nssjd/asymptotics.hpp"
#include "nssjd/estimator.hpp"
#include "nssjd/mdi.hpp"
#include "nssjd/parallel.hpp"
#include "nssjd/series.hpp"
#include "nssjd/sim_models.hpp"
#include "nssjd/sym_linalg.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Stream tags under the root seed; child indices keep every consumer of
// randomness on its own reproducible stream.
constexpr std::uint64_t kTagSim = 0;
constexpr std::uint64_t kTagTheory = 1;
constexpr std::uint64_t kTagCalibrate = 2;
constexpr std::uint64_t kTagCoeffs = 3;

void emit_error(const std::string& category, const std::string& message) {
  json j;
  j["error"] = message;
  j["category"] = category;
  std::cerr << j.dump() << "\n";
}

nssjd::ModelId parse_model_id(const std::string& name) {
  if (name == "M1") return nssjd::ModelId::M1;
  if (name == "M2") return nssjd::ModelId::M2;
  if (name == "M3") return nssjd::ModelId::M3;
  if (name == "M4") return nssjd::ModelId::M4;
  throw std::invalid_argument("unknown model '" + name + "' (expected M1..M4)");
}

std::uint64_t env_seed_or(std::uint64_t fallback) {
  if (const char* s = std::getenv("SEED")) {
    return std::strtoull(s, nullptr, 10);
  }
  return fallback;
}

std::string format_cell(double v) { return nssjd::format_double(v); }

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string model;
  int t_len = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::string manifest;
  int unit_cov_s = 0;  // when > 0, rescale to unit average block covariance
  std::uint64_t coeff_seed = 0;
  bool coeff_seed_given = false;
};

int run_simulate(const SimulateArgs& args) {
  const std::uint64_t seed = args.seed_given ? args.seed : env_seed_or(args.seed);
  const std::uint64_t coeff_seed = args.coeff_seed_given ? args.coeff_seed : seed;
  nssjd::ModelSpec spec = nssjd::standard_model(parse_model_id(args.model), coeff_seed);
  nssjd::RngStream root(seed);
  if (args.unit_cov_s > 0) {
    const int k = args.t_len / args.unit_cov_s;
    if (k < 1) throw std::invalid_argument("simulate: --unit-cov-s larger than --t");
    spec = nssjd::calibrate_unit_covariance(spec, k, args.unit_cov_s,
                                            root.child(kTagCalibrate));
  }
  const nssjd::GeneratedSeries gen =
      nssjd::generate(spec, args.t_len, root.child(kTagSim));
  nssjd::write_series_csv(gen.series, args.out);

  if (!args.manifest.empty()) {
    json m;
    m["command"] = "simulate";
    m["model"] = json::parse(nssjd::model_spec_to_json(spec));
    m["t"] = args.t_len;
    m["seed"] = seed;
    m["unit_cov_s"] = args.unit_cov_s;
    m["out"] = args.out;
    std::ofstream f(args.manifest);
    f << m.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string input;
  int s = 0;
  std::string w_out;
  std::string sources_out;
  std::string diagnostics;
  bool order_by_volatility = false;
};

int run_estimate(const EstimateArgs& args) {
  const nssjd::SeriesMatrix x = nssjd::load_series_csv(args.input);
  nssjd::NssJdOptions opts;
  opts.order_by_volatility = args.order_by_volatility;
  const nssjd::UnmixingEstimate est = nssjd::nss_jd(x, args.s, opts);
  nssjd::write_matrix_csv(est.w, args.w_out);
  if (!args.sources_out.empty()) {
    nssjd::write_series_csv(nssjd::recover_sources(est, x), args.sources_out);
  }
  if (!args.diagnostics.empty()) {
    json d;
    d["t"] = x.t_len();
    d["p"] = x.dim();
    d["s"] = args.s;
    d["k_blocks"] = est.blockcov.n_blocks;
    d["dropped_tail"] = est.blockcov.n_dropped_tail;
    d["whitening_residual"] = est.whitening_residual;
    d["jd"] = {{"sweeps", est.jd.sweeps},
               {"converged", est.jd.converged},
               {"objective", est.jd.objective},
               {"final_max_angle", est.jd.final_max_angle}};
    std::ofstream f(args.diagnostics);
    f << d.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// mdi

int run_mdi(const std::string& w_path, const std::string& a_path, int k_blocks) {
  const Eigen::MatrixXd w = nssjd::load_matrix_csv(w_path);
  const Eigen::MatrixXd a = nssjd::load_matrix_csv(a_path);
  const nssjd::MdiReport report = nssjd::mdi(w, a);
  json j;
  j["mdi"] = report.mdi;
  if (k_blocks > 0) {
    j["adapted_mdi"] =
        nssjd::adapted_mdi(report.mdi, k_blocks, static_cast<int>(w.rows()));
    j["k_blocks"] = k_blocks;
  }
  json perm = json::array(), signs = json::array();
  for (int v : report.best_g.perm) perm.push_back(v + 1);
  for (int v : report.best_g.signs) signs.push_back(v);
  j["best_permutation"] = perm;
  j["best_signs"] = signs;
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// theory

struct TheoryArgs {
  std::string model;
  int t_len = 0;
  int s = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int mc_reps = 20000;
  std::string mixing = "identity";
  std::string out;
};

int run_theory(const TheoryArgs& args) {
  const std::uint64_t seed = args.seed_given ? args.seed : env_seed_or(args.seed);
  const int k = args.t_len / args.s;
  nssjd::RngStream root(seed);
  nssjd::ModelSpec spec = nssjd::standard_model(parse_model_id(args.model),
                                                root.child(kTagCoeffs).next_u64());
  spec = nssjd::calibrate_unit_covariance(spec, k, args.s, root.child(kTagCalibrate));
  const nssjd::AsymptoticCov cov =
      nssjd::sigma_w_z(spec, k, args.s, root.child(kTagTheory), args.mc_reps);

  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(spec.dim, spec.dim);
  if (args.mixing != "identity") a = nssjd::load_matrix_csv(args.mixing);
  const nssjd::TheoryAdaptedMdi theory = nssjd::theory_adapted_mdi(cov, a);
  const nssjd::TheoryAdaptedMdi offdiag = nssjd::theory_adapted_mdi(cov, a, false);

  json j;
  j["model"] = args.model;
  j["t"] = args.t_len;
  j["s"] = args.s;
  j["k_blocks"] = k;
  j["theory_adapted_mdi"] = theory.value;
  j["theory_se"] = theory.se;
  j["theory_adapted_mdi_offdiag_only"] = offdiag.value;
  j["theory_offdiag_se"] = offdiag.se;
  j["asymptotic_cov"] = json::parse(nssjd::asymptotic_cov_to_json(cov));
  if (args.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(args.out);
    f << j.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentConfig {
  std::vector<std::string> models;
  std::vector<int> t_grid;
  std::vector<int> s_grid;
  int reps = 0;
  int mc_reps = 20000;
  std::uint64_t seed = 0;
  std::string mixing = "identity";
  std::string out_dir;
  bool record_timing = false;
  int threads = 1;
};

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config '" + path + "'");
  json j;
  f >> j;
  ExperimentConfig cfg;
  cfg.models = j.at("models").get<std::vector<std::string>>();
  cfg.t_grid = j.at("t_grid").get<std::vector<int>>();
  cfg.s_grid = j.at("s_grid").get<std::vector<int>>();
  cfg.reps = j.at("reps").get<int>();
  cfg.mc_reps = j.value("mc_reps", 20000);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.mixing = j.value("mixing", std::string("identity"));
  cfg.out_dir = j.at("out_dir").get<std::string>();
  cfg.record_timing = j.value("record_timing", false);
  cfg.threads = j.value("threads", 1);

  if (cfg.models.empty()) throw std::invalid_argument("config: models must be non-empty");
  for (const auto& m : cfg.models) parse_model_id(m);
  if (cfg.t_grid.empty() || cfg.s_grid.empty()) {
    throw std::invalid_argument("config: t_grid and s_grid must be non-empty");
  }
  if (cfg.reps < 1) throw std::invalid_argument("config: reps must be >= 1");
  if (cfg.mc_reps < 200) throw std::invalid_argument("config: mc_reps must be >= 200");
  const int max_s = *std::max_element(cfg.s_grid.begin(), cfg.s_grid.end());
  for (int s : cfg.s_grid) {
    if (s < 2) throw std::invalid_argument("config: block lengths must be >= 2");
  }
  for (int t : cfg.t_grid) {
    if (t < 2 * max_s) {
      throw std::invalid_argument("config: every T must be >= 2 * max(s_grid)");
    }
  }
  return cfg;
}

int run_experiment(const std::string& config_path, int threads_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  cfg.seed = env_seed_or(cfg.seed);
  if (threads_override > 0) cfg.threads = threads_override;

  std::filesystem::create_directories(cfg.out_dir);
  const std::string results_path = cfg.out_dir + "/results.csv";
  const std::string manifest_path = cfg.out_dir + "/manifest.json";

  nssjd::RngStream root(cfg.seed);

  Eigen::MatrixXd mixing;
  const bool identity_mixing = (cfg.mixing == "identity");
  if (!identity_mixing) mixing = nssjd::load_matrix_csv(cfg.mixing);

  const std::uint64_t coeff_seed = root.child(kTagCoeffs).next_u64();

  struct TheoryEntry {
    nssjd::ModelSpec spec;  // calibrated
    nssjd::TheoryAdaptedMdi theory;
  };
  std::map<std::string, TheoryEntry> theory_cache;

  json manifest;
  manifest["config"] = {{"models", cfg.models}, {"t_grid", cfg.t_grid},
                        {"s_grid", cfg.s_grid}, {"reps", cfg.reps},
                        {"mc_reps", cfg.mc_reps}, {"seed", cfg.seed},
                        {"mixing", cfg.mixing}, {"out_dir", cfg.out_dir},
                        {"record_timing", cfg.record_timing},
                        {"threads", cfg.threads}};
  manifest["notes"] = {
      "theory computed once per (model, s, K) and cached",
      "variance layouts resampled per Monte Carlo replicate for models with "
      "random segment lengths",
      "repetition streams keyed by (cell index, repetition index)"};
  manifest["cells"] = json::array();

  std::ofstream out(results_path);
  if (!out) throw std::invalid_argument("cannot write '" + results_path + "'");
  out << "model,T,s,K,mean_adapted_mdi,se_adapted_mdi,theory_adapted_mdi,"
         "theory_se,seconds\n";

  int cell_index = -1;
  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    for (int t_len : cfg.t_grid) {
      for (int s : cfg.s_grid) {
        ++cell_index;
        const auto start = std::chrono::steady_clock::now();
        const int k = t_len / s;
        json cell;
        cell["model"] = cfg.models[mi];
        cell["T"] = t_len;
        cell["s"] = s;
        cell["K"] = k;
        try {
          const std::string cache_key =
              cfg.models[mi] + ":" + std::to_string(s) + ":" + std::to_string(k);
          if (!theory_cache.count(cache_key)) {
            nssjd::ModelSpec spec =
                nssjd::standard_model(parse_model_id(cfg.models[mi]), coeff_seed);
            nssjd::RngStream calib_stream = root.child(kTagCalibrate)
                                                .child(mi)
                                                .child(static_cast<std::uint64_t>(s))
                                                .child(static_cast<std::uint64_t>(k));
            spec = nssjd::calibrate_unit_covariance(spec, k, s, calib_stream);
            nssjd::RngStream theory_stream = root.child(kTagTheory)
                                                 .child(mi)
                                                 .child(static_cast<std::uint64_t>(s))
                                                 .child(static_cast<std::uint64_t>(k));
            const nssjd::AsymptoticCov cov =
                nssjd::sigma_w_z(spec, k, s, theory_stream, cfg.mc_reps);
            const Eigen::MatrixXd a = identity_mixing
                                          ? Eigen::MatrixXd::Identity(spec.dim, spec.dim)
                                          : mixing;
            theory_cache[cache_key] = {spec, nssjd::theory_adapted_mdi(cov, a)};
          }
          const TheoryEntry& entry = theory_cache.at(cache_key);
          const nssjd::ModelSpec& spec = entry.spec;
          const Eigen::MatrixXd a = identity_mixing
                                        ? Eigen::MatrixXd::Identity(spec.dim, spec.dim)
                                        : mixing;

          std::vector<double> adapted(cfg.reps);
          nssjd::RngStream cell_stream =
              root.child(kTagSim).child(static_cast<std::uint64_t>(cell_index));
          nssjd::parallel_for(cfg.reps, cfg.threads, [&](int rep) {
            nssjd::RngStream rep_stream =
                cell_stream.child(static_cast<std::uint64_t>(rep));
            const nssjd::GeneratedSeries gen = nssjd::generate(spec, t_len, rep_stream);
            nssjd::SeriesMatrix x = gen.series;
            if (!identity_mixing) x.values = (gen.series.values * a.transpose()).eval();
            const nssjd::UnmixingEstimate est = nssjd::nss_jd(x, s);
            const nssjd::MdiReport report = nssjd::mdi(est.w, a);
            adapted[rep] = nssjd::adapted_mdi(report.mdi, est.blockcov.n_blocks,
                                              spec.dim);
          });

          double mean = 0.0;
          for (double v : adapted) mean += v;
          mean /= cfg.reps;
          double var = 0.0;
          for (double v : adapted) var += (v - mean) * (v - mean);
          var = cfg.reps > 1 ? var / (cfg.reps - 1) : 0.0;
          const double se = std::sqrt(var / cfg.reps);

          const double seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                  .count();
          out << cfg.models[mi] << "," << t_len << "," << s << "," << k << ","
              << format_cell(mean) << "," << format_cell(se) << ","
              << format_cell(entry.theory.value) << ","
              << format_cell(entry.theory.se) << ","
              << (cfg.record_timing ? format_cell(seconds) : std::string("0"))
              << "\n";

          cell["seconds"] = seconds;
          cell["scale_factors"] = spec.scale_factors;
          if (!theory_cache.at(cache_key).spec.ma_coeffs.empty()) {
            cell["ma_coeffs"] = spec.ma_coeffs;
          }
        } catch (const std::exception& e) {
          out << cfg.models[mi] << "," << t_len << "," << s << "," << k
              << ",nan,nan,nan,nan," << (cfg.record_timing ? "nan" : "0") << "\n";
          cell["error"] = e.what();
          emit_error("cell", std::string("cell failed, continuing: ") + e.what());
        }
        manifest["cells"].push_back(cell);
      }
    }
  }
  out.close();

  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << "\n";
  std::cout << results_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-stationary blind source separation by joint diagonalization "
               "of block covariances"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate latent model data as CSV");
  sim_cmd->add_option("--model", sim.model, "Model name (M1..M4)")->required();
  sim_cmd->add_option("--t", sim.t_len, "Series length")->required()->check(CLI::PositiveNumber);
  auto* sim_seed = sim_cmd->add_option("--seed", sim.seed, "Random seed");
  sim_cmd->add_option("--out", sim.out, "Output series CSV")->required();
  sim_cmd->add_option("--manifest", sim.manifest, "Manifest JSON path");
  sim_cmd->add_option("--unit-cov-s", sim.unit_cov_s,
                      "Rescale to unit average block covariance for this block length");
  auto* sim_coeff = sim_cmd->add_option("--coeff-seed", sim.coeff_seed,
                                        "Seed for the M4 coefficient draw (default: --seed)");

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "Estimate the unmixing matrix from CSV");
  est_cmd->add_option("--input", est.input, "Input series CSV")->required();
  est_cmd->add_option("--s", est.s, "Block length (>= 2)")->required();
  est_cmd->add_option("--w-out", est.w_out, "Unmixing matrix CSV")->required();
  est_cmd->add_option("--sources", est.sources_out, "Recovered sources CSV");
  est_cmd->add_option("--diagnostics", est.diagnostics, "Diagnostics JSON");
  est_cmd->add_flag("--order-by-volatility", est.order_by_volatility,
                    "Order rows by variance of block variances");

  std::string mdi_w, mdi_a;
  int mdi_k = 0;
  auto* mdi_cmd = app.add_subcommand("mdi", "Minimum distance index of W against mixing A");
  mdi_cmd->add_option("--w", mdi_w, "Unmixing matrix CSV")->required();
  mdi_cmd->add_option("--a", mdi_a, "Mixing matrix CSV")->required();
  mdi_cmd->add_option("--k", mdi_k, "Block count for the adapted index");

  TheoryArgs theory;
  auto* th_cmd = app.add_subcommand("theory", "Expected adapted MDI from the limiting covariance");
  th_cmd->add_option("--model", theory.model, "Model name (M1..M4)")->required();
  th_cmd->add_option("--t", theory.t_len, "Series length")->required();
  th_cmd->add_option("--s", theory.s, "Block length")->required();
  auto* th_seed = th_cmd->add_option("--seed", theory.seed, "Random seed");
  th_cmd->add_option("--mc-reps", theory.mc_reps, "Monte Carlo replicates (>= 200)");
  th_cmd->add_option("--mixing", theory.mixing, "Mixing matrix CSV or 'identity'");
  th_cmd->add_option("--out", theory.out, "Output JSON (stdout when omitted)");

  std::string config_path;
  int threads_override = 0;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a full experiment grid");
  exp_cmd->add_option("--config", config_path, "Experiment config JSON")->required();
  exp_cmd->add_option("--threads", threads_override, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*sim_cmd) {
      sim.seed_given = sim_seed->count() > 0;
      sim.coeff_seed_given = sim_coeff->count() > 0;
      return run_simulate(sim);
    }
    if (*est_cmd) {
      if (est.s < 2) {
        emit_error("usage", "estimate: block length --s must be >= 2");
        return kExitUsage;
      }
      return run_estimate(est);
    }
    if (*mdi_cmd) return run_mdi(mdi_w, mdi_a, mdi_k);
    if (*th_cmd) {
      theory.seed_given = th_seed->count() > 0;
      if (theory.s < 2 || theory.t_len < 2 * theory.s) {
        emit_error("usage", "theory: need s >= 2 and t >= 2 s");
        return kExitUsage;
      }
      return run_theory(theory);
    }
    if (*exp_cmd) return run_experiment(config_path, threads_override);
  } catch (const nssjd::DefinitenessError& e) {
    emit_error("numeric", e.what());
    return kExitNumeric;
  } catch (const nssjd::SeparabilityError& e) {
    emit_error("numeric", e.what());
    return kExitNumeric;
  } catch (const nssjd::ParseError& e) {
    emit_error("usage", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    emit_error("usage", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    emit_error("numeric", e.what());
    return kExitNumeric;
  }
  return 0;
}
