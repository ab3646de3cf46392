// Command-line front end: experiment runs, grid sweeps and diagnostics.
//
// Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gnts/diagnostics.hpp"
#include "gnts/gnts.hpp"

namespace fs = std::filesystem;
using namespace gnts;

namespace {

constexpr int kValidationExit = 1;
constexpr int kRuntimeExit = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = default_workers();
  std::string out;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = parse_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void print_summary(const std::vector<SummaryRow>& rows) {
  std::printf("%-28s %-8s %12s %12s %9s %9s\n", "env", "alg", "mean_R_T", "std_R_T", "rel", "top2");
  for (const auto& r : rows) {
    std::printf("%-28s %-8s %12.4f %12.4f %9.3f ", r.env.c_str(), r.alg.c_str(), r.regret.mean,
                r.regret.std, r.relative_regret);
    if (r.top_rate)
      std::printf("%9.3f\n", *r.top_rate);
    else
      std::printf("%9s\n", "-");
  }
}

int cmd_run(const Common& c) {
  const auto cfg = load(c);
  const auto res = run_experiment(cfg, c.workers);
  write_experiment_outputs(res, cfg.output_dir);
  print_summary(res.summary);
  std::printf("wrote %s\n", (fs::path(cfg.output_dir) / "raw.csv").string().c_str());
  return 0;
}

int cmd_sweep(const Common& c, const std::string& preset) {
  if (preset != "paper-grid") fail(ErrorCode::ValidationError, "unknown preset '" + preset + "'");
  const auto cfg = load(c);
  const auto rows = run_sweep(cfg, presets::paper_grid(), c.workers);
  fs::create_directories(cfg.output_dir);
  const auto path = fs::path(cfg.output_dir) / "sweep.csv";
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path.string());
  write_sweep_csv(os, rows);
  write_sweep_csv(std::cout, rows);
  return 0;
}

struct InitialKernel {
  Matrix k;
  double asymmetry;
};

InitialKernel initial_gntk(const ExperimentConfig& cfg) {
  const BanditHyper hp = cfg.algorithms.front().hyper;
  const Environment env = make_environment(cfg.env, environment_stream(cfg.seed, 0));
  RandomStream init_rng = RandomStream(run_seed(cfg.seed, 0, Algorithm::GnnTs)).split(1);
  const GnnParams theta0 = init_params(hp.layers, hp.width, cfg.env.features, init_rng);
  std::vector<AggregatedFeatures> aggs;
  for (const auto& f : env.graph_features) aggs.push_back(*f);
  const Matrix raw = empirical_gntk_raw(aggs, theta0);
  return {empirical_gntk(aggs, theta0).entries, max_asymmetry(raw)};
}

int cmd_gntk(const Common& c) {
  const auto cfg = load(c);
  const auto kernel = initial_gntk(cfg);
  Vector ev = symmetric_eigenvalues(kernel.k);
  std::sort(ev.begin(), ev.end(), std::greater<>());
  fs::create_directories(cfg.output_dir);
  {
    std::ofstream os(fs::path(cfg.output_dir) / "gntk.csv");
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write gntk.csv");
    write_kernel_csv(os, kernel.k);
  }
  {
    std::ofstream os(fs::path(cfg.output_dir) / "gntk_spectrum.csv");
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write gntk_spectrum.csv");
    os << "index,eigenvalue\n";
    for (Eigen::Index i = 0; i < ev.size(); ++i) os << i << ',' << format_double(ev(i)) << '\n';
  }
  std::printf("graphs=%ld rho_max=%.6e min_eigenvalue=%.6e max_asymmetry=%.3e psd=%s\n",
              static_cast<long>(kernel.k.rows()), ev(0), ev(ev.size() - 1), kernel.asymmetry,
              is_psd(kernel.k) ? "yes" : "no");
  std::printf("wrote %s\n", (fs::path(cfg.output_dir) / "gntk.csv").string().c_str());
  return 0;
}

int cmd_effdim(const Common& c, const std::string& kernel_csv, double horizon, double lambda) {
  Matrix k;
  if (!kernel_csv.empty()) {
    std::ifstream is(kernel_csv);
    require(static_cast<bool>(is), ErrorCode::IoError, "cannot read " + kernel_csv);
    k = read_kernel_csv(is);
  } else {
    if (c.config.empty()) fail(ErrorCode::ValidationError, "effdim needs --config or --kernel");
    k = initial_gntk(load(c)).k;
  }
  std::printf("effective_dimension=%.12g graphs=%ld horizon=%g lambda=%g\n",
              effective_dimension(k, horizon, lambda), static_cast<long>(k.rows()), horizon, lambda);
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opt) {
  const double err = gradcheck(opt);
  const bool ok = err < 1e-4;
  std::printf("max_relative_error=%.3e layers=%zu width=%zu trials=%zu %s\n", err, opt.layers,
              opt.width, opt.trials, ok ? "PASS" : "FAIL");
  return ok ? 0 : kRuntimeExit;
}

int cmd_potential(const Common& c) {
  const auto cfg = load(c);
  const auto check = potential_run(cfg);
  std::printf("sum_min_1_sigma2=%.10g two_log_det_ratio=%.10g %s\n", check.lhs, check.rhs,
              check.holds() ? "PASS" : "FAIL");
  return check.holds() ? 0 : kRuntimeExit;
}

int cmd_report(const std::string& raw_path, const std::string& out) {
  std::ifstream is(raw_path);
  require(static_cast<bool>(is), ErrorCode::IoError, "cannot read " + raw_path);
  const auto curves = read_raw_csv(is);
  const std::string env = fs::path(raw_path).parent_path().filename().string().empty()
                              ? "env"
                              : fs::path(raw_path).parent_path().filename().string();
  const auto rows = summarize(trials_of(env, curves));
  print_summary(rows);
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream os(fs::path(out) / "summary.csv");
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write summary.csv");
    write_summary_csv(os, rows);
    emit_plot_data(env, curves, fs::path(out) / "curves");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-action bandits: neural Thompson sampling and baselines"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* opt = sub->add_option("--config", common.config, "experiment config file");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "master seed (overrides the config)");
  };

  auto* run = app.add_subcommand("run", "run every algorithm x repetition of a config");
  add_common(run, true);
  run->add_option("--workers", common.workers, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out", common.out, "output directory");

  std::string preset;
  auto* sweep = app.add_subcommand("sweep", "hyperparameter grid sweep");
  add_common(sweep, true);
  sweep->add_option("--preset", preset, "grid preset")->required();
  sweep->add_option("--workers", common.workers, "worker threads")->check(CLI::PositiveNumber);
  sweep->add_option("--out", common.out, "output directory");

  auto* gntk = app.add_subcommand("gntk", "empirical GNTK at initialization and its spectrum");
  add_common(gntk, true);
  gntk->add_option("--out", common.out, "output directory");

  std::string kernel_csv;
  double horizon = 1000, lambda = 1e-3;
  auto* effdim = app.add_subcommand("effdim", "effective dimension of the empirical GNTK");
  add_common(effdim, false);
  effdim->add_option("--kernel", kernel_csv, "kernel CSV instead of a config")->check(CLI::ExistingFile);
  effdim->add_option("--horizon", horizon, "horizon T")->required();
  effdim->add_option("--lambda", lambda, "regularization lambda")->required();

  GradcheckOptions gc;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "analytic vs finite-difference gradient");
  gradcheck_cmd->add_option("--layers", gc.layers);
  gradcheck_cmd->add_option("--width", gc.width);
  gradcheck_cmd->add_option("--nodes", gc.nodes);
  gradcheck_cmd->add_option("--features", gc.features);
  gradcheck_cmd->add_option("--trials", gc.trials);
  gradcheck_cmd->add_option("--step", gc.step);
  gradcheck_cmd->add_option("--seed", gc.seed);

  auto* potential = app.add_subcommand("potential", "elliptical potential check on one full-mode run");
  add_common(potential, true);

  std::string raw_path, report_out;
  auto* report = app.add_subcommand("report", "summary statistics recomputed from a raw CSV");
  report->add_option("--raw", raw_path, "raw per-round CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "write summary.csv and curves here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidationExit;
  }

  try {
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common, preset);
    if (*gntk) return cmd_gntk(common);
    if (*effdim) return cmd_effdim(common, kernel_csv, horizon, lambda);
    if (*gradcheck_cmd) return cmd_gradcheck(gc);
    if (*potential) return cmd_potential(common);
    if (*report) return cmd_report(raw_path, report_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    const bool validation = e.code() == ErrorCode::ValidationError || e.code() == ErrorCode::ParseError;
    return validation ? kValidationExit : kRuntimeExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeExit;
  }
  return kRuntimeExit;
}
