#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gnts/config.hpp"
#include "gnts/environment.hpp"
#include "gnts/io.hpp"
#include "gnts/metrics.hpp"
#include "gnts/random.hpp"

namespace gnts {

namespace stream_keys {
inline constexpr std::uint64_t kEnvironment = 0xE11;
inline constexpr std::uint64_t kAlgorithmBase = 0xA100;
}  // namespace stream_keys

/// Environment stream for one repetition; shared by every algorithm.
inline RandomStream environment_stream(std::uint64_t master, std::size_t rep) {
  return RandomStream(master).split(rep).split(stream_keys::kEnvironment);
}

inline std::uint64_t run_seed(std::uint64_t master, std::size_t rep, Algorithm alg) {
  return RandomStream(master).split(rep).split(stream_keys::kAlgorithmBase +
                                               static_cast<std::uint64_t>(alg)).seed();
}

inline std::size_t default_workers() {
  const auto n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Runs tasks 0..count-1 on `workers` threads; the first failure (by task
/// index) is rethrown after all threads join.
inline void parallel_for(std::size_t count, std::size_t workers,
                         const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ExperimentResult {
  std::string env_name;
  std::vector<RunResult> runs;  // ordered by (algorithm position, rep)
  std::vector<SummaryRow> summary;
};

inline std::vector<TrialResult> trials_of(const std::string& env, const std::vector<RunResult>& runs) {
  std::vector<TrialResult> out;
  for (const auto& r : runs)
    out.push_back({env, std::string(to_string(r.algorithm)), r.rep, r.final_regret()});
  return out;
}

inline std::vector<Environment> build_environments(const ExperimentConfig& cfg, std::size_t workers) {
  std::vector<std::optional<Environment>> slots(cfg.repetitions);
  parallel_for(cfg.repetitions, workers, [&](std::size_t rep) {
    slots[rep].emplace(make_environment(cfg.env, environment_stream(cfg.seed, rep)));
  });
  std::vector<Environment> envs;
  for (auto& s : slots) envs.push_back(std::move(*s));
  return envs;
}

/// Every (algorithm x repetition) run of one configuration. Deterministic in
/// the master seed regardless of the worker count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::size_t workers = 1) {
  validate(cfg);
  const auto envs = build_environments(cfg, workers);
  const std::size_t n_alg = cfg.algorithms.size();
  std::vector<RunResult> runs(n_alg * cfg.repetitions);
  parallel_for(runs.size(), workers, [&](std::size_t k) {
    const auto& spec = cfg.algorithms[k / cfg.repetitions];
    const std::size_t rep = k % cfg.repetitions;
    runs[k] = run_bandit(spec.algorithm, envs[rep], cfg.env, spec.hyper,
                         run_seed(cfg.seed, rep, spec.algorithm), rep);
  });
  ExperimentResult out;
  out.env_name = cfg.env.name();
  out.runs = std::move(runs);
  out.summary = summarize(trials_of(out.env_name, out.runs));
  return out;
}

inline void write_raw_csv(std::ostream& os, const std::vector<RunResult>& runs) {
  write_raw_header(os);
  for (const auto& r : runs) write_raw_rows(os, r);
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "env,alg,mean_regret,std_regret,relative_regret,top_rate\n";
  for (const auto& r : rows) {
    os << r.env << ',' << r.alg << ',' << format_double(r.regret.mean) << ','
       << format_double(r.regret.std) << ',' << format_double(r.relative_regret) << ',';
    if (r.top_rate) os << format_double(*r.top_rate);
    os << '\n';
  }
}

/// Per-round cumulative regret of one (alg, rep), read back from a raw CSV.
struct RawCurve {
  std::string alg;
  std::size_t rep = 0;
  std::vector<double> cum_regret;
};

inline std::vector<RawCurve> read_raw_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), ErrorCode::ParseError, "empty raw CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "rep,alg,t,choice,reward,inst_regret,cum_regret", ErrorCode::ParseError,
          "unexpected raw CSV header '" + line + "'");
  std::vector<RawCurve> curves;
  std::map<std::pair<std::string, std::size_t>, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    require(cols.size() == 7, ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": expected 7 columns");
    const auto rep = static_cast<std::size_t>(parse_double(cols[0]));
    const auto t = static_cast<std::size_t>(parse_double(cols[2]));
    const auto key = std::make_pair(cols[1], rep);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, curves.size()).first;
      curves.push_back({cols[1], rep, {}});
    }
    auto& curve = curves[it->second].cum_regret;
    require(t == curve.size() + 1, ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": rounds out of order");
    curve.push_back(parse_double(cols[6]));
  }
  require(!curves.empty(), ErrorCode::EmptyResults, "raw CSV has no rows");
  return curves;
}

inline std::vector<TrialResult> trials_of(const std::string& env, const std::vector<RawCurve>& curves) {
  std::vector<TrialResult> out;
  for (const auto& c : curves) out.push_back({env, c.alg, c.rep, c.cum_regret.back()});
  return out;
}

struct RegretCurve {
  std::string alg;
  std::vector<double> mean;
  std::vector<double> std;
};

/// Column-wise mean and sample std of the cumulative regret over repetitions.
inline std::vector<RegretCurve> regret_curves(const std::vector<RawCurve>& raw) {
  std::vector<std::string> algs;
  std::map<std::string, std::vector<const RawCurve*>> by_alg;
  for (const auto& c : raw) {
    if (!by_alg.count(c.alg)) algs.push_back(c.alg);
    by_alg[c.alg].push_back(&c);
  }
  std::vector<RegretCurve> out;
  for (const auto& alg : algs) {
    const auto& reps = by_alg[alg];
    const std::size_t horizon = reps.front()->cum_regret.size();
    for (const auto* r : reps)
      require(r->cum_regret.size() == horizon, ErrorCode::DimensionMismatch,
              "repetitions of " + alg + " have different horizons");
    RegretCurve curve{alg, {}, {}};
    std::vector<double> column(reps.size());
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t k = 0; k < reps.size(); ++k) column[k] = reps[k]->cum_regret[t];
      const auto ms = mean_std(column);
      curve.mean.push_back(ms.mean);
      curve.std.push_back(ms.std);
    }
    out.push_back(std::move(curve));
  }
  return out;
}

inline std::vector<RawCurve> raw_curves(const std::vector<RunResult>& runs) {
  std::vector<RawCurve> out;
  for (const auto& r : runs) {
    RawCurve c{std::string(to_string(r.algorithm)), r.rep, {}};
    for (const auto& rec : r.rounds) c.cum_regret.push_back(rec.cum_regret);
    out.push_back(std::move(c));
  }
  return out;
}

inline void write_curve_csv(std::ostream& os, const RegretCurve& c) {
  os << "t,mean,std\n";
  for (std::size_t t = 0; t < c.mean.size(); ++t)
    os << (t + 1) << ',' << format_double(c.mean[t]) << ',' << format_double(c.std[t]) << '\n';
}

/// Static line chart of mean cumulative regret with a +-1 std band.
inline std::string render_svg(const std::string& title, const std::vector<RegretCurve>& curves) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#7f7f7f"};
  const double w = 640, h = 400, left = 60, right = 150, top = 30, bottom = 40;
  std::size_t horizon = 1;
  double ymax = 0.0;
  for (const auto& c : curves) {
    horizon = std::max(horizon, c.mean.size());
    for (std::size_t t = 0; t < c.mean.size(); ++t) ymax = std::max(ymax, c.mean[t] + c.std[t]);
  }
  if (ymax <= 0.0) ymax = 1.0;
  auto px = [&](std::size_t t) {
    return left + (w - left - right) * static_cast<double>(t) / static_cast<double>(horizon);
  };
  auto py = [&](double v) { return h - bottom - (h - top - bottom) * v / ymax; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" << title
     << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - right << "\" y2=\""
     << py(0) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << top
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left - 5 << "\" y=\"" << top + 4
     << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
     << format_double(std::round(ymax * 100) / 100) << "</text>\n";
  os << "<text x=\"" << w - right << "\" y=\"" << h - bottom + 15
     << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">T=" << horizon
     << "</text>\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* color = palette[k % 7];
    std::ostringstream band, line;
    for (std::size_t t = 0; t < c.mean.size(); ++t)
      band << (t ? " " : "") << px(t + 1) << ',' << py(c.mean[t] + c.std[t]);
    for (std::size_t t = c.mean.size(); t-- > 0;)
      band << ' ' << px(t + 1) << ',' << py(std::max(0.0, c.mean[t] - c.std[t]));
    for (std::size_t t = 0; t < c.mean.size(); ++t)
      line << (t ? " " : "") << px(t + 1) << ',' << py(c.mean[t]);
    os << "<polygon points=\"" << band.str() << "\" fill=\"" << color
       << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    os << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << w - right + 10 << "\" y=\"" << top + 16 * (k + 1)
       << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << c.alg
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Writes curves/<env>_<alg>.csv for each algorithm and curves/<env>.svg.
inline std::vector<std::filesystem::path> emit_plot_data(const std::string& env,
                                                         const std::vector<RawCurve>& raw,
                                                         const std::filesystem::path& dir,
                                                         bool svg = true) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const auto curves = regret_curves(raw);
  for (const auto& c : curves) {
    const auto path = dir / (env + "_" + c.alg + ".csv");
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path.string());
    write_curve_csv(os, c);
    written.push_back(path);
  }
  if (svg) {
    const auto path = dir / (env + ".svg");
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path.string());
    os << render_svg(env, curves);
    written.push_back(path);
  }
  return written;
}

inline void write_experiment_outputs(const ExperimentResult& res, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "raw.csv");
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write raw.csv");
    write_raw_csv(os, res.runs);
  }
  {
    std::ofstream os(dir / "summary.csv");
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write summary.csv");
    write_summary_csv(os, res.summary);
  }
  emit_plot_data(res.env_name, raw_curves(res.runs), dir / "curves");
}

struct SweepRow {
  Algorithm algorithm;
  BanditHyper hyper;
  MeanStd regret;
};

/// Grid sweep: every algorithm at every grid point (Random once), sharing the
/// per-repetition environments.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                       const std::vector<presets::GridPoint>& grid,
                                       std::size_t workers = 1) {
  validate(cfg);
  const auto envs = build_environments(cfg, workers);
  std::vector<std::pair<Algorithm, BanditHyper>> points;
  for (const auto& spec : cfg.algorithms) {
    if (spec.algorithm == Algorithm::Random) {
      points.emplace_back(spec.algorithm, spec.hyper);
      continue;
    }
    for (const auto& g : grid) points.emplace_back(spec.algorithm, presets::apply(g, spec.algorithm, spec.hyper));
  }
  std::vector<double> finals(points.size() * cfg.repetitions);
  parallel_for(finals.size(), workers, [&](std::size_t k) {
    const auto& [alg, hp] = points[k / cfg.repetitions];
    const std::size_t rep = k % cfg.repetitions;
    finals[k] = run_bandit(alg, envs[rep], cfg.env, hp, run_seed(cfg.seed, rep, alg), rep).final_regret();
  });
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<double> v(finals.begin() + static_cast<std::ptrdiff_t>(i * cfg.repetitions),
                          finals.begin() + static_cast<std::ptrdiff_t>((i + 1) * cfg.repetitions));
    rows.push_back({points[i].first, points[i].second, mean_std(v)});
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "alg,nu,beta,learning_rate,lambda,mean_regret,std_regret\n";
  for (const auto& r : rows)
    os << to_string(r.algorithm) << ',' << format_double(r.hyper.nu) << ','
       << format_double(r.hyper.beta) << ',' << format_double(r.hyper.trainer.learning_rate) << ','
       << format_double(r.hyper.trainer.l2_weight) << ',' << format_double(r.regret.mean) << ','
       << format_double(r.regret.std) << '\n';
}

}  // namespace gnts
