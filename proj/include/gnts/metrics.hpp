#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gnts/error.hpp"

namespace gnts {

/// Final cumulative regret of one (environment, algorithm, repetition).
struct TrialResult {
  std::string env;
  std::string alg;
  std::size_t rep = 0;
  double final_regret = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& v) {
  require(!v.empty(), ErrorCode::EmptyResults, "no values");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

using PerEnvAlg = std::map<std::string, std::map<std::string, double>>;

/// Mean final regret per (env, alg) divided by the largest mean among the
/// algorithms of that environment. If every algorithm has zero regret all
/// ratios are 1.
inline PerEnvAlg relative_regret(const std::vector<TrialResult>& trials) {
  require(!trials.empty(), ErrorCode::EmptyResults, "no results");
  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& t : trials) grouped[t.env][t.alg].push_back(t.final_regret);
  PerEnvAlg out;
  for (const auto& [env, algs] : grouped) {
    std::map<std::string, double> means;
    double worst = 0.0;
    for (const auto& [alg, values] : algs) {
      means[alg] = mean_std(values).mean;
      worst = std::max(worst, means[alg]);
    }
    for (const auto& [alg, m] : means) out[env][alg] = worst > 0.0 ? m / worst : 1.0;
  }
  return out;
}

/// Fraction of (env, rep) trials in which an algorithm ranks in the best two
/// by final regret. Competition ranking: rank = 1 + number strictly better.
inline std::map<std::string, double> top_rate(const std::vector<TrialResult>& trials) {
  require(!trials.empty(), ErrorCode::EmptyResults, "no results");
  std::set<std::string> algs;
  std::map<std::pair<std::string, std::size_t>, std::vector<std::pair<std::string, double>>> byTrial;
  for (const auto& t : trials) {
    algs.insert(t.alg);
    byTrial[{t.env, t.rep}].push_back({t.alg, t.final_regret});
  }
  require(algs.size() >= 2, ErrorCode::FewerThanTwoAlgorithms, "top rate needs two algorithms");
  std::map<std::string, double> hits;
  std::map<std::string, double> seen;
  for (const auto& a : algs) hits[a] = seen[a] = 0.0;
  for (const auto& [key, entries] : byTrial) {
    for (const auto& [alg, r] : entries) {
      std::size_t better = 0;
      for (const auto& other : entries)
        if (other.second < r) ++better;
      seen[alg] += 1.0;
      if (better + 1 <= 2) hits[alg] += 1.0;
    }
  }
  std::map<std::string, double> out;
  for (const auto& a : algs) out[a] = seen[a] > 0.0 ? hits[a] / seen[a] : 0.0;
  return out;
}

struct SummaryRow {
  std::string env;
  std::string alg;
  MeanStd regret;
  double relative_regret = 1.0;
  std::optional<double> top_rate;
};

/// Rows in the order algorithms first appear within each environment.
inline std::vector<SummaryRow> summarize(const std::vector<TrialResult>& trials) {
  require(!trials.empty(), ErrorCode::EmptyResults, "no results");
  const auto rel = relative_regret(trials);
  std::optional<std::map<std::string, double>> top;
  std::set<std::string> algs;
  for (const auto& t : trials) algs.insert(t.alg);
  if (algs.size() >= 2) top = top_rate(trials);

  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  for (const auto& t : trials) {
    const auto key = std::make_pair(t.env, t.alg);
    if (!values.count(key)) order.push_back(key);
    values[key].push_back(t.final_regret);
  }
  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    SummaryRow row{key.first, key.second, mean_std(values[key]), rel.at(key.first).at(key.second), {}};
    if (top) row.top_rate = top->at(key.second);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gnts
