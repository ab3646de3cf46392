#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gnts/environment.hpp"
#include "gnts/error.hpp"
#include "gnts/io.hpp"

namespace gnts {

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::GnnTs;
  BanditHyper hyper;
};

struct ExperimentConfig {
  EnvConfig env;
  std::size_t repetitions = 10;
  std::vector<AlgorithmSpec> algorithms;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

struct Field {
  std::string value;
  std::size_t line = 0;
};

using Section = std::map<std::string, Field>;

class KeyReader {
 public:
  KeyReader(std::string section, const Section& fields) : section_(std::move(section)), fields_(fields) {}

  template <class T, class Parse>
  void read(const std::string& key, T& out, Parse&& parse) {
    const auto it = fields_.find(key);
    if (it == fields_.end()) return;
    try {
      out = parse(it->second.value);
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, "line " + std::to_string(it->second.line) + ": [" + section_ +
                                      "] " + key + ": " + e.what());
    }
  }

  void number(const std::string& key, double& out) { read(key, out, parse_double); }

  void count(const std::string& key, std::size_t& out) {
    read(key, out, [](const std::string& v) {
      const double d = parse_double(v);
      require(d >= 0.0 && d == std::floor(d) && d < 1e15, ErrorCode::ParseError,
              "expected a non-negative integer, got '" + v + "'");
      return static_cast<std::size_t>(d);
    });
  }

  void seed(const std::string& key, std::uint64_t& out) {
    read(key, out, [](const std::string& v) {
      std::uint64_t x = 0;
      const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
      require(res.ec == std::errc() && res.ptr == v.data() + v.size(), ErrorCode::ParseError,
              "expected an unsigned integer, got '" + v + "'");
      return x;
    });
  }

  void flag(const std::string& key, bool& out) {
    read(key, out, [](const std::string& v) {
      if (v == "true" || v == "yes" || v == "1") return true;
      if (v == "false" || v == "no" || v == "0") return false;
      fail(ErrorCode::ParseError, "expected true/false, got '" + v + "'");
    });
  }

 private:
  std::string section_;
  const Section& fields_;
};

inline const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys{
      "layers", "width", "nu", "beta", "learning_rate", "lambda", "epochs", "batch_size",
      "uncertainty", "gradients", "warm_start", "train_every", "cold_restart", "ridge_center",
      "batch_scaling"};
  return keys;
}

inline void apply_model_section(const std::string& name, const Section& fields, BanditHyper& hp) {
  KeyReader r(name, fields);
  r.count("layers", hp.layers);
  r.count("width", hp.width);
  r.number("nu", hp.nu);
  r.number("beta", hp.beta);
  r.number("learning_rate", hp.trainer.learning_rate);
  r.number("lambda", hp.trainer.l2_weight);
  r.count("epochs", hp.trainer.epochs);
  r.count("batch_size", hp.trainer.minibatch_size);
  r.count("train_every", hp.train_every);
  r.flag("warm_start", hp.trainer.warm_start);
  bool cold = !hp.trainer.warm_start;
  r.flag("cold_restart", cold);
  hp.trainer.warm_start = !cold;
  r.read("uncertainty", hp.uncertainty, [](const std::string& v) {
    if (v == "full") return UncertaintyMode::Full;
    if (v == "diagonal") return UncertaintyMode::Diagonal;
    fail(ErrorCode::ParseError, "expected full or diagonal, got '" + v + "'");
  });
  r.read("gradients", hp.initial_gradients, [](const std::string& v) {
    if (v == "current") return false;
    if (v == "initial") return true;
    fail(ErrorCode::ParseError, "expected current or initial, got '" + v + "'");
  });
  r.read("ridge_center", hp.trainer.ridge_center, [](const std::string& v) {
    if (v == "origin") return RidgeCenter::Origin;
    if (v == "initial") return RidgeCenter::Initial;
    fail(ErrorCode::ParseError, "expected origin or initial, got '" + v + "'");
  });
  r.read("batch_scaling", hp.trainer.batch_scaling, [](const std::string& v) {
    if (v == "history") return BatchScaling::HistoryLength;
    if (v == "batch") return BatchScaling::BatchSize;
    fail(ErrorCode::ParseError, "expected history or batch, got '" + v + "'");
  });
}

}  // namespace detail

/// Hyperparameters every algorithm starts from (width and learning rate are
/// the only values not taken from the published setup).
inline BanditHyper default_hyper() {
  BanditHyper hp;
  hp.layers = 2;
  hp.width = 512;
  hp.nu = 1.0;
  hp.beta = 1.0;
  hp.trainer.learning_rate = 1e-2;
  hp.trainer.l2_weight = 1e-3;
  hp.trainer.epochs = 30;
  hp.trainer.minibatch_size = 5;
  hp.uncertainty = UncertaintyMode::Diagonal;
  return hp;
}

inline std::vector<std::string> violations(const ExperimentConfig& cfg) {
  std::vector<std::string> out = cfg.env.violations();
  if (cfg.repetitions < 1) out.push_back("experiment.repetitions must be >= 1");
  if (cfg.algorithms.empty()) out.push_back("algorithms.names must list at least one algorithm");
  std::set<Algorithm> seen;
  for (const auto& spec : cfg.algorithms) {
    if (!seen.insert(spec.algorithm).second)
      out.push_back("algorithms.names lists " + std::string(to_string(spec.algorithm)) + " twice");
    for (const auto& v : spec.hyper.violations())
      out.push_back(std::string(to_string(spec.algorithm)) + ": " + v);
  }
  return out;
}

inline void validate(const ExperimentConfig& cfg) {
  const auto bad = violations(cfg);
  if (bad.empty()) return;
  std::string msg;
  for (const auto& b : bad) msg += (msg.empty() ? "" : "; ") + b;
  fail(ErrorCode::ValidationError, msg);
}

/// Strict INI-style parser. Sections: [environment], [experiment], [model],
/// [algorithms] and one optional section per algorithm name overriding
/// [model] keys for that algorithm. Unknown sections or keys are errors.
inline ExperimentConfig parse_config_string(const std::string& text) {
  using detail::Field;
  using detail::Section;
  static const std::map<std::string, std::set<std::string>> allowed{
      {"environment",
       {"graph", "edge_probability", "nodes", "actions", "features", "reward", "noise",
        "gp_noise", "normalize"}},
      {"experiment", {"horizon", "repetitions", "seed", "output"}},
      {"model", detail::model_keys()},
      {"algorithms", {"names"}},
  };

  std::map<std::string, Section> sections;
  std::vector<std::string> order;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find_first_of("#;");
    const std::string line = detail::trim(raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::ParseError,
              "line " + std::to_string(lineno) + ": unterminated section header");
      current = detail::trim(line.substr(1, line.size() - 2));
      const bool known = allowed.count(current) > 0 || parse_algorithm(current).has_value();
      require(known, ErrorCode::ParseError,
              "line " + std::to_string(lineno) + ": unknown section [" + current + "]");
      require(sections.count(current) == 0, ErrorCode::ParseError,
              "line " + std::to_string(lineno) + ": duplicate section [" + current + "]");
      sections[current];
      order.push_back(current);
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": expected key = value");
    require(!current.empty(), ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": key outside of any section");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto& keys = allowed.count(current) ? allowed.at(current) : detail::model_keys();
    require(keys.count(key) > 0, ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": unknown key '" + key + "' in [" + current + "]");
    require(!value.empty(), ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    auto& sec = sections[current];
    require(sec.count(key) == 0, ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    sec[key] = Field{value, lineno};
  }

  ExperimentConfig cfg;
  const Section empty;
  auto section = [&](const std::string& name) -> const Section& {
    const auto it = sections.find(name);
    return it == sections.end() ? empty : it->second;
  };

  {
    detail::KeyReader r("environment", section("environment"));
    std::string graph = "er";
    double p = 0.4;
    std::string reward = "linear";
    r.read("graph", graph, [](const std::string& v) { return v; });
    r.number("edge_probability", p);
    r.count("nodes", cfg.env.nodes);
    r.count("actions", cfg.env.actions);
    r.count("features", cfg.env.features);
    r.number("noise", cfg.env.noise_sd);
    r.number("gp_noise", cfg.env.gp_noise_var);
    r.flag("normalize", cfg.env.normalize);
    r.read("reward", cfg.env.reward, [](const std::string& v) {
      const auto k = parse_reward_kind(v);
      require(k.has_value(), ErrorCode::ParseError,
              "expected linear, gp_gntk or gp_rep, got '" + v + "'");
      return *k;
    });
    if (graph == "er")
      cfg.env.graph = ErdosRenyi{p};
    else if (graph == "rdpg")
      cfg.env.graph = DotProduct{};
    else
      fail(ErrorCode::ParseError, "line " + std::to_string(section("environment").at("graph").line) +
                                      ": [environment] graph: expected er or rdpg, got '" + graph + "'");
  }
  {
    detail::KeyReader r("experiment", section("experiment"));
    r.count("horizon", cfg.env.horizon);
    r.count("repetitions", cfg.repetitions);
    r.seed("seed", cfg.seed);
    r.read("output", cfg.output_dir, [](const std::string& v) { return v; });
  }

  BanditHyper base = default_hyper();
  detail::apply_model_section("model", section("model"), base);
  cfg.env.kernel_layers = base.layers;
  cfg.env.kernel_width = base.width;

  std::vector<std::string> bad_names;
  const auto& algs = section("algorithms");
  if (const auto it = algs.find("names"); it != algs.end()) {
    for (const auto& name : detail::split_list(it->second.value)) {
      const auto a = parse_algorithm(name);
      if (!a) {
        bad_names.push_back("algorithms.names: unknown algorithm '" + name + "'");
        continue;
      }
      AlgorithmSpec spec{*a, base};
      detail::apply_model_section(name, section(name), spec.hyper);
      cfg.algorithms.push_back(spec);
    }
  }
  for (const auto& name : order) {
    if (const auto a = parse_algorithm(name)) {
      const bool listed = std::any_of(cfg.algorithms.begin(), cfg.algorithms.end(),
                                      [&](const AlgorithmSpec& s) { return s.algorithm == *a; });
      if (!listed) bad_names.push_back("section [" + name + "] names an algorithm not in algorithms.names");
    }
  }

  auto bad = violations(cfg);
  bad.insert(bad.begin(), bad_names.begin(), bad_names.end());
  if (!bad.empty()) {
    std::string msg;
    for (const auto& b : bad) msg += (msg.empty() ? "" : "; ") + b;
    fail(ErrorCode::ValidationError, msg);
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot read config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_string(buf.str());
}

namespace presets {

/// Desk-scale environment: ER p=0.4, N=20, |G|=30, d=10, linear reward,
/// T=400, m=64, L=2, nu=1, lambda=1e-3, 5 repetitions.
inline ExperimentConfig desk() {
  ExperimentConfig cfg;
  cfg.env.graph = ErdosRenyi{0.4};
  cfg.env.nodes = 20;
  cfg.env.actions = 30;
  cfg.env.features = 10;
  cfg.env.reward = RewardKind::Linear;
  cfg.env.noise_sd = 0.01;
  cfg.env.horizon = 400;
  cfg.env.kernel_layers = 2;
  cfg.env.kernel_width = 64;
  cfg.repetitions = 5;
  cfg.seed = 1;
  BanditHyper hp = default_hyper();
  hp.width = 64;
  hp.nu = 1.0;
  hp.trainer.l2_weight = 1e-3;
  for (auto a : {Algorithm::GnnTs, Algorithm::NnTs, Algorithm::Random})
    cfg.algorithms.push_back({a, hp});
  return cfg;
}

struct GridPoint {
  double exploration;  // nu for TS, beta for UCB/PE
  double learning_rate;
  double lambda;
};

/// nu, beta in {0.01, 0.1, 1, 10}; eta, lambda in {1e-1, 1e-2, 1e-3, 1e-4}.
inline std::vector<GridPoint> paper_grid() {
  std::vector<GridPoint> out;
  for (double e : {0.01, 0.1, 1.0, 10.0})
    for (double lr : {1e-1, 1e-2, 1e-3, 1e-4})
      for (double lam : {1e-1, 1e-2, 1e-3, 1e-4}) out.push_back({e, lr, lam});
  return out;
}

inline BanditHyper apply(const GridPoint& g, Algorithm alg, BanditHyper hp) {
  if (rule_of(alg) == Rule::Ts)
    hp.nu = g.exploration;
  else
    hp.beta = g.exploration;
  hp.trainer.learning_rate = g.learning_rate;
  hp.trainer.l2_weight = g.lambda;
  return hp;
}

}  // namespace presets

}  // namespace gnts
