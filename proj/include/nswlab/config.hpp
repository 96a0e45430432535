#pragma once

// JSON form of experiment configurations: learner, environment and welfare
// descriptions plus sweep parameters. Parsing is strict; unknown keys and
// wrongly typed values raise config_error.

#include <json.hpp>

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "nswlab/environments.hpp"
#include "nswlab/harness.hpp"
#include "nswlab/learners.hpp"
#include "nswlab/welfare.hpp"

namespace nswlab {

using json = nlohmann::json;

class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw config_error(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw config_error("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get_required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw config_error("missing key '" + std::string(key) + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_required<T>(j, key, where);
}

inline UtilityMatrix matrix_from_json(const json& j, const std::string& where) {
  std::vector<std::vector<double>> rows;
  try {
    rows = j.get<std::vector<std::vector<double>>>();
  } catch (const json::exception&) {
    throw config_error(where + " must be a list of rows of numbers");
  }
  return UtilityMatrix::from_rows(rows);
}

inline json matrix_to_json(const UtilityMatrix& u) {
  json rows = json::array();
  for (std::size_t i = 0; i < u.arms(); ++i) {
    const auto r = u.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Welfare functions.

inline SwfSpec swf_from_json(const json& j) {
  if (j.is_string()) return swf_from_json(json{{"kind", j}});
  detail::check_keys(j, {"kind", "weights", "terms"}, "swf");
  const auto kind = detail::get_required<std::string>(j, "kind", "swf");
  const auto weights = detail::get_optional<std::vector<double>>(j, "weights", "swf");
  if (kind == "nsw") return SwfSpec::nsw();
  if (kind == "nsw_prod") return SwfSpec::nsw_prod();
  if (kind == "convex_combo") {
    if (!j.contains("terms") || !j.at("terms").is_array()) throw config_error("convex_combo needs a terms list");
    std::vector<SwfTerm> terms;
    for (const auto& t : j.at("terms")) {
      detail::check_keys(t, {"coefficient", "swf"}, "swf term");
      if (!t.contains("swf")) throw config_error("swf term needs an swf");
      terms.push_back({detail::get_required<double>(t, "coefficient", "swf term"), swf_from_json(t.at("swf"))});
    }
    return SwfSpec::convex_combo(std::move(terms));
  }
  SwfKind k;
  if (kind == "utilitarian") {
    k = SwfKind::kUtilitarian;
  } else if (kind == "ggi") {
    k = SwfKind::kGgi;
  } else if (kind == "weighted_nsw") {
    k = SwfKind::kWeightedNsw;
  } else {
    throw config_error("unknown swf kind '" + kind + "'");
  }
  if (!weights) throw config_error("swf kind '" + kind + "' needs weights");
  SwfSpec s{k, *weights, {}};
  s.validate();
  return s;
}

inline json swf_to_json(const SwfSpec& f) {
  json j{{"kind", to_string(f.kind)}};
  if (f.weights) j["weights"] = *f.weights;
  if (f.kind == SwfKind::kConvexCombo) {
    json terms = json::array();
    for (const auto& t : f.combo) terms.push_back({{"coefficient", t.coefficient}, {"swf", swf_to_json(t.swf)}});
    j["terms"] = terms;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Environments.

inline EnvironmentSpec environment_from_json(const json& j) {
  detail::check_keys(j, {"kind", "parameters"}, "environment");
  const auto kind = detail::get_required<std::string>(j, "kind", "environment");
  const json params = j.contains("parameters") ? j.at("parameters") : json::object();
  const std::string where = "environment parameters";

  if (kind == "stochastic") {
    detail::check_keys(params, {"mean", "noise"}, where);
    if (!params.contains("mean")) throw config_error("stochastic environment needs a mean matrix");
    StochasticEnv env{detail::matrix_from_json(params.at("mean"), "mean"), Noise::kBernoulli};
    const auto noise = detail::get_optional<std::string>(params, "noise", where).value_or("bernoulli");
    if (noise == "deterministic") {
      env.noise = Noise::kDeterministic;
    } else if (noise != "bernoulli") {
      throw config_error("unknown noise model '" + noise + "'");
    }
    return env;
  }
  if (kind == "hard_stochastic") {
    detail::check_keys(params, {"K", "N", "T", "index"}, where);
    HardStochasticEnv env;
    env.arms = detail::get_required<std::size_t>(params, "K", where);
    env.agents = detail::get_required<std::size_t>(params, "N", where);
    env.horizon = detail::get_required<std::size_t>(params, "T", where);
    env.index = detail::get_optional<std::size_t>(params, "index", where).value_or(0);
    return env;
  }
  if (kind == "schedule") {
    detail::check_keys(params, {"matrices"}, where);
    if (!params.contains("matrices") || !params.at("matrices").is_array()) {
      throw config_error("schedule environment needs a matrices list");
    }
    AdversarialScheduleEnv env;
    for (const auto& m : params.at("matrices")) env.schedule.push_back(detail::matrix_from_json(m, "schedule matrix"));
    return env;
  }
  if (kind == "pair") {
    detail::check_keys(params, {"which", "side"}, where);
    PairEnv env;
    env.which = detail::get_optional<std::string>(params, "which", where).value_or("nsw");
    if (env.which != "nsw" && env.which != "nswprod") throw config_error("unknown pair '" + env.which + "'");
    const auto side = detail::get_optional<std::string>(params, "side", where).value_or("A");
    if (side == "A") {
      env.side = PairSide::kA;
    } else if (side == "B") {
      env.side = PairSide::kB;
    } else {
      throw config_error("pair side must be A or B");
    }
    return env;
  }
  if (kind == "indifferent") {
    detail::check_keys(params, {"K", "N", "M", "extra_constant_prob", "constant_lo", "constant_hi", "free_hi"},
                       where);
    IndifferentAgentEnv env;
    env.arms = detail::get_required<std::size_t>(params, "K", where);
    env.agents = detail::get_required<std::size_t>(params, "N", where);
    env.indifferent = detail::get_required<std::size_t>(params, "M", where);
    env.extra_constant_prob = detail::get_optional<double>(params, "extra_constant_prob", where).value_or(0.0);
    env.constant_lo = detail::get_optional<double>(params, "constant_lo", where).value_or(0.1);
    env.constant_hi = detail::get_optional<double>(params, "constant_hi", where).value_or(1.0);
    env.free_hi = detail::get_optional<std::vector<double>>(params, "free_hi", where).value_or(std::vector<double>{});
    if (!(0.0 <= env.constant_lo && env.constant_lo <= env.constant_hi && env.constant_hi <= 1.0)) {
      throw config_error("constant range must satisfy 0 <= lo <= hi <= 1");
    }
    if (!(env.extra_constant_prob >= 0.0 && env.extra_constant_prob <= 1.0)) {
      throw config_error("extra_constant_prob must lie in [0,1]");
    }
    return env;
  }
  if (kind == "shared_profile") {
    detail::check_keys(params, {"base", "N", "common_noise", "agent_noise"}, where);
    SharedProfileEnv env;
    env.base = detail::get_required<std::vector<double>>(params, "base", where);
    env.agents = detail::get_required<std::size_t>(params, "N", where);
    env.common_noise = detail::get_optional<double>(params, "common_noise", where).value_or(env.common_noise);
    env.agent_noise = detail::get_optional<double>(params, "agent_noise", where).value_or(env.agent_noise);
    for (double b : env.base) {
      if (!(b >= 0.0 && b <= 1.0)) throw config_error("shared-profile base values must lie in [0,1]");
    }
    return env;
  }
  throw config_error("unknown environment kind '" + kind + "'");
}

inline json environment_to_json(const EnvironmentSpec& spec) {
  struct Visitor {
    json operator()(const StochasticEnv& e) const {
      return {{"kind", "stochastic"},
              {"parameters",
               {{"mean", detail::matrix_to_json(e.mean)},
                {"noise", e.noise == Noise::kBernoulli ? "bernoulli" : "deterministic"}}}};
    }
    json operator()(const HardStochasticEnv& e) const {
      return {{"kind", "hard_stochastic"},
              {"parameters", {{"K", e.arms}, {"N", e.agents}, {"T", e.horizon}, {"index", e.index}}}};
    }
    json operator()(const AdversarialScheduleEnv& e) const {
      json ms = json::array();
      for (const auto& m : e.schedule) ms.push_back(detail::matrix_to_json(m));
      return {{"kind", "schedule"}, {"parameters", {{"matrices", ms}}}};
    }
    json operator()(const PairEnv& e) const {
      return {{"kind", "pair"}, {"parameters", {{"which", e.which}, {"side", e.side == PairSide::kA ? "A" : "B"}}}};
    }
    json operator()(const IndifferentAgentEnv& e) const {
      return {{"kind", "indifferent"},
              {"parameters",
               {{"K", e.arms},
                {"N", e.agents},
                {"M", e.indifferent},
                {"extra_constant_prob", e.extra_constant_prob},
                {"constant_lo", e.constant_lo},
                {"constant_hi", e.constant_hi},
                {"free_hi", e.free_hi}}}};
    }
    json operator()(const SharedProfileEnv& e) const {
      return {{"kind", "shared_profile"},
              {"parameters",
               {{"base", e.base}, {"N", e.agents}, {"common_noise", e.common_noise}, {"agent_noise", e.agent_noise}}}};
    }
  };
  return std::visit(Visitor{}, spec);
}

// ---------------------------------------------------------------------------
// Learners.

inline LearnerSpec learner_from_json(const json& j) {
  const std::string where = "learner";
  detail::check_keys(j, {"kind", "arms", "eta", "beta", "alpha", "mc_samples", "grid_resolution", "p", "gradient_floor"},
                     where);
  const auto kind = detail::get_required<std::string>(j, "kind", where);
  LearnerSpec s;
  if (kind == "ucb") {
    s.kind = LearnerKind::kUcb;
  } else if (kind == "ftrl_log_barrier") {
    s.kind = LearnerKind::kFtrlLogBarrier;
  } else if (kind == "ftrl_tsallis") {
    s.kind = LearnerKind::kFtrlTsallis;
  } else if (kind == "ewoo") {
    s.kind = LearnerKind::kEwoo;
  } else if (kind == "uniform") {
    s.kind = LearnerKind::kUniform;
  } else if (kind == "fixed") {
    s.kind = LearnerKind::kFixed;
  } else {
    throw config_error("unknown learner kind '" + kind + "'");
  }
  s.arms = detail::get_optional<std::size_t>(j, "arms", where);
  s.eta = detail::get_optional<double>(j, "eta", where);
  s.beta = detail::get_optional<double>(j, "beta", where);
  s.alpha = detail::get_optional<double>(j, "alpha", where);
  s.mc_samples = detail::get_optional<std::size_t>(j, "mc_samples", where).value_or(s.mc_samples);
  s.grid_resolution = detail::get_optional<double>(j, "grid_resolution", where);
  s.gradient_floor = detail::get_optional<double>(j, "gradient_floor", where).value_or(s.gradient_floor);
  if (s.kind == LearnerKind::kFixed) {
    s.fixed = detail::get_required<std::vector<double>>(j, "p", where);
    (void)Strategy(s.fixed);  // rejects non-simplex input up front
  }
  if (s.eta && !(*s.eta > 0.0)) throw config_error("eta must be positive");
  if (s.beta && !(*s.beta > 0.0)) throw config_error("beta must be positive");
  if (s.alpha && !(*s.alpha > 0.0)) throw config_error("alpha must be positive");
  if (!(s.gradient_floor > 0.0)) throw config_error("gradient_floor must be positive");
  return s;
}

inline json learner_to_json(const LearnerSpec& s) {
  json j{{"kind", to_string(s.kind)}};
  if (s.arms) j["arms"] = *s.arms;
  if (s.eta) j["eta"] = *s.eta;
  if (s.beta) j["beta"] = *s.beta;
  if (s.alpha) j["alpha"] = *s.alpha;
  if (s.kind == LearnerKind::kEwoo) j["mc_samples"] = s.mc_samples;
  if (s.grid_resolution) j["grid_resolution"] = *s.grid_resolution;
  if (s.kind == LearnerKind::kFixed) j["p"] = s.fixed;
  return j;
}

// ---------------------------------------------------------------------------
// Run / sweep files.

struct RunConfig {
  EpisodeConfig episode;
  std::vector<std::size_t> t_grid;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> output;
};

inline Feedback feedback_from_string(const std::string& s) {
  if (s == "bandit") return Feedback::kBandit;
  if (s == "full_info") return Feedback::kFullInfo;
  throw config_error("feedback must be 'bandit' or 'full_info'");
}

/// Parses a run or sweep document. Sweeps need T_grid and seeds; single runs
/// use T and seed. Dimension and feedback compatibility are checked here so
/// that configuration mistakes surface before any episode starts.
inline RunConfig run_config_from_json(const json& j) {
  const std::string where = "config";
  detail::check_keys(j, {"learner", "environment", "swf", "feedback", "T", "seed", "T_grid", "seeds", "output"}, where);
  RunConfig c;
  if (!j.contains("learner")) throw config_error("config needs a learner");
  if (!j.contains("environment")) throw config_error("config needs an environment");
  c.episode.learner = learner_from_json(j.at("learner"));
  c.episode.environment = environment_from_json(j.at("environment"));
  c.episode.swf = j.contains("swf") ? swf_from_json(j.at("swf")) : SwfSpec::nsw();
  const auto feedback = detail::get_optional<std::string>(j, "feedback", where);
  if (feedback) {
    c.episode.feedback = feedback_from_string(*feedback);
  } else {
    const auto k = c.episode.learner.kind;
    c.episode.feedback = k == LearnerKind::kUcb || k == LearnerKind::kUniform || k == LearnerKind::kFixed
                             ? Feedback::kBandit
                             : Feedback::kFullInfo;
  }
  c.episode.horizon = detail::get_optional<std::size_t>(j, "T", where).value_or(1000);
  c.episode.seed = detail::get_optional<std::uint64_t>(j, "seed", where).value_or(0);
  if (j.contains("T_grid")) c.t_grid = detail::get_required<std::vector<std::size_t>>(j, "T_grid", where);
  if (j.contains("seeds")) c.seeds = detail::get_required<std::vector<std::uint64_t>>(j, "seeds", where);
  c.output = detail::get_optional<std::string>(j, "output", where);
  if (c.episode.horizon == 0) throw config_error("T must be at least 1");
  for (auto t : c.t_grid) {
    if (t == 0) throw config_error("T_grid entries must be at least 1");
  }

  // Build once to surface dimension and compatibility errors.
  Environment env(c.episode.environment);
  auto learner = make_learner(c.episode.learner, env.arms(), env.agents(), c.episode.horizon, c.episode.swf, 0,
                              &c.episode.environment);
  if (!learner->supports(c.episode.feedback)) {
    throw config_error("learner '" + learner->name() + "' does not support " + to_string(c.episode.feedback) +
                       " feedback");
  }
  return c;
}

inline json run_config_to_json(const RunConfig& c) {
  json j{{"learner", learner_to_json(c.episode.learner)},
         {"environment", environment_to_json(c.episode.environment)},
         {"swf", swf_to_json(c.episode.swf)},
         {"feedback", to_string(c.episode.feedback)},
         {"T", c.episode.horizon},
         {"seed", c.episode.seed}};
  if (!c.t_grid.empty()) j["T_grid"] = c.t_grid;
  if (!c.seeds.empty()) j["seeds"] = c.seeds;
  if (c.output) j["output"] = *c.output;
  return j;
}

inline json sweep_summary_json(const SweepResult& r) {
  json per_t = json::array();
  for (const auto& c : r.summary) {
    per_t.push_back({{"T", c.horizon}, {"seeds", c.seeds}, {"mean", c.mean}, {"stderr", c.stderr_}});
  }
  json j{{"per_T", per_t}};
  if (r.fit) {
    j["fit"] = {{"exponent", r.fit->exponent}, {"intercept", r.fit->intercept}, {"r_squared", r.fit->r_squared}};
  } else {
    j["fit"] = nullptr;
  }
  return j;
}

}  // namespace nswlab
