#include "scpolab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "scpolab/rng.hpp"

namespace scpolab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw ConfigError("config: key '" + key + "' expects on/off, got '" + value + "'");
}

struct EnvOverrides {
  std::map<std::string, std::string> values;
};

using Setter = std::function<void(RunConfig&, EnvOverrides&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& schema() {
  static const std::map<std::string, Setter> s = {
      {"env.preset", [](RunConfig& c, EnvOverrides&, const std::string&, const std::string& v) {
         c.env_preset = v;
       }},
      {"env.max_episode_steps", [](RunConfig&, EnvOverrides& e, const std::string& k, const std::string& v) {
         parse_int(k, v); e.values["max_episode_steps"] = v;
       }},
      {"env.goal_radius", [](RunConfig&, EnvOverrides& e, const std::string& k, const std::string& v) {
         parse_double(k, v); e.values["goal_radius"] = v;
       }},
      {"env.world_half_extent", [](RunConfig&, EnvOverrides& e, const std::string& k, const std::string& v) {
         parse_double(k, v); e.values["world_half_extent"] = v;
       }},
      {"env.dt", [](RunConfig&, EnvOverrides& e, const std::string& k, const std::string& v) {
         parse_double(k, v); e.values["dt"] = v;
       }},
      {"env.max_speed", [](RunConfig&, EnvOverrides& e, const std::string& k, const std::string& v) {
         parse_double(k, v); e.values["max_speed"] = v;
       }},
      {"env.obs_top_k", [](RunConfig&, EnvOverrides& e, const std::string& k, const std::string& v) {
         parse_int(k, v); e.values["obs_top_k"] = v;
       }},
      {"algo.name", [](RunConfig& c, EnvOverrides&, const std::string&, const std::string& v) {
         c.algo = algo_from_string(v);
       }},
      {"algo.delta", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.delta = parse_double(k, v);
       }},
      {"algo.cost_limit", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.cost_limit = parse_double(k, v);
       }},
      {"algo.lagrangian_lr", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.lagrangian_lr = parse_double(k, v);
       }},
      {"algo.epsilon_term", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.epsilon_term = parse_bool(k, v);
       }},
      {"algo.damping", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.damping = parse_double(k, v);
       }},
      {"algo.cg_iters", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.cg_iters = parse_int(k, v);
       }},
      {"algo.cg_tol", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.cg_tol = parse_double(k, v);
       }},
      {"algo.backtracks", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.backtracks = parse_int(k, v);
       }},
      {"algo.backtrack_coeff", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.backtrack_coeff = parse_double(k, v);
       }},
      {"training.epochs", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.epochs = parse_int(k, v);
       }},
      {"training.steps_per_epoch", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.steps_per_epoch = parse_int(k, v);
       }},
      {"training.gamma", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.gamma = parse_double(k, v);
       }},
      {"training.lam", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.lam = parse_double(k, v);
       }},
      {"training.cost_lam", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.cost_lam = parse_double(k, v);
       }},
      {"training.seed", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.seed = parse_u64(k, v);
       }},
      {"training.value_iters", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.value_iters = parse_int(k, v);
       }},
      {"training.value_lr", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.value_lr = parse_double(k, v);
       }},
      {"training.hidden", [](RunConfig& c, EnvOverrides&, const std::string& k, const std::string& v) {
         c.hidden = parse_int(k, v);
       }},
  };
  return s;
}

void apply_key(RunConfig& cfg, EnvOverrides& env, const std::string& qualified,
               const std::string& value) {
  const auto it = schema().find(qualified);
  if (it == schema().end()) {
    throw ConfigError("config: unknown key '" + qualified + "'");
  }
  it->second(cfg, env, qualified, value);
}

void finalize_env(RunConfig& cfg, const EnvOverrides& env) {
  cfg.env = EnvConfig::preset(cfg.env_preset);
  for (const auto& [key, value] : env.values) {
    if (key == "max_episode_steps") cfg.env.max_episode_steps = parse_int(key, value);
    else if (key == "goal_radius") cfg.env.goal_radius = parse_double(key, value);
    else if (key == "world_half_extent") cfg.env.world_half_extent = parse_double(key, value);
    else if (key == "dt") cfg.env.dt = parse_double(key, value);
    else if (key == "max_speed") cfg.env.max_speed = parse_double(key, value);
    else if (key == "obs_top_k") cfg.env.obs_top_k = parse_int(key, value);
  }
  cfg.env.validate();
}

}  // namespace

AlgoKind algo_from_string(const std::string& name) {
  if (name == "scpo") return AlgoKind::scpo;
  if (name == "trpo") return AlgoKind::trpo;
  if (name == "trpo_lagrangian") return AlgoKind::trpo_lagrangian;
  if (name == "cpo") return AlgoKind::cpo;
  throw ConfigError("config: unknown algorithm '" + name +
                    "' (expected scpo, trpo, trpo_lagrangian, or cpo)");
}

std::string to_string(AlgoKind algo) {
  switch (algo) {
    case AlgoKind::scpo: return "scpo";
    case AlgoKind::trpo: return "trpo";
    case AlgoKind::trpo_lagrangian: return "trpo_lagrangian";
    case AlgoKind::cpo: return "cpo";
  }
  return "?";
}

void RunConfig::validate() const {
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (steps_per_epoch <= 0) throw ConfigError("config: steps_per_epoch must be positive");
  if (steps_per_epoch < env.max_episode_steps) {
    throw ConfigError("config: steps_per_epoch must be >= max_episode_steps");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("config: gamma must be in [0, 1)");
  if (!(lam >= 0.0 && lam <= 1.0)) throw ConfigError("config: lam must be in [0, 1]");
  if (!(cost_lam >= 0.0 && cost_lam <= 1.0)) throw ConfigError("config: cost_lam must be in [0, 1]");
  if (!(delta > 0.0)) throw ConfigError("config: delta must be positive");
  if (cost_limit < 0.0) throw ConfigError("config: cost_limit must be >= 0");
  if (!(lagrangian_lr >= 0.0)) throw ConfigError("config: lagrangian_lr must be >= 0");
  if (!(damping >= 0.0)) throw ConfigError("config: damping must be >= 0");
  if (cg_iters <= 0) throw ConfigError("config: cg_iters must be positive");
  if (!(cg_tol > 0.0)) throw ConfigError("config: cg_tol must be positive");
  if (backtracks <= 0) throw ConfigError("config: backtracks must be positive");
  if (!(backtrack_coeff > 0.0 && backtrack_coeff < 1.0)) {
    throw ConfigError("config: backtrack_coeff must be in (0, 1)");
  }
  if (value_iters < 0) throw ConfigError("config: value_iters must be >= 0");
  if (!(value_lr > 0.0)) throw ConfigError("config: value_lr must be positive");
  if (hidden <= 0) throw ConfigError("config: hidden must be positive");
  env.validate();
}

std::string RunConfig::canonical_text() const {
  char buf[2048];
  std::snprintf(
      buf, sizeof(buf),
      "algo=%s epochs=%d steps=%d preset=%s haz=%zu pil=%zu L=%d dt=%.17g spd=%.17g ext=%.17g "
      "goalr=%.17g k=%d gamma=%.17g lam=%.17g clam=%.17g delta=%.17g w=%.17g llr=%.17g "
      "seed=%llu eps=%d damp=%.17g cg=%d cgtol=%.17g bt=%d btc=%.17g vi=%d vlr=%.17g hid=%d",
      to_string(algo).c_str(), epochs, steps_per_epoch, env_preset.c_str(), env.hazards.size(),
      env.pillars.size(), env.max_episode_steps, env.dt, env.max_speed, env.world_half_extent,
      env.goal_radius, env.obs_top_k, gamma, lam, cost_lam, delta, cost_limit, lagrangian_lr,
      static_cast<unsigned long long>(seed), epsilon_term ? 1 : 0, damping, cg_iters, cg_tol,
      backtracks, backtrack_coeff, value_iters, value_lr, hidden);
  return buf;
}

std::string RunConfig::run_id() const {
  // FNV-1a over the canonical text, twice with different offsets for 128 bits.
  auto fnv = [](const std::string& s, std::uint64_t h) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  };
  const std::string text = canonical_text();
  char buf[36];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(fnv(text, 0xcbf29ce484222325ULL)),
                static_cast<unsigned long long>(fnv(text, 0x84222325cbf29ce4ULL)));
  return buf;
}

RunConfig parse_run_config_text(const std::string& text,
                                const std::vector<std::string>& overrides) {
  RunConfig cfg;
  EnvOverrides env;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config: malformed section header at line " + std::to_string(line_no));
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "env" && section != "algo" && section != "training") {
        throw ConfigError("config: unknown section '" + section + "'");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected key = value at line " + std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("config: key '" + key + "' appears before any [section]");
    }
    apply_key(cfg, env, section + "." + key, value);
  }

  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: override '" + ov + "' must look like section.key=value");
    }
    apply_key(cfg, env, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }

  finalize_env(cfg, env);
  cfg.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::ostringstream body;
  body << in.rdbuf();
  return parse_run_config_text(body.str(), overrides);
}

}  // namespace scpolab
