#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "scpolab/config.hpp"
#include "scpolab/errors.hpp"

using namespace scpolab;

TEST_CASE("empty text yields the documented defaults") {
  const RunConfig cfg = parse_run_config_text("");
  CHECK(cfg.algo == AlgoKind::scpo);
  CHECK(cfg.epochs == 100);
  CHECK(cfg.steps_per_epoch == 4000);
  CHECK(cfg.env_preset == "point-hazard-4");
  CHECK(cfg.delta == doctest::Approx(0.02));
  CHECK(cfg.cost_limit == 0.0);
  CHECK(cfg.gamma == doctest::Approx(0.99));
  CHECK(cfg.lam == doctest::Approx(0.97));
  CHECK(cfg.cost_lam == doctest::Approx(0.95));
  CHECK(cfg.seed == 0);
  CHECK_FALSE(cfg.epsilon_term);
  CHECK(cfg.value_iters == 80);
  CHECK(cfg.hidden == 64);
  CHECK(cfg.env.hazards.size() == 4);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("sectioned text with comments parses") {
  const std::string text = R"(# experiment
[env]
preset = point-pillar-4
max_episode_steps = 150   ; trailing comment

[algo]
name = cpo
delta = 0.01
cost_limit = 5.0

[training]
epochs = 12
steps_per_epoch = 600
seed = 9
)";
  const RunConfig cfg = parse_run_config_text(text);
  CHECK(cfg.algo == AlgoKind::cpo);
  CHECK(cfg.env_preset == "point-pillar-4");
  CHECK(cfg.env.pillars.size() == 4);
  CHECK(cfg.env.max_episode_steps == 150);
  CHECK(cfg.delta == doctest::Approx(0.01));
  CHECK(cfg.cost_limit == doctest::Approx(5.0));
  CHECK(cfg.epochs == 12);
  CHECK(cfg.steps_per_epoch == 600);
  CHECK(cfg.seed == 9);
}

TEST_CASE("overrides apply on top of the text and later ones win") {
  const std::string text = "[training]\nepochs = 5\n";
  const RunConfig cfg =
      parse_run_config_text(text, {"training.epochs=7", "algo.name=trpo", "training.epochs=11"});
  CHECK(cfg.epochs == 11);
  CHECK(cfg.algo == AlgoKind::trpo);
}

TEST_CASE("unknown keys, bad values, and bad presets are config errors") {
  CHECK_THROWS_AS(parse_run_config_text("[training]\nwarp_speed = 9\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[training]\nepochs = banana\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[env]\npreset = point-mystery\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[algo]\nname = ppo\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("no_equals_sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("", {"bogus"}), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("", {"training.epochs"}), ConfigError);
}

TEST_CASE("validation guards the numeric ranges") {
  CHECK_THROWS_AS(parse_run_config_text("[algo]\ndelta = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[training]\ngamma = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[training]\nhidden = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[algo]\nbacktrack_coeff = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[training]\nsteps_per_epoch = 50\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[algo]\ncost_limit = -1\n"), ConfigError);
}

TEST_CASE("algorithm names round trip and reject strangers") {
  for (const AlgoKind kind :
       {AlgoKind::scpo, AlgoKind::trpo, AlgoKind::trpo_lagrangian, AlgoKind::cpo}) {
    CHECK(algo_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(algo_from_string("sac"), ConfigError);
}

TEST_CASE("canonical text is stable and the run id tracks it") {
  const RunConfig a = parse_run_config_text("", {"training.seed=3"});
  const RunConfig b = parse_run_config_text("[training]\nseed = 3\n");
  CHECK(a.canonical_text() == b.canonical_text());
  CHECK(a.run_id() == b.run_id());
  CHECK(a.run_id().size() == 32);

  const RunConfig c = parse_run_config_text("", {"training.seed=4"});
  CHECK(a.canonical_text() != c.canonical_text());
  CHECK(a.run_id() != c.run_id());
}

TEST_CASE("config files load from disk and missing paths are config errors") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "scpolab_cfg_test";
  fs::create_directories(dir);
  const std::string path = (dir / "run.cfg").string();
  {
    std::ofstream out(path);
    out << "[training]\nepochs = 3\n[algo]\nname = trpo_lagrangian\n";
  }
  const RunConfig cfg = parse_run_config(path);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.algo == AlgoKind::trpo_lagrangian);

  CHECK_THROWS_AS(parse_run_config((dir / "nope.cfg").string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("environment overrides reach the resolved geometry") {
  const RunConfig cfg = parse_run_config_text(
      "[env]\npreset = point-hazard-1\nobs_top_k = 2\nmax_speed = 2.0\n");
  CHECK(cfg.env.obs_top_k == 2);
  CHECK(cfg.env.max_speed == doctest::Approx(2.0));
  CHECK(cfg.env.observation_dim() == 5 + 12);
}
