#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "scpolab/config.hpp"
#include "scpolab/errors.hpp"
#include "scpolab/selfcheck.hpp"
#include "scpolab/svg_plot.hpp"
#include "scpolab/trainer.hpp"

namespace {

using scpolab::MetricsRow;

std::string output_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("SCPO_LAB_OUT"); env && *env) return env;
  return "runs";
}

scpolab::RunConfig load_config(const std::string& config_path,
                               const std::vector<std::string>& overrides) {
  if (config_path.empty()) return scpolab::parse_run_config_text("", overrides);
  return scpolab::parse_run_config(config_path, overrides);
}

std::string run_dir(const std::string& root, const scpolab::RunConfig& cfg) {
  return root + "/" + to_string(cfg.algo) + "-" + cfg.env_preset + "-s" +
         std::to_string(cfg.seed);
}

void print_epoch(const scpolab::RunConfig& cfg, const MetricsRow& row) {
  std::printf("[%s s%llu] epoch %3d  J_r %8.4f  M_c %8.4f  rho_c %.5f  J_D %7.4f  %s%s\n",
              to_string(cfg.algo).c_str(), static_cast<unsigned long long>(cfg.seed), row.epoch,
              row.J_r, row.M_c, row.rho_c, row.J_D_true, row.diag.mode.c_str(),
              row.diag.accepted ? "" : " (rejected)");
  std::fflush(stdout);
}

void write_run_svgs(const std::string& dir, const std::string& label,
                    const std::vector<MetricsRow>& rows) {
  auto series = [&](double MetricsRow::* field) {
    scpolab::SvgSeries s;
    s.label = label;
    for (const MetricsRow& row : rows) s.y.push_back(row.*field);
    return s;
  };
  scpolab::write_line_chart_svg(dir + "/j_r.svg", "Episodic return", "J_r", {series(&MetricsRow::J_r)});
  scpolab::write_line_chart_svg(dir + "/m_c.svg", "Episodic cost", "M_c", {series(&MetricsRow::M_c)});
  scpolab::write_line_chart_svg(dir + "/rho_c.svg", "Cost rate", "rho_c", {series(&MetricsRow::rho_c)});
}

struct RunOutcome {
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
};

// One training run per config; sequential unless parallel is set.
std::vector<RunOutcome> execute_runs(const std::vector<scpolab::RunConfig>& configs,
                                     const std::string& root, bool svg, bool parallel) {
  std::vector<RunOutcome> outcomes(configs.size());
  auto body = [&](std::size_t i, bool quiet) {
    const scpolab::RunConfig& cfg = configs[i];
    const std::string dir = run_dir(root, cfg);
    scpolab::Trainer trainer(cfg);
    std::function<void(const MetricsRow&)> printer;
    if (!quiet) printer = [&cfg](const MetricsRow& row) { print_epoch(cfg, row); };
    outcomes[i].algo = to_string(cfg.algo);
    outcomes[i].seed = cfg.seed;
    outcomes[i].rows = trainer.run(dir, printer);
    if (svg) write_run_svgs(dir, outcomes[i].algo, outcomes[i].rows);
    std::printf("run complete: %s (%d epochs)\n", dir.c_str(),
                static_cast<int>(outcomes[i].rows.size()));
    std::fflush(stdout);
  };

  if (!parallel || configs.size() <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) body(i, false);
    return outcomes;
  }

  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    workers.emplace_back([&, i]() {
      try {
        body(i, true);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (const std::exception_ptr& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return outcomes;
}

std::vector<scpolab::RunConfig> build_configs(const std::string& config_path,
                                              const std::vector<std::string>& sets,
                                              const std::string& algo,
                                              const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> overrides = sets;
  if (!algo.empty()) overrides.push_back("algo.name=" + algo);
  std::vector<scpolab::RunConfig> configs;
  if (seeds.empty()) {
    configs.push_back(load_config(config_path, overrides));
    return configs;
  }
  for (std::uint64_t seed : seeds) {
    std::vector<std::string> with_seed = overrides;
    with_seed.push_back("training.seed=" + std::to_string(seed));
    configs.push_back(load_config(config_path, with_seed));
  }
  return configs;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& algo, const std::vector<std::uint64_t>& seeds,
              const std::string& out_flag, bool svg, bool parallel) {
  const std::string root = output_root(out_flag);
  execute_runs(build_configs(config_path, sets, algo, seeds), root, svg, parallel);
  return 0;
}

int cmd_compare(const std::string& config_path, const std::vector<std::string>& sets,
                const std::vector<std::string>& algos, const std::vector<std::uint64_t>& seeds,
                const std::string& out_flag, bool svg, bool parallel) {
  if (algos.size() < 2) {
    throw scpolab::ConfigError("compare: need at least two algorithm names");
  }
  for (const std::string& name : algos) scpolab::algo_from_string(name);  // validated up front

  const std::string root = output_root(out_flag);
  std::vector<scpolab::RunConfig> configs;
  for (const std::string& name : algos) {
    for (const scpolab::RunConfig& cfg : build_configs(config_path, sets, name, seeds)) {
      configs.push_back(cfg);
    }
  }
  const std::vector<RunOutcome> outcomes = execute_runs(configs, root, svg, parallel);

  const std::string cmp_dir = root + "/compare-" + configs.front().env_preset;
  std::filesystem::create_directories(cmp_dir);

  std::ofstream joined(cmp_dir + "/joined.csv");
  if (!joined) throw std::runtime_error("compare: cannot write '" + cmp_dir + "/joined.csv'");
  joined << "algo,seed," << scpolab::metrics_csv_header() << '\n';
  for (const RunOutcome& out : outcomes) {
    for (const MetricsRow& row : out.rows) {
      joined << out.algo << ',' << out.seed << ',' << scpolab::metrics_csv_row(row) << '\n';
    }
  }

  // Per-algorithm medians across seeds: final-10-epoch means for the episodic
  // metrics, final value for the running cost rate.
  std::ofstream medians(cmp_dir + "/medians.csv");
  if (!medians) throw std::runtime_error("compare: cannot write '" + cmp_dir + "/medians.csv'");
  medians << "algo,J_r,M_c,rho_c\n";
  char buf[256];
  for (const std::string& name : algos) {
    std::vector<double> jr, mc, rc;
    for (const RunOutcome& out : outcomes) {
      if (out.algo != name || out.rows.empty()) continue;
      std::vector<double> jr_epochs, mc_epochs;
      for (const MetricsRow& row : out.rows) {
        jr_epochs.push_back(row.J_r);
        mc_epochs.push_back(row.M_c);
      }
      jr.push_back(scpolab::mean_last(jr_epochs, 10));
      mc.push_back(scpolab::mean_last(mc_epochs, 10));
      rc.push_back(out.rows.back().rho_c);
    }
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", name.c_str(),
                  scpolab::median(jr), scpolab::median(mc), scpolab::median(rc));
    medians << buf;
  }
  medians.close();

  if (svg) {
    auto chart = [&](const std::string& file, const std::string& title, const std::string& ylab,
                     double MetricsRow::* field) {
      std::vector<scpolab::SvgSeries> series;
      for (const RunOutcome& out : outcomes) {
        scpolab::SvgSeries s;
        s.label = out.algo + "-s" + std::to_string(out.seed);
        for (const MetricsRow& row : out.rows) s.y.push_back(row.*field);
        series.push_back(std::move(s));
      }
      scpolab::write_line_chart_svg(cmp_dir + "/" + file, title, ylab, series);
    };
    chart("j_r.svg", "Episodic return", "J_r", &MetricsRow::J_r);
    chart("m_c.svg", "Episodic cost", "M_c", &MetricsRow::M_c);
    chart("rho_c.svg", "Cost rate", "rho_c", &MetricsRow::rho_c);
  }

  std::printf("compare outputs under %s\n", cmp_dir.c_str());
  return 0;
}

int cmd_check(std::uint64_t seed, const std::string& inject_fault, const std::string& report_path) {
  scpolab::CheckOptions opts;
  opts.seed = seed;
  opts.inject_fault = inject_fault;
  const std::vector<scpolab::SuiteReport> reports = scpolab::run_selfcheck(opts);
  const std::string json = scpolab::selfcheck_report_json(reports);
  if (report_path.empty()) {
    std::printf("%s\n", json.c_str());
  } else {
    std::ofstream out(report_path);
    if (!out) throw std::runtime_error("check: cannot write '" + report_path + "'");
    out << json << '\n';
    for (const scpolab::SuiteReport& rep : reports) {
      std::printf("%-20s %s  cases %3d  failures %d  max_error %.3g\n", rep.name.c_str(),
                  rep.passed() ? "PASS" : "FAIL", rep.cases, rep.failures, rep.max_error);
    }
    std::printf("report written to %s\n", report_path.c_str());
  }
  return all_passed(reports) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-wise constrained policy optimization lab"};
  app.require_subcommand(1);

  std::string config_path, algo, out_flag, report_path, inject_fault;
  std::vector<std::string> sets, algos;
  std::vector<std::uint64_t> seeds;
  std::uint64_t check_seed = 0;
  bool svg = false, parallel = false;

  CLI::App* train = app.add_subcommand("train", "Train one algorithm, one run per seed");
  train->add_option("--config", config_path, "Run configuration file");
  train->add_option("--algo", algo, "Algorithm: scpo, trpo, trpo_lagrangian, cpo");
  train->add_option("--seed", seeds, "Seed(s); one training run per value");
  train->add_option("--set", sets, "Override as section.key=value; repeatable");
  train->add_option("--out", out_flag, "Output root (default runs/ or $SCPO_LAB_OUT)");
  train->add_flag("--svg", svg, "Render metric curves as SVG");
  train->add_flag("--parallel-seeds", parallel, "Run seeds as independent workers");

  CLI::App* compare = app.add_subcommand("compare", "Run several algorithms on identical seeds");
  compare->add_option("--config", config_path, "Run configuration file");
  compare->add_option("--algos", algos, "Algorithm names (two or more)")
      ->required()
      ->delimiter(',');
  compare->add_option("--seed", seeds, "Seed(s) shared by every algorithm");
  compare->add_option("--set", sets, "Override as section.key=value; repeatable");
  compare->add_option("--out", out_flag, "Output root (default runs/ or $SCPO_LAB_OUT)");
  compare->add_flag("--svg", svg, "Render metric curves as SVG");
  compare->add_flag("--parallel-seeds", parallel, "Run the grid as independent workers");

  CLI::App* check = app.add_subcommand("check", "Run the property suites against their oracles");
  check->add_option("--seed", check_seed, "Randomization seed for the suites");
  check->add_option("--inject-fault", inject_fault,
                    "Suite name whose result is deliberately perturbed (harness test)");
  check->add_option("--report", report_path, "Write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, sets, algo, seeds, out_flag, svg, parallel);
    if (compare->parsed())
      return cmd_compare(config_path, sets, algos, seeds, out_flag, svg, parallel);
    if (check->parsed()) return cmd_check(check_seed, inject_fault, report_path);
  } catch (const scpolab::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
