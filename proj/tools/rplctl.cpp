// rplctl: run experiments, comparisons, excitation reports, bound
// evaluations and the oracle self-check.

#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "rpl/config.hpp"
#include "rpl/oracles.hpp"
#include "rpl/results.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kValidation = 1, kRuntime = 2, kOracle = 3 };

struct Options {
  std::vector<std::string> configs;
  std::string scenario;
  std::string out;
  std::optional<std::size_t> horizon;
  std::string format;
  bool allow_low_forgetting = false;
  bool plot = false;
  std::string estimator;
};

int exit_code(const rpl::Error& e) {
  switch (e.code()) {
    case rpl::Errc::ParseError:
    case rpl::Errc::ValidationError:
    case rpl::Errc::DimensionMismatch:
    case rpl::Errc::InvalidConstants:
    case rpl::Errc::MissingGamma:
      return kValidation;
    default:
      return kRuntime;
  }
}

json error_json(const std::string& code, const std::string& message,
                const std::string& source = {}) {
  json j{{"error", code}, {"message", message}};
  if (!source.empty()) j["config"] = source;
  return j;
}

std::mutex io_mutex;

void report_error(const json& j) {
  std::lock_guard lock(io_mutex);
  std::cerr << j.dump() << '\n';
}

// Config files plus an optional builtin scenario, each with its output stem.
std::vector<std::pair<std::string, rpl::ExperimentConfig>> resolve(const Options& opt) {
  std::vector<std::pair<std::string, rpl::ExperimentConfig>> runs;
  for (const auto& path : opt.configs) runs.emplace_back(fs::path(path).stem().string(),
                                                         rpl::load_config(path));
  if (!opt.scenario.empty()) runs.emplace_back(opt.scenario, rpl::default_config(opt.scenario));
  if (runs.empty())
    throw rpl::Error(rpl::Errc::ValidationError, "config: pass --config PATH or --scenario NAME");

  std::map<std::string, int> seen;
  for (auto& [stem, c] : runs) {
    if (int n = seen[stem]++; n > 0) stem += "_" + std::to_string(n);
    if (opt.horizon) c.horizon = *opt.horizon;
    if (!opt.out.empty()) c.output.directory = opt.out;
    if (opt.allow_low_forgetting) c.estimator.allow_low_forgetting = true;
    if (!opt.estimator.empty()) {
      if (opt.estimator == "rpl")
        c.estimator.kind = rpl::EstimatorKind::Rpl;
      else if (opt.estimator == "rlsff")
        c.estimator.kind = rpl::EstimatorKind::Rlsff;
      else
        throw rpl::Error(rpl::Errc::ValidationError, "estimator.kind: expected 'rpl' or 'rlsff'");
    }
    if (!opt.format.empty()) {
      c.output.csv = opt.format != "json";
      c.output.json = opt.format != "csv";
    }
    rpl::validate(c);
  }
  return runs;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw rpl::Error(rpl::Errc::ValidationError, "cannot write " + path.string());
}

// Runs `job` for every config, at most hardware_concurrency at a time.
template <typename Job>
int run_batch(const Options& opt, Job job) {
  std::vector<std::pair<std::string, rpl::ExperimentConfig>> runs;
  try {
    runs = resolve(opt);
  } catch (const rpl::Error& e) {
    report_error(error_json(std::string(rpl::to_string(e.code())), e.what()));
    return exit_code(e);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<int> worst{kOk};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      const auto& [stem, config] = runs[i];
      int code = kOk;
      try {
        job(stem, config);
      } catch (const rpl::Error& e) {
        report_error(error_json(std::string(rpl::to_string(e.code())), e.what(), stem));
        code = exit_code(e);
      } catch (const std::exception& e) {
        report_error(error_json("RuntimeError", e.what(), stem));
        code = kRuntime;
      }
      int cur = worst.load();
      while (code > cur && !worst.compare_exchange_weak(cur, code)) {
      }
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(runs.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return worst.load();
}

void print_line(const std::string& line) {
  std::lock_guard lock(io_mutex);
  std::cout << line << '\n';
}

int cmd_simulate(const Options& opt) {
  return run_batch(opt, [&](const std::string& stem, const rpl::ExperimentConfig& c) {
    const auto run = rpl::run_config(c);
    const fs::path dir = c.output.directory;
    auto written = rpl::write_bundle(run, dir, stem);
    if (opt.plot && c.output.csv) {
      write_text(dir / ("plot_" + stem + ".py"), rpl::plot_script(stem + ".csv", false));
    }
    const auto& cert = run.bounds.certification;
    print_line(fmt::format("{}: R_T = {} bound = {} verdict = {}", stem,
                           rpl::format_double(run.result.regret.total()),
                           run.bounds.selected ? rpl::format_double(*run.bounds.selected) : "n/a",
                           cert ? (cert->pass ? "pass" : "fail") : run.bounds.status));
  });
}

int cmd_compare(const Options& opt) {
  return run_batch(opt, [&](const std::string& stem, const rpl::ExperimentConfig& c) {
    const auto cmp = rpl::run_comparison(c);
    const fs::path dir = c.output.directory;
    fs::create_directories(dir);
    if (c.output.csv) {
      std::ofstream out(dir / (stem + "_compare.csv"), std::ios::binary);
      rpl::write_comparison_csv(out, cmp);
      if (opt.plot)
        write_text(dir / ("plot_" + stem + "_compare.py"),
                   rpl::plot_script(stem + "_compare.csv", true));
    }
    const json summary = rpl::comparison_json(cmp);
    if (c.output.json) write_text(dir / (stem + "_compare.json"), summary.dump(2) + "\n");
    print_line(fmt::format("{}: R_T rpl = {} rlsff = {} rpl_below_rlsff = {}", stem,
                           rpl::format_double(cmp.rpl.result.regret.total()),
                           rpl::format_double(cmp.rlsff.result.regret.total()),
                           summary["rpl_regret_below_rlsff"].get<bool>()));
  });
}

int cmd_excitation(const Options& opt) {
  return run_batch(opt, [&](const std::string& stem, const rpl::ExperimentConfig& c) {
    const auto built = rpl::build_scenario(c.scenario, c.horizon);
    const auto result = rpl::run_experiment(*built.model, c.estimator, built.initial_state,
                                            c.horizon, c.cost, c.excitation);
    const json j = rpl::excitation_json(result.excitation);
    const fs::path dir = c.output.directory;
    if (c.output.json) write_text(dir / (stem + "_excitation.json"), j.dump(2) + "\n");
    if (c.output.csv) {
      std::string text = "k,prefix_lambda_min,window_lambda_min\n";
      const auto& r = result.excitation;
      for (std::size_t k = 0; k < r.prefix_lambda_min.size(); ++k) {
        std::string window;
        if (r.window_lambda_min && k < r.window_lambda_min->size())
          window = rpl::format_double((*r.window_lambda_min)[k]);
        text += std::to_string(k) + "," + rpl::format_double(r.prefix_lambda_min[k]) + "," +
                window + "\n";
      }
      write_text(dir / (stem + "_excitation.csv"), text);
    }
    print_line(stem + ": " + j.dump());
  });
}

double need(const YAML::Node& root, const char* key) {
  if (!root[key]) throw rpl::Error(rpl::Errc::ValidationError, std::string(key) + ": required");
  try {
    return root[key].as<double>();
  } catch (const YAML::BadConversion&) {
    throw rpl::Error(rpl::Errc::ValidationError, std::string(key) + ": expected a number");
  }
}

std::optional<double> maybe(const YAML::Node& root, const char* key) {
  if (!root[key]) return std::nullopt;
  return need(root, key);
}

int cmd_bounds(const std::string& constants_path, const std::string& out_dir) {
  try {
    YAML::Node root;
    try {
      root = YAML::LoadFile(constants_path);
    } catch (const YAML::BadFile&) {
      throw rpl::Error(rpl::Errc::ParseError, "cannot open " + constants_path);
    } catch (const YAML::ParserException& e) {
      throw rpl::Error(rpl::Errc::ParseError,
                       "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) throw rpl::Error(rpl::Errc::ValidationError, "constants: expected a mapping");

    rpl::BoundInputs in;
    in.c0 = need(root, "c0");
    in.cw = need(root, "cw");
    in.rho = need(root, "rho");
    in.b = need(root, "b");
    in.lipschitz = need(root, "lipschitz");
    in.theta0_error = need(root, "theta0_error");
    const double ts = need(root, "ts");
    if (!(ts >= 0.0) || std::floor(ts) != ts)
      throw rpl::Error(rpl::Errc::ValidationError, "ts: expected a nonnegative integer");
    in.ts = static_cast<std::size_t>(ts);
    if (auto h = maybe(root, "horizon")) in.horizon = static_cast<std::size_t>(*h);

    const auto delta = maybe(root, "delta");
    const auto epsilon = maybe(root, "epsilon");
    if (delta && epsilon) {
      const double beta = maybe(root, "beta").value_or(*delta);
      in.constants = rpl::rpl_constants(*delta, *epsilon, beta, maybe(root, "c_p"));
    }
    if (auto eta = maybe(root, "eta")) in.constants.eta = *eta;
    if (auto gamma = maybe(root, "gamma")) in.constants.gamma = *gamma;
    if (auto c_p = maybe(root, "c_p")) in.constants.c_p = *c_p;
    if (auto l2 = maybe(root, "lambda_squared")) {
      in.lambda = std::sqrt(*l2);
      if (delta && epsilon) in.constants.c_r = rpl::rlsff_constant(*epsilon, *delta, *l2, in.ts);
    }
    if (auto c_r = maybe(root, "c_r")) in.constants.c_r = *c_r;

    json j;
    j["rpl_basic"] = rpl::bound_rpl_basic(in);
    j["rpl_lifted"] = in.constants.gamma ? json(rpl::bound_rpl_lifted(in)) : json(nullptr);
    j["rlsff"] = (in.lambda && in.constants.c_r) ? json(rpl::bound_rlsff(in)) : json(nullptr);
    j["eta"] = in.constants.eta;
    j["gamma"] = in.constants.gamma ? json(*in.constants.gamma) : json(nullptr);
    j["c_r"] = in.constants.c_r ? json(*in.constants.c_r) : json(nullptr);
    if (auto regret = maybe(root, "regret")) {
      double best = j["rpl_basic"].get<double>();
      if (!j["rpl_lifted"].is_null()) best = std::min(best, j["rpl_lifted"].get<double>());
      j["regret"] = *regret;
      j["certified_rpl"] = *regret <= best;
      if (!j["rlsff"].is_null()) j["certified_rlsff"] = *regret <= j["rlsff"].get<double>();
    }
    if (!out_dir.empty()) write_text(fs::path(out_dir) / "bounds.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << '\n';
    return kOk;
  } catch (const rpl::Error& e) {
    report_error(error_json(std::string(rpl::to_string(e.code())), e.what()));
    return exit_code(e);
  }
}

int cmd_oracle_check(std::uint64_t seed, std::size_t streams) {
  try {
    bool all = true;
    for (const auto& c : rpl::oracle::run_all(seed, streams)) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": measured "
                << rpl::format_double(c.measured) << " tolerance "
                << rpl::format_double(c.tolerance)
                << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
      all = all && c.passed;
    }
    return all ? kOk : kOracle;
  } catch (const rpl::Error& e) {
    report_error(error_json(std::string(rpl::to_string(e.code())), e.what()));
    return kOracle;
  }
}

void add_run_options(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.configs, "experiment config (repeatable; runs in parallel)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--scenario", opt.scenario, "builtin scenario with its default config");
  cmd->add_option("--out", opt.out, "output directory (overrides output.directory)");
  cmd->add_option("--horizon", opt.horizon, "override the horizon")->check(CLI::PositiveNumber);
  cmd->add_option("--format", opt.format, "csv, json or both")
      ->check(CLI::IsMember({"csv", "json", "both"}));
  cmd->add_flag("--allow-low-forgetting", opt.allow_low_forgetting,
                "accept lambda_squared <= 0.5");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive control with recursive proximal learning"};
  app.require_subcommand(1);

  Options opt;
  auto* simulate = app.add_subcommand("simulate", "run one experiment per config");
  add_run_options(simulate, opt);
  simulate->add_option("--estimator", opt.estimator, "override estimator.kind (rpl or rlsff)");
  simulate->add_flag("--plot-script", opt.plot, "also write a matplotlib script");

  auto* compare = app.add_subcommand("compare", "RPL against RLSFF on the same scenario");
  add_run_options(compare, opt);
  compare->add_flag("--plot-script", opt.plot, "also write a matplotlib script");

  auto* excitation = app.add_subcommand("excitation", "excitation report only");
  add_run_options(excitation, opt);
  excitation->add_option("--estimator", opt.estimator, "override estimator.kind");

  std::string constants;
  std::string bounds_out;
  auto* bounds = app.add_subcommand("bounds", "evaluate the regret bounds from a constants file");
  bounds->add_option("--constants", constants, "YAML file of bound constants")->required();
  bounds->add_option("--out", bounds_out, "also write bounds.json here");

  std::uint64_t seed = 1;
  std::size_t streams = 200;
  auto* oracle = app.add_subcommand("oracle-check", "recursive-vs-batch and fixture checks");
  oracle->add_option("--seed", seed, "random stream seed");
  oracle->add_option("--streams", streams, "random streams per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("UsageError", e.what()).dump() << '\n';
    return kValidation;
  }

  if (simulate->parsed()) return cmd_simulate(opt);
  if (compare->parsed()) return cmd_compare(opt);
  if (excitation->parsed()) return cmd_excitation(opt);
  if (bounds->parsed()) return cmd_bounds(constants, bounds_out);
  if (oracle->parsed()) return cmd_oracle_check(seed, streams);
  return kValidation;
}
