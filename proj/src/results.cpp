#include "rpl/results.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace rpl {

namespace {

constexpr std::size_t kEdissTrials = 20;
constexpr std::size_t kEdissHorizon = 200;

nlohmann::json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

template <typename T>
nlohmann::json optional_count(const std::optional<T>& v) {
  if (!v) return nullptr;
  return *v;
}

nlohmann::json to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line;
}

void add_columns(std::vector<std::string>& header, const std::string& prefix, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) header.push_back(prefix + "_" + std::to_string(i));
}

void add_values(std::vector<std::string>& row, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(format_double(v(i)));
}

const Vector& reference_state(const RunOutput& run, std::size_t k) {
  return (*run.scenario.mrac->reference_states)[k];
}

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

RunOutput run_config(const ExperimentConfig& config) {
  validate(config);
  RunOutput run;
  run.config = config;
  run.scenario = build_scenario(config.scenario, config.horizon);
  run.result = run_experiment(*run.scenario.model, config.estimator, run.scenario.initial_state,
                              config.horizon, config.cost, config.excitation);
  const Matrix& nominal = config.scenario.nominal_matrix();
  run.ediss = fit_ediss_linear(nominal, config.rho_margin);
  run.ediss_check = verify_ediss(
      [nominal](std::size_t, const Vector& x) -> Vector { return nominal * x; },
      config.scenario.state_dim(), run.ediss, kEdissTrials, 1.0, kEdissHorizon, config.seed);
  run.bounds = evaluate_bounds(*run.scenario.model, config.estimator, run.result, run.ediss);
  return run;
}

std::vector<std::string> csv_header(const RunOutput& run) {
  const auto n = static_cast<Eigen::Index>(run.config.scenario.state_dim());
  const auto p = static_cast<Eigen::Index>(run.config.scenario.param_dim());
  std::vector<std::string> header{"k"};
  add_columns(header, "x", n);
  add_columns(header, "xstar", n);
  if (run.scenario.mrac) add_columns(header, "xbar", n);
  add_columns(header, "theta", p);
  for (const char* c : {"theta_err_norm", "regret", "cumulative_regret", "prefix_lambda_min"})
    header.emplace_back(c);
  return header;
}

void write_csv(std::ostream& out, const RunOutput& run) {
  out << join(csv_header(run)) << '\n';
  const auto& closed = run.result.closed;
  const auto& bench = run.result.benchmark;
  const Vector& theta_star = TruthAccess::true_parameter(*run.scenario.model);
  for (std::size_t k = 0; k < closed.horizon; ++k) {
    std::vector<std::string> row{std::to_string(k)};
    add_values(row, closed.states[k]);
    add_values(row, bench.states[k]);
    if (run.scenario.mrac) add_values(row, reference_state(run, k));
    add_values(row, closed.estimates[k]);
    row.push_back(format_double((closed.estimates[k] - theta_star).norm()));
    row.push_back(format_double(run.result.regret.per_step[k]));
    row.push_back(format_double(run.result.regret.cumulative[k]));
    row.push_back(format_double(run.result.excitation.prefix_lambda_min[k]));
    out << join(row) << '\n';
  }
}

nlohmann::json excitation_json(const ExcitationReport& r) {
  nlohmann::json j;
  j["delta"] = r.delta_used;
  j["ts_detected"] = optional_count(r.detected_ts);
  j["pe_window_ts"] = optional_count(r.pe_window_ts);
  j["pe_satisfied"] = r.pe_satisfied;
  j["beta"] = r.beta_accumulated;
  j["beta_tail_increment"] = r.beta_tail_increment;
  j["final_prefix_lambda_min"] = r.prefix_lambda_min.empty()
                                     ? nlohmann::json(nullptr)
                                     : nlohmann::json(r.prefix_lambda_min.back());
  if (r.window_lambda_min && !r.window_lambda_min->empty()) {
    double lo = std::numeric_limits<double>::infinity();
    for (double v : *r.window_lambda_min) lo = std::min(lo, v);
    j["min_window_lambda_min"] = lo;
  } else {
    j["min_window_lambda_min"] = nullptr;
  }
  return j;
}

nlohmann::json summary_json(const RunOutput& run) {
  const auto& res = run.result;
  const auto& in = run.bounds.inputs;
  nlohmann::json j;
  j["scenario"] = run.config.scenario.name;
  j["estimator"] = to_string(run.config.estimator.kind);
  j["horizon"] = run.config.horizon;
  j["regret_total"] = res.regret.total();
  j["final_state_norm"] = res.closed.states.back().norm();
  j["final_theta"] = to_json(res.closed.estimates.empty() ? run.config.estimator.theta0
                                                          : res.closed.estimates.back());

  nlohmann::json constants;
  constants["c0"] = in.c0;
  constants["cw"] = in.cw;
  constants["rho"] = in.rho;
  constants["b"] = in.b;
  constants["lipschitz"] = in.lipschitz;
  constants["theta0_error"] = in.theta0_error;
  constants["ts"] = in.ts;
  constants["eta"] = in.constants.eta;
  constants["gamma"] = optional_number(in.constants.gamma);
  constants["epsilon_max"] = optional_number(in.constants.epsilon_max);
  constants["c_p"] = optional_number(in.constants.c_p);
  constants["c_r"] = optional_number(in.constants.c_r);
  constants["lambda"] = optional_number(in.lambda);
  j["constants"] = constants;

  nlohmann::json bounds;
  bounds["rpl_basic"] = optional_number(run.bounds.rpl_basic);
  bounds["rpl_lifted"] = optional_number(run.bounds.rpl_lifted);
  bounds["rlsff"] = optional_number(run.bounds.rlsff);
  bounds["selected"] = optional_number(run.bounds.selected);
  bounds["status"] = run.bounds.status;
  j["bounds"] = bounds;

  nlohmann::json cert;
  if (run.bounds.certification) {
    const auto& c = *run.bounds.certification;
    cert["verdict"] = c.pass ? "pass" : "fail";
    cert["regret"] = c.regret;
    cert["bound"] = c.bound;
    cert["slack_ratio"] = c.slack_ratio;
  } else {
    cert["verdict"] = "not_applicable";
  }
  j["certification"] = cert;

  j["excitation"] = excitation_json(res.excitation);
  j["ts"] = optional_count(res.excitation.detected_ts);

  nlohmann::json ed;
  ed["c0"] = run.ediss.c0;
  ed["cw"] = run.ediss.cw;
  ed["rho"] = run.ediss.rho;
  ed["verified"] = run.ediss_check.pass;
  ed["worst_margin"] = run.ediss_check.worst_margin;
  j["ediss"] = ed;

  if (run.scenario.mrac) {
    j["matching_residual"] = run.scenario.mrac->matching_residual;
    j["matching_residual_warning"] = run.scenario.mrac->residual_warning;
  } else {
    j["matching_residual"] = nullptr;
  }
  j["config"] = write_config(run.config);
  return j;
}

std::vector<std::filesystem::path> write_bundle(const RunOutput& run,
                                                const std::filesystem::path& directory,
                                                const std::string& stem) {
  std::filesystem::create_directories(directory);
  std::vector<std::filesystem::path> written;
  if (run.config.output.csv) {
    const auto path = directory / (stem + ".csv");
    std::ofstream out(path, std::ios::binary);
    write_csv(out, run);
    if (!out) throw Error(Errc::ValidationError, "cannot write " + path.string());
    written.push_back(path);
  }
  if (run.config.output.json) {
    const auto path = directory / (stem + ".json");
    std::ofstream out(path, std::ios::binary);
    out << summary_json(run).dump(2) << '\n';
    if (!out) throw Error(Errc::ValidationError, "cannot write " + path.string());
    written.push_back(path);
  }
  return written;
}

Comparison run_comparison(const ExperimentConfig& config) {
  ExperimentConfig a = config;
  a.estimator.kind = EstimatorKind::Rpl;
  ExperimentConfig b = config;
  b.estimator.kind = EstimatorKind::Rlsff;
  return Comparison{run_config(a), run_config(b)};
}

void write_comparison_csv(std::ostream& out, const Comparison& cmp) {
  const bool mrac = cmp.rpl.scenario.mrac.has_value();
  const auto n = static_cast<Eigen::Index>(cmp.rpl.config.scenario.state_dim());
  const auto m = cmp.rpl.config.scenario.input_dim();
  std::vector<std::string> header{"k"};
  if (mrac) {
    header.emplace_back("r");
    add_columns(header, "xbar", n);
  }
  add_columns(header, "x_rpl", n);
  add_columns(header, "x_rlsff", n);
  for (const char* c : {"err_norm_rpl", "err_norm_rlsff", "cumulative_regret_rpl",
                        "cumulative_regret_rlsff"})
    header.emplace_back(c);
  out << join(header) << '\n';

  const std::size_t horizon = cmp.rpl.result.closed.horizon;
  for (std::size_t k = 0; k < horizon; ++k) {
    const Vector& e_rpl = cmp.rpl.result.closed.states[k];
    const Vector& e_rlsff = cmp.rlsff.result.closed.states[k];
    std::vector<std::string> row{std::to_string(k)};
    if (mrac) {
      const Vector& xbar = reference_state(cmp.rpl, k);
      row.push_back(format_double(cmp.rpl.config.scenario.reference(k, m)(0)));
      add_values(row, xbar);
      add_values(row, e_rpl + xbar);
      add_values(row, e_rlsff + xbar);
    } else {
      add_values(row, e_rpl);
      add_values(row, e_rlsff);
    }
    row.push_back(format_double(e_rpl.norm()));
    row.push_back(format_double(e_rlsff.norm()));
    row.push_back(format_double(cmp.rpl.result.regret.cumulative[k]));
    row.push_back(format_double(cmp.rlsff.result.regret.cumulative[k]));
    out << join(row) << '\n';
  }
}

nlohmann::json comparison_json(const Comparison& cmp) {
  nlohmann::json j;
  j["rpl"] = summary_json(cmp.rpl);
  j["rlsff"] = summary_json(cmp.rlsff);
  const double r_rpl = cmp.rpl.result.regret.total();
  const double r_rlsff = cmp.rlsff.result.regret.total();
  j["final_regret"] = {{"rpl", r_rpl}, {"rlsff", r_rlsff}};
  j["rpl_regret_below_rlsff"] = r_rpl < r_rlsff;
  j["final_error_norm"] = {{"rpl", cmp.rpl.result.closed.states.back().norm()},
                           {"rlsff", cmp.rlsff.result.closed.states.back().norm()}};
  return j;
}

std::string plot_script(const std::string& csv_name, bool comparison) {
  std::string s =
      "import sys\n"
      "import pandas as pd\n"
      "import matplotlib.pyplot as plt\n\n"
      "df = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else \"" +
      csv_name + "\")\n";
  if (comparison) {
    s +=
        "fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)\n"
        "for col in [c for c in df.columns if c.startswith((\"xbar_\", \"x_rpl_\", "
        "\"x_rlsff_\"))]:\n"
        "    ax1.plot(df[\"k\"], df[col], label=col)\n"
        "ax1.legend()\n"
        "ax2.plot(df[\"k\"], df[\"cumulative_regret_rpl\"], label=\"RPL\")\n"
        "ax2.plot(df[\"k\"], df[\"cumulative_regret_rlsff\"], label=\"RLSFF\")\n"
        "ax2.set_ylabel(\"cumulative regret\")\n"
        "ax2.legend()\n";
  } else {
    s +=
        "fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)\n"
        "for col in [c for c in df.columns if c.startswith((\"x_\", \"xstar_\"))]:\n"
        "    ax1.plot(df[\"k\"], df[col], label=col)\n"
        "ax1.legend()\n"
        "ax2.plot(df[\"k\"], df[\"cumulative_regret\"])\n"
        "ax2.set_ylabel(\"cumulative regret\")\n";
  }
  s += "ax2.set_xlabel(\"k\")\nplt.show()\n";
  return s;
}

}  // namespace rpl
