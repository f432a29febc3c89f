#include "rpl/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rpl {

namespace {

template <typename A, typename B>
bool same(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(Errc::ValidationError, field + ": " + why);
}

std::string at_line(const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.line < 0) return {};
  return " (line " + std::to_string(mark.line + 1) + ")";
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field, const char* expected) {
  if (!node.IsScalar()) invalid(field, std::string("expected ") + expected + at_line(node));
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    invalid(field, std::string("expected ") + expected + ", got '" + node.Scalar() + "'" +
                       at_line(node));
  }
}

double number(const YAML::Node& node, const std::string& field) {
  const double v = scalar<double>(node, field, "a number");
  if (!std::isfinite(v)) invalid(field, "must be finite" + at_line(node));
  return v;
}

std::size_t count(const YAML::Node& node, const std::string& field) {
  const auto text = node.IsScalar() ? node.Scalar() : std::string();
  if (!text.empty() && text.front() == '-') invalid(field, "must be nonnegative" + at_line(node));
  return scalar<std::size_t>(node, field, "a nonnegative integer");
}

Vector vector_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) invalid(field, "expected a list of numbers" + at_line(node));
  Vector out(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = number(node[i], field + "[" + std::to_string(i) + "]");
  return out;
}

Matrix matrix_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() == 0)
    invalid(field, "expected a nonempty list of rows" + at_line(node));
  const std::size_t rows = node.size();
  std::size_t cols = 0;
  Matrix out;
  for (std::size_t i = 0; i < rows; ++i) {
    const Vector row = vector_of(node[i], field + "[" + std::to_string(i) + "]");
    if (i == 0) {
      cols = static_cast<std::size_t>(row.size());
      out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (static_cast<std::size_t>(row.size()) != cols) {
      invalid(field, "rows differ in length" + at_line(node[i]));
    }
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

void only_keys(const YAML::Node& node, const std::string& section,
               const std::set<std::string>& allowed) {
  if (!node.IsMap()) invalid(section, "expected a mapping" + at_line(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key))
      invalid(section.empty() ? key : section + "." + key, "unknown field" + at_line(kv.first));
  }
}

ScenarioSpec parse_inline_scenario(const YAML::Node& node) {
  const std::string sec = "scenario";
  only_keys(node, sec,
            {"name", "kind", "A", "B", "A_r", "B_r", "K1", "K2", "feature", "feature_constant",
             "theta_star", "x0", "reference", "theta0", "epsilon", "lambda_squared", "horizon"});
  ScenarioSpec s;
  if (node["name"]) s.name = scalar<std::string>(node["name"], sec + ".name", "a string");
  const std::string kind =
      node["kind"] ? scalar<std::string>(node["kind"], sec + ".kind", "a string") : "linear";
  if (kind == "linear")
    s.kind = ScenarioKind::Linear;
  else if (kind == "mrac")
    s.kind = ScenarioKind::Mrac;
  else
    invalid(sec + ".kind", "expected 'linear' or 'mrac', got '" + kind + "'");

  auto required = [&](const char* key) {
    if (!node[key]) invalid(sec + "." + key, "required");
    return node[key];
  };
  s.a = matrix_of(required("A"), sec + ".A");
  s.b = matrix_of(required("B"), sec + ".B");
  if (s.kind == ScenarioKind::Mrac) {
    s.a_ref = matrix_of(required("A_r"), sec + ".A_r");
    s.b_ref = matrix_of(required("B_r"), sec + ".B_r");
    if (node["K1"]) s.k1 = matrix_of(node["K1"], sec + ".K1");
    if (node["K2"]) s.k2 = matrix_of(node["K2"], sec + ".K2");
    if (s.k1.has_value() != s.k2.has_value()) invalid(sec + ".K1", "K1 and K2 come together");
  } else {
    for (const char* key : {"A_r", "B_r", "K1", "K2"})
      if (node[key]) invalid(sec + "." + key, "only valid for mrac scenarios");
  }
  const std::string feature =
      node["feature"] ? scalar<std::string>(node["feature"], sec + ".feature", "a string")
                      : "identity";
  if (feature == "identity") {
    s.feature = FeatureKind::Identity;
  } else if (feature == "constant") {
    s.feature = FeatureKind::Constant;
    s.feature_constant = matrix_of(required("feature_constant"), sec + ".feature_constant");
  } else {
    invalid(sec + ".feature", "expected 'identity' or 'constant', got '" + feature + "'");
  }
  s.theta_star = vector_of(required("theta_star"), sec + ".theta_star");
  s.x0 = vector_of(required("x0"), sec + ".x0");
  if (node["reference"]) {
    const auto& ref = node["reference"];
    if (!ref.IsSequence()) invalid(sec + ".reference", "expected a list" + at_line(ref));
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const std::string f = sec + ".reference[" + std::to_string(i) + "]";
      only_keys(ref[i], f, {"amplitude", "frequency", "phase"});
      SineTerm t;
      if (ref[i]["amplitude"]) t.amplitude = number(ref[i]["amplitude"], f + ".amplitude");
      if (ref[i]["frequency"]) t.frequency = number(ref[i]["frequency"], f + ".frequency");
      if (ref[i]["phase"]) t.phase = number(ref[i]["phase"], f + ".phase");
      s.reference.terms.push_back(t);
    }
  } else if (s.kind == ScenarioKind::Mrac) {
    s.reference = default_reference();
  }
  s.theta0 = node["theta0"] ? vector_of(node["theta0"], sec + ".theta0")
                            : Vector::Zero(static_cast<Eigen::Index>(s.param_dim()));
  if (node["epsilon"]) s.epsilon = number(node["epsilon"], sec + ".epsilon");
  if (node["lambda_squared"])
    s.lambda_squared = number(node["lambda_squared"], sec + ".lambda_squared");
  if (node["horizon"]) s.horizon = count(node["horizon"], sec + ".horizon");
  validate(s);
  return s;
}

ExperimentConfig from_yaml(const YAML::Node& root) {
  if (!root || root.IsNull()) invalid("config", "empty document");
  only_keys(root, "",
            {"scenario", "estimator", "horizon", "cost", "excitation", "output", "seed",
             "allow_low_forgetting", "ediss"});

  const std::uint64_t seed =
      root["seed"] ? scalar<std::uint64_t>(root["seed"], "seed", "a nonnegative integer") : 0;
  if (!root["scenario"]) invalid("scenario", "required");

  ExperimentConfig c;
  const auto& scen = root["scenario"];
  if (scen.IsScalar()) {
    c = default_config(scen.as<std::string>(), seed);
  } else {
    ScenarioSpec spec = parse_inline_scenario(scen);
    c.scenario = spec;
    c.scenario_inline = true;
    c.estimator.epsilon = spec.epsilon;
    c.estimator.lambda_squared = spec.lambda_squared;
    c.estimator.theta0 = spec.theta0;
    c.horizon = spec.horizon;
  }
  c.seed = seed;

  if (root["allow_low_forgetting"])
    c.estimator.allow_low_forgetting =
        scalar<bool>(root["allow_low_forgetting"], "allow_low_forgetting", "true or false");

  if (const auto& est = root["estimator"]) {
    only_keys(est, "estimator", {"kind", "epsilon", "lambda_squared", "theta0"});
    if (est["kind"]) {
      const auto kind = scalar<std::string>(est["kind"], "estimator.kind", "a string");
      if (kind == "rpl")
        c.estimator.kind = EstimatorKind::Rpl;
      else if (kind == "rlsff")
        c.estimator.kind = EstimatorKind::Rlsff;
      else
        invalid("estimator.kind", "expected 'rpl' or 'rlsff', got '" + kind + "'");
    }
    if (est["epsilon"]) c.estimator.epsilon = number(est["epsilon"], "estimator.epsilon");
    if (est["lambda_squared"])
      c.estimator.lambda_squared = number(est["lambda_squared"], "estimator.lambda_squared");
    if (est["theta0"]) c.estimator.theta0 = vector_of(est["theta0"], "estimator.theta0");
  }

  if (root["horizon"]) c.horizon = count(root["horizon"], "horizon");

  if (const auto& cost = root["cost"]) {
    only_keys(cost, "cost", {"kind"});
    if (cost["kind"]) {
      const auto kind = scalar<std::string>(cost["kind"], "cost.kind", "a string");
      if (kind != "quadratic") invalid("cost.kind", "expected 'quadratic', got '" + kind + "'");
    }
  }

  if (const auto& ex = root["excitation"]) {
    only_keys(ex, "excitation", {"delta", "ts_hint"});
    auto is_auto = [](const YAML::Node& n) { return n.IsScalar() && n.Scalar() == "auto"; };
    if (ex["delta"] && !is_auto(ex["delta"]))
      c.excitation.delta = number(ex["delta"], "excitation.delta");
    if (ex["ts_hint"] && !is_auto(ex["ts_hint"]))
      c.excitation.ts_hint = count(ex["ts_hint"], "excitation.ts_hint");
  }

  if (const auto& out = root["output"]) {
    only_keys(out, "output", {"directory", "formats"});
    if (out["directory"])
      c.output.directory = scalar<std::string>(out["directory"], "output.directory", "a string");
    if (const auto& formats = out["formats"]) {
      if (!formats.IsSequence()) invalid("output.formats", "expected a list" + at_line(formats));
      c.output.csv = c.output.json = false;
      for (const auto& f : formats) {
        const auto name = scalar<std::string>(f, "output.formats", "a string");
        if (name == "csv")
          c.output.csv = true;
        else if (name == "json")
          c.output.json = true;
        else
          invalid("output.formats", "expected 'csv' or 'json', got '" + name + "'");
      }
    }
  }

  if (const auto& ed = root["ediss"]) {
    only_keys(ed, "ediss", {"rho_margin"});
    if (ed["rho_margin"]) c.rho_margin = number(ed["rho_margin"], "ediss.rho_margin");
  }

  validate(c);
  return c;
}

void emit_vector(YAML::Emitter& out, const Vector& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v(i);
  out << YAML::EndSeq;
}

void emit_matrix(YAML::Emitter& out, const Matrix& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Eigen::Index i = 0; i < m.rows(); ++i) emit_vector(out, m.row(i).transpose());
  out << YAML::EndSeq;
}

void emit_scenario(YAML::Emitter& out, const ScenarioSpec& s) {
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  out << YAML::Key << "kind" << YAML::Value << to_string(s.kind);
  out << YAML::Key << "A" << YAML::Value;
  emit_matrix(out, s.a);
  out << YAML::Key << "B" << YAML::Value;
  emit_matrix(out, s.b);
  if (s.kind == ScenarioKind::Mrac) {
    out << YAML::Key << "A_r" << YAML::Value;
    emit_matrix(out, s.a_ref);
    out << YAML::Key << "B_r" << YAML::Value;
    emit_matrix(out, s.b_ref);
    if (s.k1 && s.k2) {
      out << YAML::Key << "K1" << YAML::Value;
      emit_matrix(out, *s.k1);
      out << YAML::Key << "K2" << YAML::Value;
      emit_matrix(out, *s.k2);
    }
  }
  out << YAML::Key << "feature" << YAML::Value << to_string(s.feature);
  if (s.feature == FeatureKind::Constant) {
    out << YAML::Key << "feature_constant" << YAML::Value;
    emit_matrix(out, s.feature_constant);
  }
  out << YAML::Key << "theta_star" << YAML::Value;
  emit_vector(out, s.theta_star);
  out << YAML::Key << "x0" << YAML::Value;
  emit_vector(out, s.x0);
  out << YAML::Key << "reference" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : s.reference.terms) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "amplitude" << YAML::Value << t.amplitude
        << YAML::Key << "frequency" << YAML::Value << t.frequency << YAML::Key << "phase"
        << YAML::Value << t.phase << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "theta0" << YAML::Value;
  emit_vector(out, s.theta0);
  out << YAML::Key << "epsilon" << YAML::Value << s.epsilon;
  out << YAML::Key << "lambda_squared" << YAML::Value << s.lambda_squared;
  out << YAML::Key << "horizon" << YAML::Value << s.horizon;
  out << YAML::EndMap;
}

}  // namespace

bool operator==(const EstimatorConfig& a, const EstimatorConfig& b) {
  return a.kind == b.kind && a.epsilon == b.epsilon && a.lambda_squared == b.lambda_squared &&
         same(a.theta0, b.theta0) && a.allow_low_forgetting == b.allow_low_forgetting;
}

bool operator==(const ExcitationSettings& a, const ExcitationSettings& b) {
  return a.delta == b.delta && a.ts_hint == b.ts_hint;
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return scenario == o.scenario && scenario_inline == o.scenario_inline &&
         estimator == o.estimator && horizon == o.horizon && cost == o.cost &&
         excitation == o.excitation && output == o.output && seed == o.seed &&
         rho_margin == o.rho_margin;
}

ExperimentConfig default_config(const std::string& scenario, std::uint64_t seed) {
  ExperimentConfig c;
  c.scenario = builtin_scenario(scenario, seed);
  c.seed = seed;
  c.estimator.epsilon = c.scenario.epsilon;
  c.estimator.lambda_squared = c.scenario.lambda_squared;
  c.estimator.theta0 = c.scenario.theta0;
  c.horizon = c.scenario.horizon;
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.scenario_inline) {
    validate(c.scenario);
  } else if (!(c.scenario == builtin_scenario(c.scenario.name, c.seed))) {
    invalid("scenario", "a modified builtin must be given inline");
  }
  const auto& e = c.estimator;
  if (!(e.epsilon > 0.0) || !std::isfinite(e.epsilon)) invalid("estimator.epsilon", "must be > 0");
  if (!(e.lambda_squared > 0.0 && e.lambda_squared < 1.0))
    invalid("estimator.lambda_squared", "must lie in (0, 1)");
  if (!e.allow_low_forgetting && !(e.lambda_squared > kMinLambdaSquared))
    invalid("estimator.lambda_squared",
            "must lie in (0.5, 1); set allow_low_forgetting to go lower");
  if (static_cast<std::size_t>(e.theta0.size()) != c.scenario.param_dim())
    invalid("estimator.theta0",
            "expected " + std::to_string(c.scenario.param_dim()) + " entries, got " +
                std::to_string(e.theta0.size()));
  if (!e.theta0.allFinite()) invalid("estimator.theta0", "must be finite");
  if (c.horizon < 1) invalid("horizon", "must be at least 1");
  if (c.excitation.delta && !(*c.excitation.delta > 0.0))
    invalid("excitation.delta", "must be > 0");
  if (c.excitation.ts_hint && *c.excitation.ts_hint >= c.horizon)
    invalid("excitation.ts_hint", "window must fit inside the horizon");
  if (!c.output.csv && !c.output.json) invalid("output.formats", "must not be empty");
  if (c.output.directory.empty()) invalid("output.directory", "must not be empty");
  if (!(c.rho_margin > 0.0 && c.rho_margin < 1.0)) invalid("ediss.rho_margin", "must lie in (0, 1)");
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::ParseError,
                "line " + std::to_string(e.mark.line + 1) + ", column " +
                    std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  return from_yaml(root);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string write_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value;
  if (c.scenario_inline)
    emit_scenario(out, c.scenario);
  else
    out << c.scenario.name;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "estimator" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(c.estimator.kind);
  out << YAML::Key << "epsilon" << YAML::Value << c.estimator.epsilon;
  out << YAML::Key << "lambda_squared" << YAML::Value << c.estimator.lambda_squared;
  out << YAML::Key << "theta0" << YAML::Value;
  emit_vector(out, c.estimator.theta0);
  out << YAML::EndMap;
  out << YAML::Key << "allow_low_forgetting" << YAML::Value << c.estimator.allow_low_forgetting;
  out << YAML::Key << "horizon" << YAML::Value << c.horizon;
  out << YAML::Key << "cost" << YAML::Value << YAML::BeginMap << YAML::Key << "kind"
      << YAML::Value << to_string(c.cost) << YAML::EndMap;
  out << YAML::Key << "excitation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "delta" << YAML::Value;
  if (c.excitation.delta)
    out << *c.excitation.delta;
  else
    out << "auto";
  out << YAML::Key << "ts_hint" << YAML::Value;
  if (c.excitation.ts_hint)
    out << *c.excitation.ts_hint;
  else
    out << "auto";
  out << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "directory" << YAML::Value << c.output.directory;
  out << YAML::Key << "formats" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  if (c.output.csv) out << "csv";
  if (c.output.json) out << "json";
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "ediss" << YAML::Value << YAML::BeginMap << YAML::Key << "rho_margin"
      << YAML::Value << c.rho_margin << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace rpl
