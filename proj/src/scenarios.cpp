#include "rpl/scenarios.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

namespace rpl {

std::string to_string(ScenarioKind kind) {
  return kind == ScenarioKind::Mrac ? "mrac" : "linear";
}

std::string to_string(FeatureKind kind) {
  return kind == FeatureKind::Constant ? "constant" : "identity";
}

Vector ReferenceSpec::operator()(std::size_t k, std::size_t channels) const {
  double r = 0.0;
  for (const auto& t : terms)
    r += t.amplitude * std::sin(t.frequency * static_cast<double>(k) + t.phase);
  return Vector::Constant(static_cast<Eigen::Index>(channels), r);
}

ReferenceSpec default_reference() { return ReferenceSpec{{{1.0, 0.1, 0.0}, {0.5, 0.3, 1.0}}}; }

namespace {

template <typename A, typename B>
bool same(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same(const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same(*a, *b);
}

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(Errc::ValidationError, "scenario." + field + ": " + why);
}

}  // namespace

std::size_t ScenarioSpec::param_dim() const {
  if (feature == FeatureKind::Constant) return static_cast<std::size_t>(feature_constant.rows());
  return state_dim();
}

bool ScenarioSpec::operator==(const ScenarioSpec& o) const {
  return name == o.name && kind == o.kind && same(a, o.a) && same(b, o.b) &&
         same(a_ref, o.a_ref) && same(b_ref, o.b_ref) && same(k1, o.k1) && same(k2, o.k2) &&
         feature == o.feature && same(feature_constant, o.feature_constant) &&
         same(theta_star, o.theta_star) && same(x0, o.x0) && reference == o.reference &&
         same(theta0, o.theta0) && epsilon == o.epsilon && lambda_squared == o.lambda_squared &&
         horizon == o.horizon;
}

void validate(const ScenarioSpec& spec) {
  const auto n = spec.a.rows();
  if (n == 0 || spec.a.cols() != n) invalid("A", "must be a nonempty square matrix");
  if (spec.b.rows() != n || spec.b.cols() == 0) invalid("B", "must have as many rows as A");
  if (!spec.a.allFinite() || !spec.b.allFinite()) invalid("A", "entries must be finite");
  if (spec.kind == ScenarioKind::Mrac) {
    if (spec.a_ref.rows() != n || spec.a_ref.cols() != n) invalid("A_r", "must match A");
    if (spec.b_ref.rows() != n || spec.b_ref.cols() != spec.b.cols())
      invalid("B_r", "must match B");
  }
  if (spec.feature == FeatureKind::Identity && spec.b.cols() != 1)
    invalid("feature", "identity features need a single input channel");
  if (spec.feature == FeatureKind::Constant && spec.feature_constant.cols() != spec.b.cols())
    invalid("feature_constant", "must have one column per input channel");
  const auto p = static_cast<Eigen::Index>(spec.param_dim());
  if (spec.theta_star.size() != p) invalid("theta_star", "must have the parameter dimension");
  if (spec.theta0.size() != p) invalid("theta0", "must have the parameter dimension");
  if (spec.x0.size() != n) invalid("x0", "must have the state dimension");
}

BuiltScenario build_scenario(const ScenarioSpec& spec, std::size_t horizon) {
  validate(spec);
  BuiltScenario out;
  out.spec = spec;
  const auto n = static_cast<std::size_t>(spec.a.rows());
  const auto m = static_cast<std::size_t>(spec.b.cols());
  const std::size_t p = spec.param_dim();

  FeatureMap features;
  if (spec.feature == FeatureKind::Constant) {
    const Matrix constant = spec.feature_constant;
    features = [constant](std::size_t, const Vector&) -> Matrix { return constant; };
  } else {
    features = [](std::size_t, const Vector& x) -> Matrix { return x; };
  }

  if (spec.kind == ScenarioKind::Linear) {
    const Matrix a = spec.a;
    const Matrix b = spec.b;
    out.model = std::make_shared<SystemModel>(
        n, m, p, [a](std::size_t, const Vector& x) -> Vector { return a * x; },
        [b](std::size_t, const Vector&) -> Matrix { return b; }, features, spec.theta_star);
    out.initial_state = spec.x0;
    return out;
  }

  MracPlant plant;
  plant.a = spec.a;
  plant.b = spec.b;
  plant.a_ref = spec.a_ref;
  plant.b_ref = spec.b_ref;
  plant.psi = [features](const Vector& x) { return features(0, x); };
  plant.param_dim = p;
  plant.theta_star = spec.theta_star;
  const ReferenceSpec reference = spec.reference;
  plant.reference = [reference, m](std::size_t k) { return reference(k, m); };
  plant.reference_start = spec.x0;
  plant.reference_horizon = horizon;
  plant.k1 = spec.k1;
  plant.k2 = spec.k2;
  out.mrac = build_mrac_error_system(plant);
  out.model = std::make_shared<SystemModel>(out.mrac->model);
  out.initial_state = Vector::Zero(static_cast<Eigen::Index>(n));
  return out;
}

std::vector<std::string> builtin_scenario_names() {
  return {"mrac-paper", "mrac-matched", "scalar-hand", "random-matched"};
}

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

Vector vec(std::initializer_list<double> values) {
  Vector out(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) out(i++) = v;
  return out;
}

ScenarioSpec mrac_paper() {
  ScenarioSpec s;
  s.name = "mrac-paper";
  s.kind = ScenarioKind::Mrac;
  s.a = mat({{1.0314, 0.2526}, {0.2526, 1.0314}});
  s.b = mat({{0.0314}, {0.2526}});
  s.a_ref = mat({{-0.9929, 0.2253}, {-0.0569, 0.8117}});
  s.b_ref = mat({{0.0314}, {0.2526}});
  s.feature = FeatureKind::Identity;
  s.theta_star = vec({0.75, 0.50});
  s.x0 = vec({0.2, 0.2});
  s.reference = default_reference();
  s.theta0 = vec({5.0, -1.0});
  s.epsilon = 1.0;
  s.lambda_squared = 0.99;
  // A_r has spectral radius ~0.986 and B_r is nearly one of its
  // eigenvectors; the forgetting estimator needs ~2,500 steps to drive the
  // tracking error below 1e-6.
  s.horizon = 3000;
  return s;
}

ScenarioSpec mrac_matched() {
  ScenarioSpec s = mrac_paper();
  s.name = "mrac-matched";
  // K1 places the eigenvalues of A - B K1 near {0.5, 0.6}; A_r is defined
  // from it, so matching holds exactly.
  s.k1 = mat({{4.1837, 3.2915}});
  s.k2 = mat({{1.0}});
  s.a_ref = s.a - s.b * *s.k1;
  s.horizon = 2000;
  return s;
}

ScenarioSpec scalar_hand() {
  ScenarioSpec s;
  s.name = "scalar-hand";
  s.kind = ScenarioKind::Linear;
  s.a = mat({{0.5}});
  s.b = mat({{1.0}});
  s.feature = FeatureKind::Constant;
  s.feature_constant = mat({{1.0}});
  s.theta_star = vec({1.0});
  s.x0 = vec({1.0});
  s.theta0 = vec({0.0});
  s.epsilon = 1.0;
  s.lambda_squared = 0.99;
  s.horizon = 2000;
  return s;
}

}  // namespace

double reference_excitation(const ScenarioSpec& s, std::size_t steps) {
  Matrix gram = Matrix::Zero(s.a_ref.rows(), s.a_ref.rows());
  Vector xbar = s.x0;
  for (std::size_t k = 0; k < steps; ++k) {
    gram += xbar * xbar.transpose();
    xbar = s.a_ref * xbar + s.b_ref * s.reference(k, s.input_dim());
  }
  return Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

ScenarioSpec random_matched_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> radius(0.3, 0.8);
  std::uniform_int_distribution<int> dim(2, 3);

  // Draws whose reference barely excites some direction are redrawn, so
  // every seed converges well inside its horizon.
  for (;;) {
    const int n = dim(rng);
    ScenarioSpec s;
    s.name = "random-matched";
    s.kind = ScenarioKind::Mrac;

    // Stable A_r as a rotated diagonal with spectral radius <= 0.8.
    Matrix q = Matrix::NullaryExpr(n, n, [&] { return unit(rng); });
    q = Eigen::HouseholderQR<Matrix>(q).householderQ();
    Vector eig(n);
    for (int i = 0; i < n; ++i) eig(i) = (unit(rng) >= 0 ? 1.0 : -1.0) * radius(rng);
    s.a_ref = q * eig.asDiagonal() * q.transpose();
    s.b = Matrix::NullaryExpr(n, 1, [&] { return unit(rng); });
    s.b /= s.b.norm();
    s.b_ref = s.b;
    s.k1 = Matrix::NullaryExpr(1, n, [&] { return unit(rng); });
    s.k2 = Matrix::Identity(1, 1);
    s.a = s.a_ref + s.b * *s.k1;
    s.feature = FeatureKind::Identity;
    s.theta_star = Vector::NullaryExpr(n, [&] { return unit(rng); });
    s.x0 = Vector::NullaryExpr(n, [&] { return 0.5 * unit(rng); });
    s.reference = default_reference();
    s.theta0 = s.theta_star + Vector::NullaryExpr(n, [&] { return 2.0 * unit(rng); });
    s.epsilon = 1.0;
    s.lambda_squared = 0.99;
    s.horizon = 2000;
    if (reference_excitation(s, s.horizon / 2) >= kMinReferenceExcitation) return s;
  }
}

ScenarioSpec builtin_scenario(const std::string& name, std::uint64_t seed) {
  if (name == "mrac-paper") return mrac_paper();
  if (name == "mrac-matched") return mrac_matched();
  if (name == "scalar-hand") return scalar_hand();
  if (name == "random-matched") return random_matched_scenario(seed);
  throw Error(Errc::ValidationError, "scenario: unknown builtin '" + name + "'");
}

}  // namespace rpl
