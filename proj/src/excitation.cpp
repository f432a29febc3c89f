#include "rpl/excitation.hpp"

#include <cmath>
#include <string>

namespace rpl {

namespace {

std::size_t stream_dim(const FeatureStream& stream) {
  if (stream.empty()) return 0;
  const auto p = stream.front().rows();
  for (const auto& f : stream)
    if (f.rows() != p) throw Error(Errc::DimensionMismatch, "stream blocks differ in row count");
  return static_cast<std::size_t>(p);
}

Matrix window_gram(const FeatureStream& stream, std::size_t begin, std::size_t end) {
  const auto p = static_cast<Eigen::Index>(stream.front().rows());
  Matrix g = Matrix::Zero(p, p);
  for (std::size_t i = begin; i < end; ++i) g.noalias() += stream[i] * stream[i].transpose();
  return symmetrized(g);
}

// Window Grams as differences of prefix sums; only used to narrow a search,
// the answer is confirmed by the direct computation.
bool pe_by_prefix_sums(const std::vector<Matrix>& prefix, double delta, std::size_t length) {
  for (std::size_t k0 = 0; k0 + length < prefix.size(); ++k0) {
    const Matrix g = symmetrized(Matrix(prefix[k0 + length] - prefix[k0]));
    if (sym_eig_extrema(g).min < delta) return false;
  }
  return true;
}

}  // namespace

FeatureStream excitation_stream(const Trajectory& trajectory) {
  FeatureStream out;
  out.reserve(trajectory.regressors.size());
  for (const auto& r : trajectory.regressors) out.push_back(r.transpose());
  return out;
}

std::vector<double> prefix_lambda_min(const FeatureStream& stream) {
  const std::size_t p = stream_dim(stream);
  std::vector<double> out;
  out.reserve(stream.size());
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (const auto& f : stream) {
    g = gram_accumulate(g, f);
    out.push_back(sym_eig_extrema(g).min);
  }
  return out;
}

std::optional<std::size_t> se_detect(const FeatureStream& stream, double delta) {
  if (!(delta > 0.0)) throw Error(Errc::ValidationError, "delta must be positive");
  const auto curve = prefix_lambda_min(stream);
  for (std::size_t k = 0; k < curve.size(); ++k)
    if (curve[k] >= delta) return k;
  return std::nullopt;
}

PeResult pe_check(const FeatureStream& stream, double delta, std::size_t window_ts) {
  if (!(delta > 0.0)) throw Error(Errc::ValidationError, "delta must be positive");
  stream_dim(stream);
  const std::size_t length = window_ts + 1;
  if (stream.size() < length)
    throw Error(Errc::StreamTooShort, "stream has " + std::to_string(stream.size()) +
                                          " blocks, window needs " + std::to_string(length));
  PeResult result;
  result.satisfied = true;
  result.window_lambda_min.reserve(stream.size() - length + 1);
  for (std::size_t k0 = 0; k0 + length <= stream.size(); ++k0) {
    const double lmin = sym_eig_extrema(window_gram(stream, k0, k0 + length)).min;
    result.window_lambda_min.push_back(lmin);
    if (lmin < delta) result.satisfied = false;
  }
  return result;
}

std::optional<std::size_t> pe_minimal_window(const FeatureStream& stream, double delta) {
  if (stream.empty()) return std::nullopt;
  // Passing is monotone in the window length: a longer window contains a
  // passing shorter one. The longest window is the whole stream.
  const std::size_t p = stream_dim(stream);
  std::vector<Matrix> prefix;
  prefix.reserve(stream.size() + 1);
  prefix.push_back(Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
  for (const auto& f : stream) prefix.push_back(prefix.back() + f * f.transpose());

  std::size_t lo = 0;
  std::size_t hi = stream.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (pe_by_prefix_sums(prefix, delta, mid + 1))
      hi = mid;
    else
      lo = mid + 1;
  }
  // Settle rounding disagreements near the boundary with the direct check.
  while (lo > 0 && pe_check(stream, delta, lo - 1).satisfied) --lo;
  for (; lo < stream.size(); ++lo)
    if (pe_check(stream, delta, lo).satisfied) return lo;
  return std::nullopt;
}

BetaEstimate beta_estimate(const FeatureStream& stream) {
  BetaEstimate out;
  if (stream.empty()) return out;
  const std::size_t p = stream_dim(stream);
  const std::size_t head = stream.size() - stream.size() / 10;
  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  double head_beta = 0.0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    g = gram_accumulate(g, stream[i]);
    if (i + 1 == head) head_beta = sym_eig_extrema(g).max;
  }
  out.beta = sym_eig_extrema(g).max;
  out.tail_increment = out.beta - head_beta;
  return out;
}

double stacked_norm(const FeatureStream& stream, std::size_t last) {
  if (stream.empty()) return 0.0;
  const std::size_t end = std::min(last + 1, stream.size());
  return std::sqrt(std::max(0.0, sym_eig_extrema(window_gram(stream, 0, end)).max));
}

ContractionConstants rpl_constants(double delta, double epsilon, double beta,
                                   std::optional<double> phi_ts_norm) {
  if (!(delta > 0.0) || !(epsilon > 0.0))
    throw Error(Errc::InvalidConstants, "delta and epsilon must be positive");
  if (beta < delta)
    throw Error(Errc::InvalidConstants, "beta is smaller than delta: the prefix Gram cannot exceed "
                                        "the total Gram");
  ContractionConstants out;
  out.eta = epsilon / (delta + epsilon);
  const double sd = std::sqrt(delta);
  const double sb = std::sqrt(beta);
  if (beta > delta) out.epsilon_max = delta * sd / (sb - sd);
  if (!out.epsilon_max || epsilon < *out.epsilon_max)
    out.gamma = epsilon * sb / (epsilon * sd + delta * sd);
  out.c_p = phi_ts_norm ? *phi_ts_norm : sb;
  return out;
}

double rlsff_constant(double epsilon, double delta, double lambda_squared, std::size_t ts) {
  if (!(lambda_squared > 0.0 && lambda_squared < 1.0))
    throw Error(Errc::InvalidConstants, "lambda_squared must lie in (0, 1)");
  if (!(delta > 0.0) || !(epsilon > 0.0))
    throw Error(Errc::InvalidConstants, "delta and epsilon must be positive");
  const double inv = 1.0 / lambda_squared;
  const double numerator = epsilon * (std::pow(lambda_squared, static_cast<double>(ts)) - inv);
  const double denominator = delta * (1.0 - inv);
  const double c_r_squared = numerator / denominator;
  if (!(c_r_squared > 0.0) || !std::isfinite(c_r_squared))
    throw Error(Errc::InvalidConstants, "c_r^2 is not positive");
  return std::sqrt(c_r_squared);
}

double default_delta(const FeatureStream& stream) {
  if (stream.empty()) return 0.0;
  return 0.5 * std::max(0.0, prefix_lambda_min(stream).back());
}

ExcitationReport excitation_report(const FeatureStream& stream, double delta,
                                   std::optional<std::size_t> pe_window_ts) {
  ExcitationReport report;
  report.delta_used = delta;
  report.prefix_lambda_min = prefix_lambda_min(stream);
  const auto beta = beta_estimate(stream);
  report.beta_accumulated = beta.beta;
  report.beta_tail_increment = beta.tail_increment;
  if (!(delta > 0.0) || stream.empty()) return report;

  for (std::size_t k = 0; k < report.prefix_lambda_min.size(); ++k) {
    if (report.prefix_lambda_min[k] >= delta) {
      report.detected_ts = k;
      break;
    }
  }
  if (!report.detected_ts) return report;  // PE implies SE

  const std::optional<std::size_t> window =
      pe_window_ts ? pe_window_ts : pe_minimal_window(stream, delta);
  if (window && *window + 1 <= stream.size()) {
    auto pe = pe_check(stream, delta, *window);
    report.pe_satisfied = pe.satisfied;
    report.pe_window_ts = *window;
    report.window_lambda_min = std::move(pe.window_lambda_min);
  }
  return report;
}

}  // namespace rpl
