#include "filterloss/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "filterloss/error.hpp"

namespace filterloss {

std::string_view loss_family_name(LossFamily family) noexcept {
  switch (family) {
    case LossFamily::CrossEntropy: return "ce";
    case LossFamily::LabelSmooth: return "label_smooth";
    case LossFamily::Focal: return "focal";
    case LossFamily::FocalLogits: return "focal_logits";
    case LossFamily::LabelSmoothFocal: return "ls_focal";
  }
  return "unknown";
}

LossFamily parse_loss_family(std::string_view name) {
  for (LossFamily f : {LossFamily::CrossEntropy, LossFamily::LabelSmooth, LossFamily::Focal,
                       LossFamily::FocalLogits, LossFamily::LabelSmoothFocal}) {
    if (name == loss_family_name(f)) return f;
  }
  fail(ErrorKind::InvalidArgument,
       "unknown loss family '" + std::string(name) +
           "' (expected ce, label_smooth, focal, focal_logits or ls_focal)");
}

void LossSpec::validate() const {
  require(gamma >= 0.0 && std::isfinite(gamma), ErrorKind::InvalidArgument,
          "loss gamma must be >= 0");
  require(epsilon >= 0.0 && epsilon < 1.0, ErrorKind::InvalidArgument,
          "loss epsilon must lie in [0, 1)");
  require(prob_floor > 0.0 && prob_floor < 1.0, ErrorKind::InvalidArgument,
          "loss prob_floor must lie in (0, 1)");
}

namespace {

bool smoothed(LossFamily f) {
  return f == LossFamily::LabelSmooth || f == LossFamily::LabelSmoothFocal;
}

bool modulated(LossFamily f) {
  return f == LossFamily::Focal || f == LossFamily::FocalLogits ||
         f == LossFamily::LabelSmoothFocal;
}

// One row. All families share the form sum_c q_c phi(p_c) with
// phi(p) = -(1-p)^g log p; the gradient w.r.t. logits is u - p sum(u) where
// u_c = q_c p_c phi'(p_c) = q_c [g p_c (1-p_c)^(g-1) log p_c - (1-p_c)^g].
double row_loss(const LossSpec& spec, std::span<const double> z, ClassId y,
                std::span<double> grad, std::vector<double>& p, std::vector<double>& logp,
                std::vector<double>& q) {
  const std::size_t c_count = z.size();
  const double z_max = *std::ranges::max_element(z);
  double s = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    p[c] = std::exp(z[c] - z_max);
    s += p[c];
  }
  const double log_s = std::log(s);
  const bool logits_route = spec.family == LossFamily::FocalLogits;
  for (std::size_t c = 0; c < c_count; ++c) {
    p[c] /= s;
    logp[c] = logits_route ? (z[c] - z_max) - log_s : std::log(std::max(p[c], spec.prob_floor));
  }

  const double eps = smoothed(spec.family) ? spec.epsilon : 0.0;
  const double gamma = modulated(spec.family) ? spec.gamma : 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    q[c] = eps / static_cast<double>(c_count);
  }
  q[static_cast<std::size_t>(y)] += 1.0 - eps;

  double value = 0.0;
  double u_sum = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    if (q[c] == 0.0) {
      grad[c] = 0.0;
      continue;
    }
    // 1 - p_c; the logits route derives it from log p to keep precision near p = 1.
    const double om = logits_route ? -std::expm1(logp[c]) : 1.0 - p[c];
    double modulator = 1.0;
    double u = -1.0;
    if (gamma != 0.0) {
      modulator = std::pow(om, gamma);
      const double lead = om > 0.0 ? gamma * p[c] * std::pow(om, gamma - 1.0) * logp[c] : 0.0;
      u = lead - modulator;
    }
    value -= q[c] * modulator * logp[c];
    grad[c] = q[c] * u;
    u_sum += grad[c];
  }
  for (std::size_t c = 0; c < c_count; ++c) grad[c] -= p[c] * u_sum;
  return std::max(value, 0.0);
}

}  // namespace

PerSampleLoss per_sample_loss(const LossSpec& spec, const Matrix& logits,
                              std::span<const ClassId> labels) {
  spec.validate();
  require(logits.rows() == labels.size(), ErrorKind::ShapeMismatch,
          "logits have " + std::to_string(logits.rows()) + " rows but " +
              std::to_string(labels.size()) + " labels");
  require(logits.cols() >= 1, ErrorKind::ShapeMismatch, "logits need at least one class");
  require(logits.all_finite(), ErrorKind::NonFinite, "logits contain NaN/Inf");
  const auto c_count = static_cast<ClassId>(logits.cols());

  PerSampleLoss out{std::vector<double>(logits.rows()), Matrix(logits.rows(), logits.cols())};
  std::vector<double> p(logits.cols());
  std::vector<double> logp(logits.cols());
  std::vector<double> q(logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    require(labels[i] >= 0 && labels[i] < c_count, ErrorKind::InvalidArgument,
            "label " + std::to_string(labels[i]) + " of row " + std::to_string(i) +
                " outside [0, " + std::to_string(c_count) + ")");
    out.values[i] = row_loss(spec, logits.row(i), labels[i], out.grad_logits.row(i), p, logp, q);
  }
  return out;
}

ReducedLoss reduce_weighted(const PerSampleLoss& per_sample, std::span<const double> omega,
                            WeightNormalization normalization) {
  const std::size_t n = per_sample.values.size();
  require(omega.size() == n, ErrorKind::InvalidArgument,
          "weight vector length " + std::to_string(omega.size()) + " vs " + std::to_string(n) +
              " samples");
  require(per_sample.grad_logits.rows() == n, ErrorKind::ShapeMismatch,
          "per-sample gradient rows do not match values");
  double denom = static_cast<double>(n);
  if (normalization == WeightNormalization::WeightSum) {
    denom = 0.0;
    for (double w : omega) denom += w;
  }
  ReducedLoss out{0.0, Matrix(n, per_sample.grad_logits.cols())};
  if (n == 0 || denom == 0.0) return out;

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += omega[i] * per_sample.values[i];
  out.value = total / denom;
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = per_sample.grad_logits.row(i);
    auto dst = out.grad_logits.row(i);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = omega[i] * src[c] / denom;
  }
  return out;
}

ReducedLoss reduce_mean(const PerSampleLoss& per_sample) {
  const std::size_t n = per_sample.values.size();
  ReducedLoss out{0.0, Matrix(n, per_sample.grad_logits.cols())};
  if (n == 0) return out;
  const auto denom = static_cast<double>(n);
  double total = 0.0;
  for (double v : per_sample.values) total += v;
  out.value = total / denom;
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = per_sample.grad_logits.row(i);
    auto dst = out.grad_logits.row(i);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / denom;
  }
  return out;
}

}  // namespace filterloss
