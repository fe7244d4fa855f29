#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "filterloss/dataset.hpp"
#include "filterloss/matrix.hpp"
#include "filterloss/weight_filter.hpp"

namespace filterloss {

enum class LossFamily {
  CrossEntropy,      // ce
  LabelSmooth,       // label_smooth
  Focal,             // focal, probability route
  FocalLogits,       // focal_logits, log-softmax route
  LabelSmoothFocal,  // ls_focal
};

std::string_view loss_family_name(LossFamily family) noexcept;
LossFamily parse_loss_family(std::string_view name);

struct LossSpec {
  LossFamily family = LossFamily::CrossEntropy;
  double gamma = 2.0;    // focal exponent
  double epsilon = 0.1;  // smoothing mass spread uniformly over all classes
  // Lower clamp on probabilities inside logarithms on the probability route.
  double prob_floor = std::numeric_limits<double>::min();

  void validate() const;
};

struct PerSampleLoss {
  std::vector<double> values;  // one per row, >= 0
  Matrix grad_logits;          // d loss_i / d logits_i, n x C
};

/// With p = softmax(z) and q = (1 - eps) onehot(y) + eps / C:
///   ce            -log p_y
///   label_smooth  -sum_c q_c log p_c
///   focal         -(1 - p_y)^gamma log p_y
///   focal_logits  same value, log p from z - logsumexp(z)
///   ls_focal      -sum_c q_c (1 - p_c)^gamma log p_c
/// Throws NonFinite for NaN/Inf logits, InvalidArgument for bad labels.
PerSampleLoss per_sample_loss(const LossSpec& spec, const Matrix& logits,
                              std::span<const ClassId> labels);

enum class WeightNormalization {
  SampleCount,  // divide by N (the weighted loss as defined)
  WeightSum,    // divide by sum(omega); 0 when that sum is 0
};

struct ReducedLoss {
  double value = 0.0;
  Matrix grad_logits;  // (omega_i / N) d loss_i / d logits_i
};

/// L = (1/N) sum_i omega_i loss_i.
ReducedLoss reduce_weighted(const PerSampleLoss& per_sample, std::span<const double> omega,
                            WeightNormalization normalization = WeightNormalization::SampleCount);

/// Unweighted mean, bit-identical to reduce_weighted with omega == 1.
ReducedLoss reduce_mean(const PerSampleLoss& per_sample);

}  // namespace filterloss
