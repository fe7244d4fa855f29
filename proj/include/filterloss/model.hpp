#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "filterloss/matrix.hpp"

namespace filterloss {

inline constexpr std::size_t kConvKernel = 5;
inline constexpr std::size_t kConvStride = 2;

struct ModelSpec {
  std::size_t input_dim = 1;
  std::size_t num_classes = 2;
  std::vector<std::size_t> hidden{64, 64};
  bool residual = true;  // identity skip around hidden blocks whose width is unchanged
  // Optional 1-D convolution over the feature vector (single input channel,
  // kernel 5, stride 2, ReLU), flattened channel-major before the hidden blocks.
  bool conv_stem = false;
  std::size_t conv_channels = 4;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t conv_length() const;  // output positions of the stem
  std::size_t trunk_input_dim() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// One layer. Dense weights are stored input x output; the conv stem stores
/// kernel x channels.
struct ParamGroup {
  std::string name;
  Matrix weight;
  std::vector<double> bias;
  bool trainable = true;

  friend bool operator==(const ParamGroup&, const ParamGroup&) = default;
};

struct ModelParams {
  ModelSpec spec;
  std::vector<ParamGroup> groups;  // [conv], hidden0..hiddenN, output

  const ParamGroup& group(std::string_view name) const;
  std::vector<bool> trainable_flags() const;
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct GroupGradient {
  Matrix weight;
  std::vector<double> bias;
};

struct Gradients {
  std::vector<GroupGradient> groups;
};

/// Seeded uniform weights in +-sqrt(2 / fan_in), zero biases, all trainable.
ModelParams init_model(const ModelSpec& spec);

/// Fresh output layer for `num_classes` classes.
void reinitialize_head(ModelParams& params, std::size_t num_classes, std::uint64_t seed);

struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each group
  std::vector<Matrix> pre;     // pre-activation of each group
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

ForwardResult forward(const ModelParams& params, const Matrix& features);
Matrix predict_logits(const ModelParams& params, const Matrix& features);

/// Chain rule from d loss / d logits back to every group, frozen ones included.
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& grad_logits);

/// Trainable groups move by -learning_rate * grad; frozen groups are left
/// untouched. Throws NonFinite (before touching anything) on a bad gradient.
void sgd_step(ModelParams& params, const Gradients& grads, double learning_rate);

/// Pattern forms: "*" (all), "fine_tune" (last hidden group, or the conv stem
/// when there are no hidden groups, plus the output layer), or a comma
/// separated list of group-name globs. Matched groups become trainable,
/// all others frozen. Throws InvalidArgument when nothing matches.
void set_trainable(ModelParams& params, std::string_view pattern);
void set_trainable(ModelParams& params, const std::function<bool(const ParamGroup&)>& predicate);

inline constexpr std::uint8_t kModelFormatVersion = 1;

void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace filterloss
