#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "filterloss/losses.hpp"
#include "filterloss/model.hpp"
#include "oracles/oracles.hpp"

namespace testing {

struct GradCheckCase {
  filterloss::ModelParams params;
  filterloss::Matrix x;
  std::vector<filterloss::ClassId> y;
  std::vector<double> omega;
  filterloss::LossSpec loss;
};

inline GradCheckCase random_gradcheck_case(std::mt19937_64& rng, filterloss::LossFamily family) {
  using namespace filterloss;
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };

  ModelSpec spec;
  spec.input_dim = pick(5, 9);
  spec.num_classes = pick(2, 5);
  spec.hidden.clear();
  const std::size_t depth = pick(0, 2);
  const std::size_t width = pick(3, 7);
  for (std::size_t h = 0; h < depth; ++h) spec.hidden.push_back(rng() % 3 ? width : pick(2, 6));
  spec.residual = rng() % 2 == 0;
  spec.conv_stem = rng() % 3 == 0;
  spec.conv_channels = pick(1, 3);
  spec.init_seed = rng();

  GradCheckCase out{init_model(spec), Matrix(pick(2, 6), spec.input_dim), {}, {}, {}};
  // nonzero biases so kinks do not line up with the origin
  for (auto& g : out.params.groups) {
    for (double& b : g.bias) b = uni(-0.3, 0.3);
    g.trainable = rng() % 2 == 0;
  }
  for (double& v : out.x.values()) v = uni(-1.5, 1.5);
  for (std::size_t i = 0; i < out.x.rows(); ++i) {
    out.y.push_back(static_cast<ClassId>(rng() % spec.num_classes));
    out.omega.push_back(rng() % 4 == 0 ? 0.0 : uni(0.1, 1.0));
  }
  out.loss.family = family;
  out.loss.gamma = uni(0.0, 3.0);
  out.loss.epsilon = uni(0.0, 0.3);
  return out;
}

struct Probe {
  double loss = 0.0;
  std::vector<bool> active;  // ReLU pattern of every non-output group
};

inline Probe probe_loss(const GradCheckCase& c, const filterloss::ModelParams& params) {
  using namespace filterloss;
  const auto fwd = forward(params, c.x);
  Probe out{reduce_weighted(per_sample_loss(c.loss, fwd.logits, c.y), c.omega).value, {}};
  for (std::size_t g = 0; g + 1 < fwd.cache.pre.size(); ++g) {
    for (double v : fwd.cache.pre[g].values()) out.active.push_back(v > 0.0);
  }
  return out;
}

struct GradCheckResult {
  double rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // perturbations that crossed a ReLU boundary; skipped
};

// Norm-wise relative error between the backward pass and central differences
// over every parameter, frozen groups included. Differences across a ReLU
// kink are meaningless, so those coordinates are left out and counted.
inline GradCheckResult gradcheck(const GradCheckCase& c, double h = 1e-5) {
  using namespace filterloss;
  const auto fwd = forward(c.params, c.x);
  const auto per = per_sample_loss(c.loss, fwd.logits, c.y);
  const auto reduced = reduce_weighted(per, c.omega);
  const auto grads = backward(c.params, fwd.cache, reduced.grad_logits);

  ModelParams probe = c.params;
  GradCheckResult out;
  double diff = 0.0, an = 0.0, nn = 0.0;
  auto check = [&](double& slot, double analytic) {
    const double keep = slot;
    slot = keep + h;
    const Probe up = probe_loss(c, probe);
    slot = keep - h;
    const Probe down = probe_loss(c, probe);
    slot = keep;
    if (up.active != down.active) {
      ++out.kinks;
      return;
    }
    ++out.checked;
    const double numeric = (up.loss - down.loss) / (2.0 * h);
    diff += (analytic - numeric) * (analytic - numeric);
    an += analytic * analytic;
    nn += numeric * numeric;
  };
  for (std::size_t g = 0; g < probe.groups.size(); ++g) {
    auto w = probe.groups[g].weight.values();
    const auto gw = grads.groups[g].weight.values();
    for (std::size_t k = 0; k < w.size(); ++k) check(w[k], gw[k]);
    auto& b = probe.groups[g].bias;
    for (std::size_t k = 0; k < b.size(); ++k) check(b[k], grads.groups[g].bias[k]);
  }
  out.rel_err = std::sqrt(diff) / std::max(std::sqrt(std::max(an, nn)), 1e-10);
  return out;
}

}  // namespace testing
