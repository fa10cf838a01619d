#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aeig/tensor.hpp"

namespace aeig::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

// One bias-corrected Adam update of every tensor in `params` from its grad
// buffer. Moments are created on the first call. A parameter without a
// gradient buffer is a ContractError.
void adam_step(std::span<ad::Tensor> params, AdamState& state);

}  // namespace aeig::nn
