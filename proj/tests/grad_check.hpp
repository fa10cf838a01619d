#pragma once

// Central-difference gradient checking shared by the unit tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "aeig/layers.hpp"
#include "aeig/tensor.hpp"

namespace testing {

using aeig::ad::Tensor;

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0,
                                         double hi = 1.0) {
  aeig::nn::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline Tensor random_parameter(aeig::ad::Shape shape, std::uint64_t seed) {
  const auto n = aeig::ad::numel(shape);
  return Tensor::parameter(std::move(shape), random_values(n, seed));
}

// Largest relative error between autodiff and central differences over
// every entry of every tensor in `params`. `loss` must rebuild the graph
// from the current parameter values.
inline double max_grad_error(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                             double step = 1e-5) {
  for (auto& p : params) p.zero_grad();
  {
    aeig::ad::Graph g;
    aeig::ad::GraphScope scope(g);
    aeig::ad::backward(loss());
  }
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    double scale = 0.0;
    for (double a : analytic) scale = std::max(scale, std::abs(a));
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = loss().item();
      data[i] = saved - step;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3 * scale, 1e-8});
      worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
    }
  }
  return worst;
}

}  // namespace testing
