#include "aeig/adam.hpp"

#include <cmath>
#include <string>

#include "aeig/errors.hpp"

namespace aeig::nn {

void adam_step(std::span<ad::Tensor> params, AdamState& state) {
  for (std::size_t p = 0; p < params.size(); ++p)
    if (!params[p].requires_grad() || params[p].grad().size() != params[p].size())
      throw ContractError("adam_step: parameter " + std::to_string(p) + " has no gradient");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ContractError("adam_step: parameter list changed between steps");

  const AdamConfig& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto x = params[p].mutable_data();
    auto g = params[p].grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      x[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace aeig::nn
