#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace sme {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m, v;
  std::int64_t step = 0;
};

// Standard Adam update with bias correction, applied to a flat parameter
// vector. State is created lazily on the first call.
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                      AdamState& state, const AdamConfig& config) {
  if (state.m.size() == 0) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("optimizer state/gradient shape mismatch");
  }
  state.step += 1;
  state.m = config.beta1 * state.m + (1.0 - config.beta1) * grads;
  state.v = config.beta2 * state.v + (1.0 - config.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  params.array() -= config.lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + config.eps);
}

}  // namespace sme
