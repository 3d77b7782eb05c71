#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "atta/numerics/matrix.hpp"

namespace atta {

/// Bias-corrected Adam moments for one parameter group.
struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

namespace detail {
inline void check_group(const std::vector<Matrix*>& params, const Gradients& grads,
                        const char* what) {
  if (params.size() != grads.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(params.size()) +
                         " parameters but " + std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(*params[i], grads[i], what);
}
}  // namespace detail

inline void adam_update(const std::vector<Matrix*>& params, const Gradients& grads,
                        AdamState& state, double lr) {
  detail::check_group(params, grads, "adam_update");
  if (!(lr >= 0.0)) throw ConfigError("adam_update: learning rate must be non-negative");
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_update: optimizer state belongs to a different group");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    require_same_shape(m, grads[i], "adam_update");
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i].cwiseAbs2();
    params[i]->array() -= lr * (m.array() / correction1) /
                          ((v.array() / correction2).sqrt() + state.eps);
  }
}

/// Plain gradient step: θ ← θ − lr·g.
inline void sgd_update(const std::vector<Matrix*>& params, const Gradients& grads, double lr) {
  detail::check_group(params, grads, "sgd_update");
  if (!(lr >= 0.0)) throw ConfigError("sgd_update: learning rate must be non-negative");
  if (lr == 0.0) return;
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= lr * grads[i];
}

}  // namespace atta
