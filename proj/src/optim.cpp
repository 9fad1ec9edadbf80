#include "hlpnn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hlpnn {

void adam_step(ParameterMap& params, AdamState& state, double lr) {
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (auto& [name, p] : params) {
    if (!p.has_grad())
      throw std::logic_error("adam_step: parameter '" + name + "' has no gradient");
    auto& slot = state.slots[name];
    if (slot.first_moment.size() != p.size()) {
      slot.first_moment.assign(p.size(), 0.0);
      slot.second_moment.assign(p.size(), 0.0);
    }
    auto& val = p.data();
    const auto& g = p.grad_view();
    for (std::size_t i = 0; i < val.size(); ++i) {
      slot.first_moment[i] = state.beta1 * slot.first_moment[i] + (1.0 - state.beta1) * g[i];
      slot.second_moment[i] =
          state.beta2 * slot.second_moment[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = slot.first_moment[i] / bc1;
      const double vhat = slot.second_moment[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

void clip_gradients(std::vector<double>& grad, double lo, double hi) {
  if (lo > hi)
    throw std::invalid_argument("clip_gradients: lo " + std::to_string(lo) + " > hi " +
                                std::to_string(hi));
  for (double& g : grad) {
    if (g < lo) g = lo;
    if (g > hi) g = hi;
  }
}

void clip_gradients(ParameterMap& params, double lo, double hi) {
  if (lo > hi)
    throw std::invalid_argument("clip_gradients: lo " + std::to_string(lo) + " > hi " +
                                std::to_string(hi));
  for (auto& [name, p] : params) {
    if (!p.has_grad())
      throw std::logic_error("clip_gradients: parameter '" + name + "' has no gradient");
    clip_gradients(p.grad(), lo, hi);
  }
}

void zero_grad(ParameterMap& params) {
  for (auto& [name, p] : params) p.zero_grad();
}

}  // namespace hlpnn
