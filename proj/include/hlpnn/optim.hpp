#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hlpnn/tensor.hpp"

namespace hlpnn {

// Named trainable parameters, iterated in deterministic (lexicographic) order.
using ParameterMap = std::map<std::string, Tensor>;

struct AdamState {
  struct Slot {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
  };
  std::map<std::string, Slot> slots;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One Adam update with bias correction over every parameter. Gradients must
// be populated; throws otherwise.
void adam_step(ParameterMap& params, AdamState& state, double lr);

// Elementwise clamp of all parameter gradients to [lo, hi].
void clip_gradients(ParameterMap& params, double lo = -1.0, double hi = 1.0);
void clip_gradients(std::vector<double>& grad, double lo = -1.0, double hi = 1.0);

void zero_grad(ParameterMap& params);

}  // namespace hlpnn
