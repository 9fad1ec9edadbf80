#pragma once

#include <functional>
#include <vector>

#include "hlpnn/tensor.hpp"

namespace hlpnn {

// Compares reverse-mode gradients of a scalar-valued function against central
// finite differences. `fn` must rebuild its graph from the given inputs on
// every call. Returns the max over all input coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// NaN anywhere reports as infinity.
double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& fn,
                  std::vector<Tensor>& inputs, double eps = 1e-5);

}  // namespace hlpnn
