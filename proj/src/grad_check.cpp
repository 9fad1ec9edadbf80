#include "hlpnn/grad_check.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hlpnn {

double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& fn,
                  std::vector<Tensor>& inputs, double eps) {
  for (Tensor& t : inputs) {
    if (!t.requires_grad())
      throw std::invalid_argument("grad_check: all inputs must require gradients");
    t.zero_grad();
  }
  Tensor loss = fn(inputs);
  if (loss.size() != 1) throw std::invalid_argument("grad_check: function is not scalar-valued");
  backward(loss);

  double worst = 0.0;
  for (Tensor& t : inputs) {
    const std::vector<double> analytic = t.grad();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t.data()[i];
      t.data()[i] = orig + eps;
      const double up = fn(inputs).item();
      t.data()[i] = orig - eps;
      const double down = fn(inputs).item();
      t.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      if (std::isnan(a) || std::isnan(numeric))
        return std::numeric_limits<double>::infinity();
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace hlpnn
