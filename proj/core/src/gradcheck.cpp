#include "tabkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tabkit::ad {

double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                  double h) {
  std::vector<std::vector<double>> analytic;
  {
    for (Tensor& t : inputs) {
      t.zero_grad();
    }
    Tensor loss = f();
    backward(loss);
    for (const Tensor& t : inputs) {
      analytic.push_back(t.has_grad()
                             ? t.grad()
                             : std::vector<double>(t.size(), 0.0));
    }
  }
  double max_rel = 0.0;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + h;
      const double fp = f().value();
      t.data()[i] = saved - h;
      const double fm = f().value();
      t.data()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[ti][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace tabkit::ad
