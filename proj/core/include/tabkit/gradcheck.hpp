#pragma once

#include <functional>
#include <vector>

#include "tabkit/tensor.hpp"

namespace tabkit::ad {

// Central-difference check of the reverse-mode gradients of a scalar
// function. `f` must rebuild its forward pass from the current data of
// `inputs` on every call (re-seed any rng it uses); each input must have
// requires_grad set. Returns the max relative error over all coordinates,
// with denominator max(|analytic|, |numeric|, 1e-8).
//
// Inputs sitting exactly on relu/sparsemax kinks give one-sided
// derivatives; nudge test points away from them.
double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                  double h = 1e-5);

}  // namespace tabkit::ad
