#pragma once

#include "ldt/tensor.hpp"

namespace ldt {

// Bilateral ReLU: clamp to [0,1]. Keeps image-valued activations inside the
// displayable range by construction.
Tensor brelu_forward(const Tensor& input);

// Gradient passes through only where 0 < input < 1 strictly; the subgradient
// at both kinks is taken to be 0.
Tensor brelu_backward(const Tensor& input, const Tensor& upstream_grad);

}  // namespace ldt
