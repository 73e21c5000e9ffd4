#include "ldt/activation.hpp"

namespace ldt {

Tensor brelu_forward(const Tensor& input) {
    Tensor out(input.shape());
    const float* pi = input.data();
    float* po = out.data();
    for (int64_t i = 0; i < input.size(); ++i) {
        float v = pi[i];
        po[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
    return out;
}

Tensor brelu_backward(const Tensor& input, const Tensor& upstream_grad) {
    check_same_shape(input, upstream_grad, "brelu_backward");
    Tensor out(input.shape());
    const float* pi = input.data();
    const float* pg = upstream_grad.data();
    float* po = out.data();
    for (int64_t i = 0; i < input.size(); ++i) {
        const float v = pi[i];
        po[i] = (v > 0.0f && v < 1.0f) ? pg[i] : 0.0f;
    }
    return out;
}

}  // namespace ldt
