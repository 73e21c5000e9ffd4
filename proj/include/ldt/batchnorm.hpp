#pragma once

#include <vector>

#include "ldt/tensor.hpp"

namespace ldt {

enum class Mode { Train, Eval };

struct BatchNormParams {
    std::vector<float> gamma;
    std::vector<float> beta_shift;
    std::vector<float> running_mean;
    std::vector<float> running_var;
    float epsilon = 1e-5f;
    float momentum = 0.9f;  // running = momentum*running + (1-momentum)*batch

    static BatchNormParams identity(int64_t channels);
    int64_t channels() const { return static_cast<int64_t>(gamma.size()); }
};

// Everything the backward pass needs from a train-mode forward call.
struct BatchNormCache {
    Tensor normalized;             // (x - mean) * invstd
    std::vector<float> inv_std;    // per channel
    std::vector<float> gamma;      // snapshot taken at forward time
    bool train_mode = false;
};

struct BatchNormGrads {
    Tensor input;
    std::vector<float> gamma;
    std::vector<float> beta_shift;
};

// Train mode normalizes with per-channel batch statistics (computed over
// batch*height*width, accumulated in 64-bit) and updates the running
// statistics in place. Eval mode uses the running statistics and leaves
// params untouched. Train mode requires batch*height*width > 1.
Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params,
                         Mode mode, BatchNormCache* cache);

// Exact reverse-mode derivatives of the train-mode forward. Rejects a cache
// produced in eval mode.
BatchNormGrads batchnorm_backward(const BatchNormCache& cache,
                                  const Tensor& upstream_grad);

}  // namespace ldt
