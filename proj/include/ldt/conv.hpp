#pragma once

#include <vector>

#include "ldt/tensor.hpp"

namespace ldt {

// One convolutional layer's learnable parameters. The kernel tensor is laid
// out (outChannels, kH, kW, inChannels); compute kernels repack it
// internally for vectorization, but this declaration order is the public
// contract (serialization, gradients, optimizer state all follow it).
struct ConvLayerParams {
    Tensor kernel;
    std::vector<float> bias;

    int64_t out_channels() const { return kernel.shape().b; }
    int64_t kernel_h() const { return kernel.shape().h; }
    int64_t kernel_w() const { return kernel.shape().w; }
    int64_t in_channels() const { return kernel.shape().c; }
};

struct ConvGrads {
    Tensor input;       // d loss / d input
    Tensor kernel;      // d loss / d kernel, same layout as ConvLayerParams::kernel
    std::vector<float> bias;
};

// Direct 2-D convolution, stride 1, symmetric zero padding `zero_pad`.
// Output spatial extents are H + 2*pad - kH + 1 (ditto width); with
// pad = (k-1)/2 and odd k they equal the input extents.
Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params,
                      int64_t zero_pad);

// Exact reverse-mode gradients of conv2d_forward.
ConvGrads conv2d_backward(const Tensor& input, const ConvLayerParams& params,
                          const Tensor& upstream_grad, int64_t zero_pad);

}  // namespace ldt
