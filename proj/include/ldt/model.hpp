#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldt/batchnorm.hpp"
#include "ldt/conv.hpp"
#include "ldt/tensor.hpp"

namespace ldt {

// Fixed topology: three cascaded convolutional stages. The two shared 3x3
// layers emit 30 and 40 feature maps; the RGB input is re-concatenated after
// each shared stage (and so also feeds the heads), giving 33- and 43-channel
// stage inputs. Both heads are 1x1: 3-channel dehazed output, 1-channel
// transmission estimate. Every activation is BReLU; batch norm sits between
// the shared convolutions and their activations; the heads have none.
namespace arch {
inline constexpr int64_t kInputChannels = 3;
inline constexpr int64_t kLayer1Out = 30;
inline constexpr int64_t kLayer2In = kLayer1Out + kInputChannels;  // 33
inline constexpr int64_t kLayer2Out = 40;
inline constexpr int64_t kHeadIn = kLayer2Out + kInputChannels;  // 43
inline constexpr int64_t kDehazeOut = 3;
inline constexpr int64_t kTransOut = 1;
inline constexpr int64_t kSharedKernel = 3;
inline constexpr int64_t kSharedPad = 1;
}  // namespace arch

struct LdtNetParams {
    ConvLayerParams conv1;
    BatchNormParams bn1;
    ConvLayerParams conv2;
    BatchNormParams bn2;
    ConvLayerParams head_dehaze;
    ConvLayerParams head_trans;

    // Throws ErrorKind::Shape unless every block matches the fixed topology.
    void validate() const;
};

// He-style initialization: kernel entries are zero-mean with variance
// 2/fanIn, biases and batch-norm shifts 0, gammas 1, running stats (0,1).
// Bit-identical for a fixed seed.
LdtNetParams init_params(uint64_t seed);

struct LossWeights {
    double alpha = 0.4;  // weight of the transmission task in [0,1]
};

struct ForwardTrace {
    Mode mode = Mode::Eval;
    Tensor input;
    Tensor bn1_out;  // pre-activation of stage 1
    BatchNormCache bn1_cache;
    Tensor concat1;  // stage-1 features + RGB (33 channels)
    Tensor bn2_out;
    BatchNormCache bn2_cache;
    Tensor concat2;  // stage-2 features + RGB (43 channels)
    Tensor head_dehaze_pre;
    Tensor head_trans_pre;
    Tensor dehazed;        // (B,H,W,3) in [0,1]
    Tensor transmission;   // (B,H,W,1) in [0,1]
};

// hazy must be 3-channel with values in [0,1]. Train mode records batch-norm
// caches for backward and updates running statistics in params.
ForwardTrace forward(LdtNetParams& params, const Tensor& hazy, Mode mode);

struct LossValues {
    double total = 0.0;
    double dehaze = 0.0;        // mean squared error of the dehazing head
    double transmission = 0.0;  // mean squared error of the transmission head
};

// total = (1-alpha)*dehaze + alpha*transmission; each term is the mean
// squared pixel-wise error over its own head's values.
LossValues loss(const ForwardTrace& trace, const Tensor& clear_truth,
                const Tensor& trans_truth, const LossWeights& w);

// Gradients congruent to the learnable parameters.
struct LdtNetGrads {
    Tensor conv1_kernel;
    std::vector<float> conv1_bias;
    std::vector<float> bn1_gamma;
    std::vector<float> bn1_shift;
    Tensor conv2_kernel;
    std::vector<float> conv2_bias;
    std::vector<float> bn2_gamma;
    std::vector<float> bn2_shift;
    Tensor head_dehaze_kernel;
    std::vector<float> head_dehaze_bias;
    Tensor head_trans_kernel;
    std::vector<float> head_trans_bias;
};

// Exact gradients of the total loss. Requires a train-mode trace.
LdtNetGrads backward(const ForwardTrace& trace, const Tensor& clear_truth,
                     const Tensor& trans_truth, const LossWeights& w,
                     const LdtNetParams& params);

// Uniform view over parameter/gradient storage, in declaration order.
// Learnable blocks only; running statistics are serialized state, not
// optimizer targets.
struct BlockView {
    std::string name;
    float* data = nullptr;
    int64_t size = 0;
};
struct ConstBlockView {
    std::string name;
    const float* data = nullptr;
    int64_t size = 0;
};

std::vector<BlockView> learnable_blocks(LdtNetParams& params);
std::vector<ConstBlockView> learnable_blocks(const LdtNetGrads& grads);

}  // namespace ldt
