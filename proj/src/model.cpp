#include "ldt/model.hpp"

#include <cmath>

#include "ldt/activation.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace {

void check_conv_block(const ConvLayerParams& p, int64_t out_c, int64_t k,
                      int64_t in_c, const char* name) {
    const Shape expected{out_c, k, k, in_c};
    require(p.kernel.shape() == expected, ErrorKind::Shape, name, ": kernel shape ",
            p.kernel.shape().str(), " != required ", expected.str());
    require(static_cast<int64_t>(p.bias.size()) == out_c, ErrorKind::Shape, name,
            ": bias length ", p.bias.size(), " != ", out_c);
}

void check_bn_block(const BatchNormParams& p, int64_t c, const char* name) {
    require(p.channels() == c &&
                static_cast<int64_t>(p.beta_shift.size()) == c &&
                static_cast<int64_t>(p.running_mean.size()) == c &&
                static_cast<int64_t>(p.running_var.size()) == c,
            ErrorKind::Shape, name, ": parameter vectors must have ", c, " channels");
}

ConvLayerParams init_conv(Rng& rng, int64_t out_c, int64_t k, int64_t in_c) {
    ConvLayerParams p;
    p.kernel = Tensor(Shape{out_c, k, k, in_c});
    const double fan_in = static_cast<double>(k * k * in_c);
    const float sigma = static_cast<float>(std::sqrt(2.0 / fan_in));
    for (float& v : p.kernel.values()) v = static_cast<float>(rng.normal()) * sigma;
    p.bias.assign(static_cast<size_t>(out_c), 0.0f);
    return p;
}

}  // namespace

void LdtNetParams::validate() const {
    using namespace arch;
    check_conv_block(conv1, kLayer1Out, kSharedKernel, kInputChannels, "conv1");
    check_bn_block(bn1, kLayer1Out, "bn1");
    check_conv_block(conv2, kLayer2Out, kSharedKernel, kLayer2In, "conv2");
    check_bn_block(bn2, kLayer2Out, "bn2");
    check_conv_block(head_dehaze, kDehazeOut, 1, kHeadIn, "head_dehaze");
    check_conv_block(head_trans, kTransOut, 1, kHeadIn, "head_trans");
}

LdtNetParams init_params(uint64_t seed) {
    using namespace arch;
    Rng rng(derive_stream(seed, 0x1d7));
    LdtNetParams p;
    p.conv1 = init_conv(rng, kLayer1Out, kSharedKernel, kInputChannels);
    p.bn1 = BatchNormParams::identity(kLayer1Out);
    p.conv2 = init_conv(rng, kLayer2Out, kSharedKernel, kLayer2In);
    p.bn2 = BatchNormParams::identity(kLayer2Out);
    p.head_dehaze = init_conv(rng, kDehazeOut, 1, kHeadIn);
    p.head_trans = init_conv(rng, kTransOut, 1, kHeadIn);
    return p;
}

ForwardTrace forward(LdtNetParams& params, const Tensor& hazy, Mode mode) {
    params.validate();
    require(hazy.shape().c == arch::kInputChannels, ErrorKind::Domain,
            "forward: input must have 3 channels, got shape ", hazy.shape().str());
    require(hazy.shape().b >= 1 && hazy.shape().h >= 1 && hazy.shape().w >= 1,
            ErrorKind::Shape, "forward: empty input ", hazy.shape().str());
    require(all_in_range(hazy, 0.0f, 1.0f), ErrorKind::Domain,
            "forward: input values must lie in [0,1]");

    ForwardTrace t;
    t.mode = mode;
    t.input = hazy;

    const Tensor c1 = conv2d_forward(hazy, params.conv1, arch::kSharedPad);
    t.bn1_out = batchnorm_forward(c1, params.bn1, mode, &t.bn1_cache);
    t.concat1 = concat_channels(brelu_forward(t.bn1_out), hazy);

    const Tensor c2 = conv2d_forward(t.concat1, params.conv2, arch::kSharedPad);
    t.bn2_out = batchnorm_forward(c2, params.bn2, mode, &t.bn2_cache);
    t.concat2 = concat_channels(brelu_forward(t.bn2_out), hazy);

    t.head_dehaze_pre = conv2d_forward(t.concat2, params.head_dehaze, 0);
    t.head_trans_pre = conv2d_forward(t.concat2, params.head_trans, 0);
    t.dehazed = brelu_forward(t.head_dehaze_pre);
    t.transmission = brelu_forward(t.head_trans_pre);
    return t;
}

namespace {

double mean_squared_error_sum(const Tensor& pred, const Tensor& truth) {
    double acc = 0.0;
    const float* pp = pred.data();
    const float* pt = truth.data();
    for (int64_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pp[i]) - pt[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

void check_loss_args(const ForwardTrace& trace, const Tensor& clear_truth,
                     const Tensor& trans_truth, const LossWeights& w) {
    check_same_shape(trace.dehazed, clear_truth, "loss(dehaze)");
    check_same_shape(trace.transmission, trans_truth, "loss(transmission)");
    require(w.alpha >= 0.0 && w.alpha <= 1.0, ErrorKind::Domain,
            "loss: alpha must lie in [0,1], got ", w.alpha);
}

}  // namespace

LossValues loss(const ForwardTrace& trace, const Tensor& clear_truth,
                const Tensor& trans_truth, const LossWeights& w) {
    check_loss_args(trace, clear_truth, trans_truth, w);
    LossValues v;
    v.dehaze = mean_squared_error_sum(trace.dehazed, clear_truth);
    v.transmission = mean_squared_error_sum(trace.transmission, trans_truth);
    v.total = (1.0 - w.alpha) * v.dehaze + w.alpha * v.transmission;
    return v;
}

LdtNetGrads backward(const ForwardTrace& trace, const Tensor& clear_truth,
                     const Tensor& trans_truth, const LossWeights& w,
                     const LdtNetParams& params) {
    require(trace.mode == Mode::Train, ErrorKind::Contract,
            "backward: trace must come from a train-mode forward");
    check_loss_args(trace, clear_truth, trans_truth, w);

    // d total / d head output. The (1-alpha) and alpha factors ride along
    // here, so either head's gradients vanish identically at the extremes.
    const float wd = static_cast<float>((1.0 - w.alpha) * 2.0 /
                                        static_cast<double>(trace.dehazed.size()));
    const float wt = static_cast<float>(w.alpha * 2.0 /
                                        static_cast<double>(trace.transmission.size()));
    Tensor d_dehazed(trace.dehazed.shape());
    {
        const float* pp = trace.dehazed.data();
        const float* pt = clear_truth.data();
        float* pg = d_dehazed.data();
        for (int64_t i = 0; i < d_dehazed.size(); ++i) pg[i] = wd * (pp[i] - pt[i]);
    }
    Tensor d_trans(trace.transmission.shape());
    {
        const float* pp = trace.transmission.data();
        const float* pt = trans_truth.data();
        float* pg = d_trans.data();
        for (int64_t i = 0; i < d_trans.size(); ++i) pg[i] = wt * (pp[i] - pt[i]);
    }

    LdtNetGrads g;

    const Tensor d_pre_d = brelu_backward(trace.head_dehaze_pre, d_dehazed);
    ConvGrads gd = conv2d_backward(trace.concat2, params.head_dehaze, d_pre_d, 0);
    g.head_dehaze_kernel = std::move(gd.kernel);
    g.head_dehaze_bias = std::move(gd.bias);

    const Tensor d_pre_t = brelu_backward(trace.head_trans_pre, d_trans);
    ConvGrads gt = conv2d_backward(trace.concat2, params.head_trans, d_pre_t, 0);
    g.head_trans_kernel = std::move(gt.kernel);
    g.head_trans_bias = std::move(gt.bias);

    // Both heads feed from concat2; the RGB tail of the concatenation belongs
    // to the network input and carries no parameters.
    const Tensor d_concat2 = add(gd.input, gt.input);
    const Tensor d_feat2 = slice_channels(d_concat2, 0, arch::kLayer2Out);

    const Tensor d_bn2_out = brelu_backward(trace.bn2_out, d_feat2);
    BatchNormGrads bn2g = batchnorm_backward(trace.bn2_cache, d_bn2_out);
    g.bn2_gamma = std::move(bn2g.gamma);
    g.bn2_shift = std::move(bn2g.beta_shift);

    ConvGrads g2 = conv2d_backward(trace.concat1, params.conv2, bn2g.input,
                                   arch::kSharedPad);
    g.conv2_kernel = std::move(g2.kernel);
    g.conv2_bias = std::move(g2.bias);

    const Tensor d_feat1 = slice_channels(g2.input, 0, arch::kLayer1Out);
    const Tensor d_bn1_out = brelu_backward(trace.bn1_out, d_feat1);
    BatchNormGrads bn1g = batchnorm_backward(trace.bn1_cache, d_bn1_out);
    g.bn1_gamma = std::move(bn1g.gamma);
    g.bn1_shift = std::move(bn1g.beta_shift);

    ConvGrads g1 = conv2d_backward(trace.input, params.conv1, bn1g.input,
                                   arch::kSharedPad);
    g.conv1_kernel = std::move(g1.kernel);
    g.conv1_bias = std::move(g1.bias);

    return g;
}

std::vector<BlockView> learnable_blocks(LdtNetParams& p) {
    auto vec = [](const std::string& name, std::vector<float>& v) {
        return BlockView{name, v.data(), static_cast<int64_t>(v.size())};
    };
    auto ten = [](const std::string& name, Tensor& t) {
        return BlockView{name, t.data(), t.size()};
    };
    return {
        ten("conv1.kernel", p.conv1.kernel), vec("conv1.bias", p.conv1.bias),
        vec("bn1.gamma", p.bn1.gamma), vec("bn1.shift", p.bn1.beta_shift),
        ten("conv2.kernel", p.conv2.kernel), vec("conv2.bias", p.conv2.bias),
        vec("bn2.gamma", p.bn2.gamma), vec("bn2.shift", p.bn2.beta_shift),
        ten("head_dehaze.kernel", p.head_dehaze.kernel),
        vec("head_dehaze.bias", p.head_dehaze.bias),
        ten("head_trans.kernel", p.head_trans.kernel),
        vec("head_trans.bias", p.head_trans.bias),
    };
}

std::vector<ConstBlockView> learnable_blocks(const LdtNetGrads& g) {
    auto vec = [](const std::string& name, const std::vector<float>& v) {
        return ConstBlockView{name, v.data(), static_cast<int64_t>(v.size())};
    };
    auto ten = [](const std::string& name, const Tensor& t) {
        return ConstBlockView{name, t.data(), t.size()};
    };
    return {
        ten("conv1.kernel", g.conv1_kernel), vec("conv1.bias", g.conv1_bias),
        vec("bn1.gamma", g.bn1_gamma), vec("bn1.shift", g.bn1_shift),
        ten("conv2.kernel", g.conv2_kernel), vec("conv2.bias", g.conv2_bias),
        vec("bn2.gamma", g.bn2_gamma), vec("bn2.shift", g.bn2_shift),
        ten("head_dehaze.kernel", g.head_dehaze_kernel),
        vec("head_dehaze.bias", g.head_dehaze_bias),
        ten("head_trans.kernel", g.head_trans_kernel),
        vec("head_trans.bias", g.head_trans_bias),
    };
}

}  // namespace ldt
