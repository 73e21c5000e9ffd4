#include "ldt/conv.hpp"

#include <algorithm>

#include "ldt/parallel.hpp"

namespace ldt {

namespace {

void check_conv_args(const Tensor& input, const ConvLayerParams& params,
                     int64_t zero_pad) {
    const Shape& in = input.shape();
    const Shape& k = params.kernel.shape();
    require(zero_pad >= 0, ErrorKind::Domain, "conv2d: negative padding ", zero_pad);
    require(k.b >= 1 && k.h >= 1 && k.w >= 1 && k.c >= 1, ErrorKind::Shape,
            "conv2d: degenerate kernel shape ", k.str());
    require(in.c == k.c, ErrorKind::Shape, "conv2d: input shape ", in.str(),
            " has ", in.c, " channels but kernel shape ", k.str(), " expects ", k.c);
    require(static_cast<int64_t>(params.bias.size()) == k.b, ErrorKind::Shape,
            "conv2d: bias length ", params.bias.size(), " != out channels ", k.b);
    require(in.h + 2 * zero_pad >= k.h && in.w + 2 * zero_pad >= k.w,
            ErrorKind::Shape, "conv2d: kernel ", k.str(),
            " larger than padded input ", in.str(), " (pad ", zero_pad, ")");
}

// Kernel repacked so the axis named last is contiguous; the public layout
// (oc, ky, kx, ic) is kept for parameters and gradients only.
std::vector<float> pack_oc_last(const Tensor& kernel) {
    const Shape& k = kernel.shape();  // (oc, ky, kx, ic)
    std::vector<float> packed(static_cast<size_t>(k.count()));
    for (int64_t oc = 0; oc < k.b; ++oc)
        for (int64_t ky = 0; ky < k.h; ++ky)
            for (int64_t kx = 0; kx < k.w; ++kx)
                for (int64_t ic = 0; ic < k.c; ++ic)
                    packed[static_cast<size_t>((((ky * k.w + kx) * k.c + ic) * k.b) + oc)] =
                        kernel.at(oc, ky, kx, ic);
    return packed;
}

std::vector<float> pack_ic_last(const Tensor& kernel) {
    const Shape& k = kernel.shape();
    std::vector<float> packed(static_cast<size_t>(k.count()));
    for (int64_t oc = 0; oc < k.b; ++oc)
        for (int64_t ky = 0; ky < k.h; ++ky)
            for (int64_t kx = 0; kx < k.w; ++kx)
                for (int64_t ic = 0; ic < k.c; ++ic)
                    packed[static_cast<size_t>((((ky * k.w + kx) * k.b + oc) * k.c) + ic)] =
                        kernel.at(oc, ky, kx, ic);
    return packed;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params,
                      int64_t zero_pad) {
    check_conv_args(input, params, zero_pad);
    const Shape& in = input.shape();
    const Shape& k = params.kernel.shape();
    const int64_t oh = in.h + 2 * zero_pad - k.h + 1;
    const int64_t ow = in.w + 2 * zero_pad - k.w + 1;
    const int64_t oc_n = k.b, ic_n = k.c;

    Tensor out(Shape{in.b, oh, ow, oc_n});
    const std::vector<float> packed = pack_oc_last(params.kernel);

    parallel_for(in.b * oh, [&](int64_t row) {
        const int64_t b = row / oh;
        const int64_t oy = row % oh;
        std::vector<float> acc(static_cast<size_t>(oc_n));
        const int64_t ky_lo = std::max<int64_t>(0, zero_pad - oy);
        const int64_t ky_hi = std::min(k.h, in.h + zero_pad - oy);
        for (int64_t ox = 0; ox < ow; ++ox) {
            std::copy(params.bias.begin(), params.bias.end(), acc.begin());
            const int64_t kx_lo = std::max<int64_t>(0, zero_pad - ox);
            const int64_t kx_hi = std::min(k.w, in.w + zero_pad - ox);
            for (int64_t ky = ky_lo; ky < ky_hi; ++ky) {
                const int64_t iy = oy + ky - zero_pad;
                for (int64_t kx = kx_lo; kx < kx_hi; ++kx) {
                    const int64_t ix = ox + kx - zero_pad;
                    const float* px = input.pixel(b, iy, ix);
                    const float* kk =
                        packed.data() + ((ky * k.w + kx) * ic_n) * oc_n;
                    for (int64_t ic = 0; ic < ic_n; ++ic) {
                        const float v = px[ic];
                        const float* krow = kk + ic * oc_n;
                        float* pa = acc.data();
                        for (int64_t oc = 0; oc < oc_n; ++oc) pa[oc] += v * krow[oc];
                    }
                }
            }
            std::copy(acc.begin(), acc.end(), out.pixel(b, oy, ox));
        }
    });
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvLayerParams& params,
                          const Tensor& upstream_grad, int64_t zero_pad) {
    check_conv_args(input, params, zero_pad);
    const Shape& in = input.shape();
    const Shape& k = params.kernel.shape();
    const int64_t oh = in.h + 2 * zero_pad - k.h + 1;
    const int64_t ow = in.w + 2 * zero_pad - k.w + 1;
    const Shape expected{in.b, oh, ow, k.b};
    require(upstream_grad.shape() == expected, ErrorKind::Shape,
            "conv2d_backward: upstream shape ", upstream_grad.shape().str(),
            " != forward output shape ", expected.str());

    const int64_t oc_n = k.b, ic_n = k.c;

    ConvGrads grads;
    grads.kernel = Tensor(k);
    grads.bias.assign(static_cast<size_t>(oc_n), 0.0f);
    grads.input = Tensor(in);

    // Bias: plain sum of the upstream gradient per output channel.
    {
        std::vector<double> acc(static_cast<size_t>(oc_n), 0.0);
        const float* pg = upstream_grad.data();
        const int64_t pixels = in.b * oh * ow;
        for (int64_t p = 0; p < pixels; ++p) {
            const float* row = pg + p * oc_n;
            for (int64_t oc = 0; oc < oc_n; ++oc) acc[static_cast<size_t>(oc)] += row[oc];
        }
        for (int64_t oc = 0; oc < oc_n; ++oc)
            grads.bias[static_cast<size_t>(oc)] = static_cast<float>(acc[static_cast<size_t>(oc)]);
    }

    // Kernel gradient, accumulated in the oc-contiguous packed layout.
    // Serial on purpose: one shared accumulator, fixed iteration order.
    {
        std::vector<float> gk(static_cast<size_t>(k.count()), 0.0f);
        for (int64_t b = 0; b < in.b; ++b) {
            for (int64_t oy = 0; oy < oh; ++oy) {
                const int64_t ky_lo = std::max<int64_t>(0, zero_pad - oy);
                const int64_t ky_hi = std::min(k.h, in.h + zero_pad - oy);
                for (int64_t ox = 0; ox < ow; ++ox) {
                    const int64_t kx_lo = std::max<int64_t>(0, zero_pad - ox);
                    const int64_t kx_hi = std::min(k.w, in.w + zero_pad - ox);
                    const float* up = upstream_grad.pixel(b, oy, ox);
                    for (int64_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const int64_t iy = oy + ky - zero_pad;
                        for (int64_t kx = kx_lo; kx < kx_hi; ++kx) {
                            const int64_t ix = ox + kx - zero_pad;
                            const float* px = input.pixel(b, iy, ix);
                            float* gkk = gk.data() + ((ky * k.w + kx) * ic_n) * oc_n;
                            for (int64_t ic = 0; ic < ic_n; ++ic) {
                                const float v = px[ic];
                                float* grow = gkk + ic * oc_n;
                                for (int64_t oc = 0; oc < oc_n; ++oc)
                                    grow[oc] += v * up[oc];
                            }
                        }
                    }
                }
            }
        }
        for (int64_t oc = 0; oc < oc_n; ++oc)
            for (int64_t ky = 0; ky < k.h; ++ky)
                for (int64_t kx = 0; kx < k.w; ++kx)
                    for (int64_t ic = 0; ic < ic_n; ++ic)
                        grads.kernel.at(oc, ky, kx, ic) =
                            gk[static_cast<size_t>((((ky * k.w + kx) * ic_n + ic) * oc_n) + oc)];
    }

    // Input gradient: correlate upstream with the kernel flipped in effect by
    // indexing oy = iy - ky + pad.
    {
        const std::vector<float> packed = pack_ic_last(params.kernel);
        parallel_for(in.b * in.h, [&](int64_t row) {
            const int64_t b = row / in.h;
            const int64_t iy = row % in.h;
            std::vector<float> acc(static_cast<size_t>(ic_n));
            for (int64_t ix = 0; ix < in.w; ++ix) {
                std::fill(acc.begin(), acc.end(), 0.0f);
                for (int64_t ky = 0; ky < k.h; ++ky) {
                    const int64_t oy = iy - ky + zero_pad;
                    if (oy < 0 || oy >= oh) continue;
                    for (int64_t kx = 0; kx < k.w; ++kx) {
                        const int64_t ox = ix - kx + zero_pad;
                        if (ox < 0 || ox >= ow) continue;
                        const float* up = upstream_grad.pixel(b, oy, ox);
                        const float* kk = packed.data() + ((ky * k.w + kx) * oc_n) * ic_n;
                        for (int64_t oc = 0; oc < oc_n; ++oc) {
                            const float v = up[oc];
                            const float* krow = kk + oc * ic_n;
                            float* pa = acc.data();
                            for (int64_t ic = 0; ic < ic_n; ++ic) pa[ic] += v * krow[ic];
                        }
                    }
                }
                std::copy(acc.begin(), acc.end(), grads.input.pixel(b, iy, ix));
            }
        });
    }

    return grads;
}

}  // namespace ldt
