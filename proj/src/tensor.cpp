#include "ldt/tensor.hpp"

#include <cmath>

namespace ldt {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), ErrorKind::Shape, op, ": shape mismatch ",
            a.shape().str(), " vs ", b.shape().str());
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.shape());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] - pb[i];
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out(a.shape());
    const float* pa = a.data();
    float* po = out.data();
    for (int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * s;
    return out;
}

bool all_finite(const Tensor& t) {
    for (float v : t.values()) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

bool all_in_range(const Tensor& t, float lo, float hi) {
    for (float v : t.values()) {
        if (!(v >= lo && v <= hi)) return false;
    }
    return true;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    require(sa.b == sb.b && sa.h == sb.h && sa.w == sb.w, ErrorKind::Shape,
            "concat_channels: spatial mismatch ", sa.str(), " vs ", sb.str());
    Tensor out(Shape{sa.b, sa.h, sa.w, sa.c + sb.c});
    for (int64_t ib = 0; ib < sa.b; ++ib) {
        for (int64_t ih = 0; ih < sa.h; ++ih) {
            for (int64_t iw = 0; iw < sa.w; ++iw) {
                float* dst = out.pixel(ib, ih, iw);
                const float* pa = a.pixel(ib, ih, iw);
                for (int64_t ic = 0; ic < sa.c; ++ic) dst[ic] = pa[ic];
                const float* pb = b.pixel(ib, ih, iw);
                for (int64_t ic = 0; ic < sb.c; ++ic) dst[sa.c + ic] = pb[ic];
            }
        }
    }
    return out;
}

Tensor slice_channels(const Tensor& t, int64_t begin, int64_t count) {
    const Shape& s = t.shape();
    require(begin >= 0 && count >= 0 && begin + count <= s.c, ErrorKind::Shape,
            "slice_channels: range [", begin, ",", begin + count,
            ") out of bounds for ", s.str());
    Tensor out(Shape{s.b, s.h, s.w, count});
    for (int64_t ib = 0; ib < s.b; ++ib) {
        for (int64_t ih = 0; ih < s.h; ++ih) {
            for (int64_t iw = 0; iw < s.w; ++iw) {
                const float* src = t.pixel(ib, ih, iw) + begin;
                float* dst = out.pixel(ib, ih, iw);
                for (int64_t ic = 0; ic < count; ++ic) dst[ic] = src[ic];
            }
        }
    }
    return out;
}

}  // namespace ldt
