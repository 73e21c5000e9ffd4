#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ldt/error.hpp"

namespace ldt {

// Axis order is (batch, height, width, channel) everywhere in this codebase,
// with channel fastest-varying in memory:
//   index(b,h,w,c) = ((b*H + h)*W + w)*C + c
struct Shape {
    int64_t b = 0;
    int64_t h = 0;
    int64_t w = 0;
    int64_t c = 0;

    int64_t count() const { return b * h * w * c; }

    bool operator==(const Shape&) const = default;

    std::string str() const {
        return concat("(", b, ",", h, ",", w, ",", c, ")");
    }
};

// Dense 4-axis float32 tensor with value semantics. This is the universal
// currency of the numerics core; images are (1,H,W,3), maps are (1,H,W,1).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape s) : shape_(s) {
        require(s.b >= 0 && s.h >= 0 && s.w >= 0 && s.c >= 0, ErrorKind::Shape,
                "tensor extents must be non-negative, got ", s.str());
        data_.assign(static_cast<size_t>(s.count()), 0.0f);
    }

    Tensor(Shape s, std::vector<float> values) : shape_(s), data_(std::move(values)) {
        require(static_cast<int64_t>(data_.size()) == s.count(), ErrorKind::Shape,
                "data length ", data_.size(), " does not match shape ", s.str());
    }

    static Tensor full(Shape s, float value) {
        Tensor t(s);
        for (auto& v : t.data_) v = value;
        return t;
    }

    const Shape& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float& at(int64_t b, int64_t h, int64_t w, int64_t c) {
        return data_[static_cast<size_t>(index(b, h, w, c))];
    }
    float at(int64_t b, int64_t h, int64_t w, int64_t c) const {
        return data_[static_cast<size_t>(index(b, h, w, c))];
    }

    int64_t index(int64_t b, int64_t h, int64_t w, int64_t c) const {
        return ((b * shape_.h + h) * shape_.w + w) * shape_.c + c;
    }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    // Pointer to the channel vector at (b,h,w); channels are contiguous.
    float* pixel(int64_t b, int64_t h, int64_t w) {
        return data_.data() + index(b, h, w, 0);
    }
    const float* pixel(int64_t b, int64_t h, int64_t w) const {
        return data_.data() + index(b, h, w, 0);
    }

private:
    Shape shape_;
    std::vector<float> data_;
};

// --- elementwise helpers -------------------------------------------------

void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

// True when every value is finite.
bool all_finite(const Tensor& t);

// True when every value lies in [lo, hi].
bool all_in_range(const Tensor& t, float lo, float hi);

// --- channel concatenation / slicing -------------------------------------

// Stacks b's channels after a's. Batch/height/width extents must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Copies channels [begin, begin+count) into a new tensor.
Tensor slice_channels(const Tensor& t, int64_t begin, int64_t count);

}  // namespace ldt
