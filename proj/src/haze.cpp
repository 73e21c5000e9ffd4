#include "ldt/haze.hpp"

#include <algorithm>
#include <cmath>

#include "ldt/error.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace {

void check_image3(const Tensor& image, const char* name) {
    const Shape& s = image.shape();
    require(s.b == 1 && s.c == 3, ErrorKind::Shape,
            name, " must be (1,H,W,3), got ", s.str());
    require(all_in_range(image, 0.0f, 1.0f), ErrorKind::Domain,
            name, " has values outside [0,1]");
}

void check_transmission(const Tensor& t, const Shape& image_shape) {
    const Shape& s = t.shape();
    require(s.b == 1 && s.c == 1, ErrorKind::Shape,
            "transmission must be (1,H,W,1), got ", s.str());
    require(s.h == image_shape.h && s.w == image_shape.w, ErrorKind::Shape,
            "transmission extents ", s.str(), " do not match image ",
            image_shape.str());
    for (float v : t.values())
        require(v > 0.0f && v <= 1.0f, ErrorKind::Domain,
                "transmission value ", v, " outside (0,1]");
}

float clamp01(double v) {
    return static_cast<float>(std::min(1.0, std::max(0.0, v)));
}

}  // namespace

DepthMap DepthMap::from_tensor(Tensor t) {
    const Shape& s = t.shape();
    require(s.b == 1 && s.c == 1, ErrorKind::Shape,
            "depth map must be (1,H,W,1), got ", s.str());
    for (float v : t.values())
        require(std::isfinite(v) && v >= 0.0f, ErrorKind::Domain,
                "depth value ", v, " is not a finite non-negative number");
    return DepthMap{std::move(t)};
}

void HazeParams::validate() const {
    require(std::isfinite(a) && a > 0.0 && a <= 1.0, ErrorKind::Domain,
            "atmosphere light ", a, " outside (0,1]");
    require(std::isfinite(beta) && beta > 0.0, ErrorKind::Domain,
            "scattering coefficient ", beta, " must be positive");
}

Tensor transmission_from_depth(const DepthMap& depth, double beta) {
    require(std::isfinite(beta) && beta > 0.0, ErrorKind::Domain,
            "scattering coefficient ", beta, " must be positive");
    Tensor out(depth.values.shape());
    const float* d = depth.values.data();
    float* t = out.data();
    int64_t n = out.shape().count();
    for (int64_t i = 0; i < n; ++i) {
        double v = std::exp(-beta * static_cast<double>(d[i]));
        // exp of a non-positive argument is already <= 1; guard the
        // low end so downstream (0,1] checks cannot trip on underflow.
        t[i] = static_cast<float>(std::max(v, 1e-30));
    }
    return out;
}

Tensor apply_haze(const Tensor& clear, const Tensor& transmission, double a) {
    check_image3(clear, "clear image");
    check_transmission(transmission, clear.shape());
    require(std::isfinite(a) && a > 0.0 && a <= 1.0, ErrorKind::Domain,
            "atmosphere light ", a, " outside (0,1]");
    const Shape& s = clear.shape();
    Tensor out(s);
    const float* j = clear.data();
    const float* tr = transmission.data();
    float* o = out.data();
    for (int64_t p = 0; p < s.h * s.w; ++p) {
        double t = static_cast<double>(tr[p]);
        double airlight = a * (1.0 - t);
        for (int64_t c = 0; c < 3; ++c) {
            double v = static_cast<double>(j[p * 3 + c]) * t + airlight;
            o[p * 3 + c] = clamp01(v);
        }
    }
    return out;
}

Tensor invert_haze(const Tensor& hazy, const Tensor& transmission, double a) {
    check_image3(hazy, "hazy image");
    check_transmission(transmission, hazy.shape());
    require(std::isfinite(a) && a > 0.0 && a <= 1.0, ErrorKind::Domain,
            "atmosphere light ", a, " outside (0,1]");
    const Shape& s = hazy.shape();
    Tensor out(s);
    const float* i = hazy.data();
    const float* tr = transmission.data();
    float* o = out.data();
    for (int64_t p = 0; p < s.h * s.w; ++p) {
        double t = std::max(static_cast<double>(tr[p]), kMinInvertTransmission);
        double airlight = a * (1.0 - t);
        for (int64_t c = 0; c < 3; ++c) {
            double v = (static_cast<double>(i[p * 3 + c]) - airlight) / t;
            o[p * 3 + c] = clamp01(v);
        }
    }
    return out;
}

const char* noise_kind_name(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::Poisson: return "poisson";
        case NoiseKind::SaltPepper: return "saltpepper";
    }
    return "unknown";
}

Tensor add_noise(const Tensor& image, NoiseKind kind, double level, uint64_t seed) {
    const Shape& s = image.shape();
    require(s.b == 1, ErrorKind::Shape, "noise expects a single image, got ", s.str());
    require(all_in_range(image, 0.0f, 1.0f), ErrorKind::Domain,
            "image has values outside [0,1]");
    require(std::isfinite(level), ErrorKind::Domain, "noise level must be finite");
    Rng rng(derive_stream(seed, 0x4015e + static_cast<uint64_t>(kind)));
    Tensor out(s);
    const float* in = image.data();
    float* o = out.data();
    int64_t n = s.count();
    switch (kind) {
        case NoiseKind::Gaussian: {
            require(level >= 0.0, ErrorKind::Domain,
                    "gaussian noise level ", level, " must be non-negative");
            for (int64_t i = 0; i < n; ++i)
                o[i] = clamp01(static_cast<double>(in[i]) + level * rng.normal());
            break;
        }
        case NoiseKind::Poisson: {
            require(level > 0.0, ErrorKind::Domain,
                    "poisson noise level ", level, " must be positive");
            for (int64_t i = 0; i < n; ++i) {
                double lambda = static_cast<double>(in[i]) / level;
                o[i] = clamp01(level * static_cast<double>(rng.poisson(lambda)));
            }
            break;
        }
        case NoiseKind::SaltPepper: {
            require(level > 0.0 && level <= 1.0, ErrorKind::Domain,
                    "salt & pepper noise level ", level, " outside (0,1]");
            int64_t pixels = s.h * s.w;
            for (int64_t p = 0; p < pixels; ++p) {
                double u = rng.uniform01();
                if (u < level) {
                    float v = rng.uniform01() < 0.5 ? 0.0f : 1.0f;
                    for (int64_t c = 0; c < s.c; ++c) o[p * s.c + c] = v;
                } else {
                    for (int64_t c = 0; c < s.c; ++c) o[p * s.c + c] = in[p * s.c + c];
                }
            }
            break;
        }
    }
    return out;
}

Tensor resize_image(const Tensor& image, int64_t oh, int64_t ow) {
    const Shape& s = image.shape();
    require(s.b == 1, ErrorKind::Shape, "resize expects a single image, got ", s.str());
    require(oh >= 1 && ow >= 1, ErrorKind::Shape,
            "resize extents must be positive, got ", oh, "x", ow);
    Tensor out(Shape{1, oh, ow, s.c});
    if (oh == s.h && ow == s.w) {
        std::copy(image.values().begin(), image.values().end(), out.data());
        return out;
    }
    double sy = static_cast<double>(s.h) / static_cast<double>(oh);
    double sx = static_cast<double>(s.w) / static_cast<double>(ow);
    float* o = out.data();
    for (int64_t y = 0; y < oh; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(s.h - 1));
        int64_t y0 = static_cast<int64_t>(fy);
        int64_t y1 = std::min(y0 + 1, s.h - 1);
        float wy = static_cast<float>(fy - static_cast<double>(y0));
        for (int64_t x = 0; x < ow; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(s.w - 1));
            int64_t x0 = static_cast<int64_t>(fx);
            int64_t x1 = std::min(x0 + 1, s.w - 1);
            float wx = static_cast<float>(fx - static_cast<double>(x0));
            const float* p00 = image.pixel(0, y0, x0);
            const float* p01 = image.pixel(0, y0, x1);
            const float* p10 = image.pixel(0, y1, x0);
            const float* p11 = image.pixel(0, y1, x1);
            for (int64_t c = 0; c < s.c; ++c) {
                // lerp written as a + w*(b - a) so equal neighbours
                // reproduce their value exactly.
                float top = p00[c] + wx * (p01[c] - p00[c]);
                float bot = p10[c] + wx * (p11[c] - p10[c]);
                o[(y * ow + x) * s.c + c] = top + wy * (bot - top);
            }
        }
    }
    return out;
}

Tensor rescale_image(const Tensor& image, double factor) {
    const Shape& s = image.shape();
    require(s.b == 1, ErrorKind::Shape, "rescale expects a single image, got ", s.str());
    require(std::isfinite(factor) && factor > 0.0, ErrorKind::Domain,
            "scale factor ", factor, " must be positive");
    int64_t oh = std::max<int64_t>(1, std::llround(factor * static_cast<double>(s.h)));
    int64_t ow = std::max<int64_t>(1, std::llround(factor * static_cast<double>(s.w)));
    return resize_image(image, oh, ow);
}

}  // namespace ldt
