#pragma once

#include <cstdint>
#include <string>

#include "ldt/tensor.hpp"

namespace ldt {

// Per-pixel scene depth, (1,H,W,1), non-negative finite values in arbitrary
// units.
struct DepthMap {
    Tensor values;

    static DepthMap from_tensor(Tensor t);
    int64_t height() const { return values.shape().h; }
    int64_t width() const { return values.shape().w; }
};

struct HazeParams {
    double a = 0.85;   // atmosphere light, in (0,1], shared by all channels
    double beta = 1.0; // scattering coefficient, > 0

    void validate() const;
};

// (clear, transmission, hazy) plus the parameters that generated it.
// Satisfies hazy = clear*t + a*(1-t) elementwise to within 1e-6 as built;
// an 8-bit disk round trip naturally loosens that.
struct HazeTriple {
    Tensor clear;         // (1,H,W,3) in [0,1]
    Tensor transmission;  // (1,H,W,1) in (0,1]
    Tensor hazy;          // (1,H,W,3) in [0,1]
    HazeParams params;
    uint64_t stream_seed = 0;
    std::string source_id;
};

// t(x) = exp(-beta * d(x)); output in (0,1].
Tensor transmission_from_depth(const DepthMap& depth, double beta);

// I(x) = J(x)*t(x) + A*(1 - t(x)). clear is (1,H,W,3) in [0,1], t is
// (1,H,W,1) in (0,1].
Tensor apply_haze(const Tensor& clear, const Tensor& transmission, double a);

// Algebraic inverse of apply_haze with the transmission clamped below at
// kMinInvertTransmission; exact wherever t is comfortably above the clamp.
// Output clamped to [0,1]. Used as a test oracle and reference model, not as
// the learned dehazing path.
inline constexpr double kMinInvertTransmission = 0.05;
Tensor invert_haze(const Tensor& hazy, const Tensor& transmission, double a);

enum class NoiseKind { Gaussian, Poisson, SaltPepper };

const char* noise_kind_name(NoiseKind kind);

// Additive Gaussian noise with sigma = level; Poisson photon-count
// resampling at inverse photon count `level` (counts = pixel/level);
// salt & pepper sets a `level` fraction of pixels (all channels together)
// to 0 or 1 equiprobably. Output clamped to [0,1]; deterministic per seed.
Tensor add_noise(const Tensor& image, NoiseKind kind, double level, uint64_t seed);

// Bilinear resampling to the given extents. Unchanged extents return a
// bit-identical copy; constant images stay exactly constant.
Tensor resize_image(const Tensor& image, int64_t out_height, int64_t out_width);

// resize_image to extents max(1, round(factor * extent)).
Tensor rescale_image(const Tensor& image, double factor);

}  // namespace ldt
