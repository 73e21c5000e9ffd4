#pragma once

#include "ldt/tensor.hpp"

namespace ldt {

struct QualityScore {
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

// PSNR of identical images (mse below 1e-10) is capped at this sentinel.
inline constexpr double kPsnrCap = 100.0;

// Mean of squared differences over all pixels and channels.
double mse(const Tensor& a, const Tensor& b);

// 10*log10(1/mse) for images in [0,1] (peak = 1), capped at kPsnrCap.
double psnr(const Tensor& a, const Tensor& b);

// Mean local SSIM on luma (ITU-R BT.601 weights for RGB, identity for
// grayscale), 11x11 Gaussian window with sigma 1.5, K1=0.01, K2=0.03, L=1.
// Windows are evaluated where they fit entirely inside the image; inputs
// must be at least 11x11.
double ssim(const Tensor& a, const Tensor& b);

QualityScore quality(const Tensor& a, const Tensor& b);

}  // namespace ldt
