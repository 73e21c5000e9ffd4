#include "ldt/metrics.hpp"

#include <cmath>
#include <vector>

namespace ldt {

double mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    require(a.size() > 0, ErrorKind::Shape, "mse: empty tensors");
    double acc = 0.0;
    const float* pa = a.data();
    const float* pb = b.data();
    for (int64_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(pa[i]) - pb[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b) {
    const double m = mse(a, b);
    if (m < 1e-10) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_taps() {
    std::vector<double> taps(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - (kWindow - 1) / 2.0;
        taps[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += taps[static_cast<size_t>(i)];
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

// BT.601 luma; single-channel images pass through.
std::vector<double> to_luma(const Tensor& img) {
    const Shape& s = img.shape();
    std::vector<double> luma(static_cast<size_t>(s.h * s.w));
    if (s.c == 1) {
        const float* p = img.data();
        for (size_t i = 0; i < luma.size(); ++i) luma[i] = p[i];
    } else {
        for (int64_t y = 0; y < s.h; ++y)
            for (int64_t x = 0; x < s.w; ++x) {
                const float* px = img.pixel(0, y, x);
                luma[static_cast<size_t>(y * s.w + x)] =
                    0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            }
    }
    return luma;
}

// Separable valid-region Gaussian filter: rows then columns.
std::vector<double> filter_valid(const std::vector<double>& img, int64_t h,
                                 int64_t w, const std::vector<double>& taps) {
    const int64_t ow = w - kWindow + 1;
    const int64_t oh = h - kWindow + 1;
    std::vector<double> rows(static_cast<size_t>(h * ow));
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k)
                acc += taps[static_cast<size_t>(k)] * img[static_cast<size_t>(y * w + x + k)];
            rows[static_cast<size_t>(y * ow + x)] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh * ow));
    for (int64_t y = 0; y < oh; ++y)
        for (int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k)
                acc += taps[static_cast<size_t>(k)] * rows[static_cast<size_t>((y + k) * ow + x)];
            out[static_cast<size_t>(y * ow + x)] = acc;
        }
    return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "ssim");
    const Shape& s = a.shape();
    require(s.b == 1, ErrorKind::Shape, "ssim: expects a single image, got ", s.str());
    require(s.c == 1 || s.c == 3, ErrorKind::Shape,
            "ssim: expects 1 or 3 channels, got ", s.str());
    require(s.h >= kWindow && s.w >= kWindow, ErrorKind::Shape, "ssim: image ",
            s.str(), " smaller than the ", kWindow, "x", kWindow, " window");

    const std::vector<double> taps = gaussian_taps();
    const std::vector<double> la = to_luma(a);
    const std::vector<double> lb = to_luma(b);

    const size_t n = la.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (size_t i = 0; i < n; ++i) {
        aa[i] = la[i] * la[i];
        bb[i] = lb[i] * lb[i];
        ab[i] = la[i] * lb[i];
    }

    const auto mu_a = filter_valid(la, s.h, s.w, taps);
    const auto mu_b = filter_valid(lb, s.h, s.w, taps);
    const auto m_aa = filter_valid(aa, s.h, s.w, taps);
    const auto m_bb = filter_valid(bb, s.h, s.w, taps);
    const auto m_ab = filter_valid(ab, s.h, s.w, taps);

    double acc = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        const double va = m_aa[i] - mu_a[i] * mu_a[i];
        const double vb = m_bb[i] - mu_b[i] * mu_b[i];
        const double cov = m_ab[i] - mu_a[i] * mu_b[i];
        const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
        const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2);
        acc += num / den;
    }
    return acc / static_cast<double>(mu_a.size());
}

QualityScore quality(const Tensor& a, const Tensor& b) {
    QualityScore q;
    q.mse = mse(a, b);
    q.psnr = q.mse < 1e-10 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / q.mse));
    q.ssim = ssim(a, b);
    return q;
}

}  // namespace ldt
