#include "ldt/scenes.hpp"

#include <algorithm>
#include <cmath>

#include "ldt/error.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace {

constexpr double kTau = 6.283185307179586;

float clamp01f(double v) {
    return static_cast<float>(std::min(1.0, std::max(0.0, v)));
}

// Sum of a few random sinusoidal plane waves, scaled to roughly [-1,1].
struct WaveField {
    struct Wave {
        double fy, fx, phase, amp;
    };
    std::vector<Wave> waves;
    double norm = 1.0;

    static WaveField random(Rng& rng, int count, double min_freq, double max_freq) {
        WaveField f;
        double total = 0.0;
        for (int i = 0; i < count; ++i) {
            Wave w;
            double freq = rng.uniform_open(min_freq, max_freq);
            double angle = rng.uniform_open(0.0, kTau);
            w.fy = freq * std::sin(angle);
            w.fx = freq * std::cos(angle);
            w.phase = rng.uniform_open(0.0, kTau);
            w.amp = rng.uniform_open(0.3, 1.0);
            total += w.amp;
            f.waves.push_back(w);
        }
        f.norm = total > 0.0 ? 1.0 / total : 1.0;
        return f;
    }

    double at(double u, double v) const {
        double s = 0.0;
        for (const Wave& w : waves)
            s += w.amp * std::sin(kTau * (w.fy * v + w.fx * u) + w.phase);
        return s * norm;
    }
};

struct Blob {
    double cy, cx;     // center in unit coordinates
    double ry, rx;     // radii in unit coordinates
    double angle;      // rotation
    double depth;      // unit depth, nearer than the backdrop
    double color[3];   // base color
    WaveField texture;
    double texture_amp;

    bool contains(double u, double v) const {
        double du = u - cx;
        double dv = v - cy;
        double ca = std::cos(angle);
        double sa = std::sin(angle);
        double lu = (du * ca + dv * sa) / rx;
        double lv = (-du * sa + dv * ca) / ry;
        return lu * lu + lv * lv <= 1.0;
    }
};

}  // namespace

SourceImage make_procedural_scene(uint64_t seed, int64_t height, int64_t width) {
    require(height >= 8 && width >= 8, ErrorKind::Config,
            "scene extents must be at least 8x8, got ", height, "x", width);
    Rng rng(derive_stream(seed, 0x5ce7e));

    // Backdrop depth layout in unit depth [0,1]; 1 is far.
    const int layout = static_cast<int>(rng.below(4));
    const double bowl_cy = rng.uniform_open(0.3, 0.7);
    const double bowl_cx = rng.uniform_open(0.3, 0.7);
    WaveField depth_field = WaveField::random(rng, 3, 0.5, 1.5);
    auto backdrop_depth = [&](double u, double v) {
        switch (layout) {
            case 0: return v;                      // top near, bottom far
            case 1: return u;                      // left near, right far
            case 2: {                              // radial bowl
                double du = u - bowl_cx;
                double dv = v - bowl_cy;
                return std::min(1.0, std::sqrt(du * du + dv * dv) * 1.6);
            }
            default:                               // smooth random field
                return 0.5 + 0.5 * depth_field.at(u, v);
        }
    };

    // Backdrop colors: smooth base per channel plus shared fine texture.
    WaveField base_r = WaveField::random(rng, 2, 0.4, 1.2);
    WaveField base_g = WaveField::random(rng, 2, 0.4, 1.2);
    WaveField base_b = WaveField::random(rng, 2, 0.4, 1.2);
    WaveField detail = WaveField::random(rng, 4, 6.0, 18.0);
    const double detail_amp = rng.uniform_open(0.08, 0.2);
    const double base_mid[3] = {rng.uniform_open(0.25, 0.75),
                                rng.uniform_open(0.25, 0.75),
                                rng.uniform_open(0.25, 0.75)};

    // Foreground shapes, each nearer than most of the backdrop.
    const int blob_count = 2 + static_cast<int>(rng.below(4));
    std::vector<Blob> blobs;
    for (int i = 0; i < blob_count; ++i) {
        Blob b;
        b.cy = rng.uniform_open(0.1, 0.9);
        b.cx = rng.uniform_open(0.1, 0.9);
        b.ry = rng.uniform_open(0.06, 0.25);
        b.rx = rng.uniform_open(0.06, 0.25);
        b.angle = rng.uniform_open(0.0, kTau);
        b.depth = rng.uniform_open(0.05, 0.7);
        for (double& ch : b.color) ch = rng.uniform_open(0.15, 0.85);
        b.texture = WaveField::random(rng, 3, 8.0, 24.0);
        b.texture_amp = rng.uniform_open(0.05, 0.18);
        blobs.push_back(b);
    }
    // Paint far to near so near shapes win overlaps.
    std::sort(blobs.begin(), blobs.end(),
              [](const Blob& a, const Blob& b) { return a.depth > b.depth; });

    SourceImage out;
    out.clear = Tensor(Shape{1, height, width, 3});
    Tensor depth(Shape{1, height, width, 1});
    float* img = out.clear.data();
    float* dep = depth.data();
    for (int64_t y = 0; y < height; ++y) {
        double v = (static_cast<double>(y) + 0.5) / static_cast<double>(height);
        for (int64_t x = 0; x < width; ++x) {
            double u = (static_cast<double>(x) + 0.5) / static_cast<double>(width);
            double d = backdrop_depth(u, v);
            double tex = detail_amp * detail.at(u, v);
            double rgb[3] = {
                base_mid[0] + 0.3 * base_r.at(u, v) + tex,
                base_mid[1] + 0.3 * base_g.at(u, v) + tex,
                base_mid[2] + 0.3 * base_b.at(u, v) + tex,
            };
            for (const Blob& b : blobs) {
                if (!b.contains(u, v)) continue;
                d = b.depth;
                double btex = b.texture_amp * b.texture.at(u, v);
                for (int c = 0; c < 3; ++c) rgb[c] = b.color[c] + btex;
            }
            int64_t p = y * width + x;
            for (int c = 0; c < 3; ++c) img[p * 3 + c] = clamp01f(rgb[c]);
            dep[p] = static_cast<float>(std::min(1.0, std::max(0.0, d)));
        }
    }
    out.depth = DepthMap::from_tensor(std::move(depth));
    out.id = "scene-" + std::to_string(seed);
    return out;
}

std::vector<SourceImage> procedural_sources(uint64_t seed, int64_t count,
                                            int64_t height, int64_t width) {
    require(count >= 1, ErrorKind::Config, "source count must be positive, got ", count);
    std::vector<SourceImage> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        SourceImage s = make_procedural_scene(derive_stream(seed, static_cast<uint64_t>(i)),
                                              height, width);
        s.id = "scene-" + std::to_string(seed) + "-" + std::to_string(i);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ldt
