#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldt/haze.hpp"
#include "ldt/tensor.hpp"

namespace ldt {

// A clear RGB image with its aligned depth map, the raw material for haze
// synthesis and evaluation.
struct SourceImage {
    Tensor clear;   // (1,H,W,3) in [0,1]
    DepthMap depth; // (1,H,W,1), arbitrary non-negative units
    std::string id;
};

// Renders a synthetic scene: a smooth depth layout (ramp, bowl, or low
// frequency field), textured background, and a handful of textured shapes
// sitting at their own depths. Every region carries fine texture so local
// contrast degrades measurably with haze. Deterministic per seed.
SourceImage make_procedural_scene(uint64_t seed, int64_t height, int64_t width);

// count scenes with ids scene-<seed>-<index>, streams derived per index.
std::vector<SourceImage> procedural_sources(uint64_t seed, int64_t count,
                                            int64_t height, int64_t width);

}  // namespace ldt
