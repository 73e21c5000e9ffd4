#pragma once

#include <cstdint>
#include <vector>

#include "ldt/model.hpp"

namespace ldt {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Global-norm gradient clipping threshold; 0 disables (the default).
    double clip_norm = 0.0;
};

// First/second moment estimates congruent to every learnable block, plus the
// step counter driving bias correction.
struct AdamState {
    AdamConfig config;
    int64_t step_count = 0;
    std::vector<std::vector<float>> first_moment;
    std::vector<std::vector<float>> second_moment;
};

// Zeroed moments shaped after the given blocks.
AdamState adam_init(const std::vector<BlockView>& params, const AdamConfig& config);
AdamState adam_init(LdtNetParams& params, const AdamConfig& config);

// One bias-corrected Adam update, in place. A non-finite gradient aborts the
// step before any parameter is touched, naming the offending block.
void adam_step(std::vector<BlockView>& params,
               const std::vector<ConstBlockView>& grads, AdamState& state);
void adam_step(LdtNetParams& params, const LdtNetGrads& grads, AdamState& state);

}  // namespace ldt
