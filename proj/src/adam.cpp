#include "ldt/adam.hpp"

#include <cmath>

namespace ldt {

AdamState adam_init(const std::vector<BlockView>& params, const AdamConfig& config) {
    require(config.lr > 0.0, ErrorKind::Config, "adam: lr must be > 0");
    require(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 &&
                config.beta2 < 1.0,
            ErrorKind::Config, "adam: betas must lie in [0,1)");
    require(config.eps > 0.0, ErrorKind::Config, "adam: eps must be > 0");
    require(config.clip_norm >= 0.0, ErrorKind::Config, "adam: clip_norm must be >= 0");
    AdamState s;
    s.config = config;
    for (const auto& b : params) {
        s.first_moment.emplace_back(static_cast<size_t>(b.size), 0.0f);
        s.second_moment.emplace_back(static_cast<size_t>(b.size), 0.0f);
    }
    return s;
}

AdamState adam_init(LdtNetParams& params, const AdamConfig& config) {
    auto blocks = learnable_blocks(params);
    return adam_init(blocks, config);
}

void adam_step(std::vector<BlockView>& params,
               const std::vector<ConstBlockView>& grads, AdamState& state) {
    require(params.size() == grads.size() &&
                params.size() == state.first_moment.size(),
            ErrorKind::Shape, "adam_step: block count mismatch (params ",
            params.size(), ", grads ", grads.size(), ", state ",
            state.first_moment.size(), ")");
    for (size_t i = 0; i < params.size(); ++i) {
        require(params[i].size == grads[i].size &&
                    static_cast<size_t>(params[i].size) == state.first_moment[i].size(),
                ErrorKind::Shape, "adam_step: block '", params[i].name,
                "' size mismatch");
        for (int64_t j = 0; j < grads[i].size; ++j)
            require(std::isfinite(grads[i].data[j]), ErrorKind::Numeric,
                    "adam_step: non-finite gradient in block '", grads[i].name,
                    "' at index ", j, "; step aborted");
    }

    double clip_scale = 1.0;
    if (state.config.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads)
            for (int64_t j = 0; j < g.size; ++j)
                sq += static_cast<double>(g.data[j]) * g.data[j];
        const double norm = std::sqrt(sq);
        if (norm > state.config.clip_norm) clip_scale = state.config.clip_norm / norm;
    }

    state.step_count += 1;
    const double b1 = state.config.beta1;
    const double b2 = state.config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));

    for (size_t i = 0; i < params.size(); ++i) {
        float* p = params[i].data;
        const float* g = grads[i].data;
        float* m = state.first_moment[i].data();
        float* v = state.second_moment[i].data();
        for (int64_t j = 0; j < params[i].size; ++j) {
            const double gj = static_cast<double>(g[j]) * clip_scale;
            const double mj = b1 * m[j] + (1.0 - b1) * gj;
            const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
            m[j] = static_cast<float>(mj);
            v[j] = static_cast<float>(vj);
            const double m_hat = mj / bc1;
            const double v_hat = vj / bc2;
            p[j] = static_cast<float>(p[j] - state.config.lr * m_hat /
                                                 (std::sqrt(v_hat) + state.config.eps));
        }
    }
}

void adam_step(LdtNetParams& params, const LdtNetGrads& grads, AdamState& state) {
    auto pb = learnable_blocks(params);
    auto gb = learnable_blocks(grads);
    adam_step(pb, gb, state);
}

}  // namespace ldt
