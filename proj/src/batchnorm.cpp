#include "ldt/batchnorm.hpp"

#include <cmath>

namespace ldt {

BatchNormParams BatchNormParams::identity(int64_t channels) {
    BatchNormParams p;
    p.gamma.assign(static_cast<size_t>(channels), 1.0f);
    p.beta_shift.assign(static_cast<size_t>(channels), 0.0f);
    p.running_mean.assign(static_cast<size_t>(channels), 0.0f);
    p.running_var.assign(static_cast<size_t>(channels), 1.0f);
    return p;
}

namespace {

void check_params(const Tensor& input, const BatchNormParams& p) {
    const int64_t c = input.shape().c;
    require(p.channels() == c && static_cast<int64_t>(p.beta_shift.size()) == c &&
                static_cast<int64_t>(p.running_mean.size()) == c &&
                static_cast<int64_t>(p.running_var.size()) == c,
            ErrorKind::Shape, "batchnorm: parameter vectors sized ", p.channels(),
            " do not match channel extent of ", input.shape().str());
    require(p.epsilon > 0.0f, ErrorKind::Domain, "batchnorm: epsilon must be > 0");
    require(p.momentum > 0.0f && p.momentum < 1.0f, ErrorKind::Domain,
            "batchnorm: momentum must lie in (0,1)");
    for (float v : p.running_var)
        require(v >= 0.0f, ErrorKind::Domain, "batchnorm: negative running variance");
}

}  // namespace

Tensor batchnorm_forward(const Tensor& input, BatchNormParams& params,
                         Mode mode, BatchNormCache* cache) {
    check_params(input, params);
    const Shape& s = input.shape();
    const int64_t n = s.b * s.h * s.w;  // samples per channel
    const int64_t c_n = s.c;
    Tensor out(s);

    if (mode == Mode::Eval) {
        std::vector<float> inv_std(static_cast<size_t>(c_n));
        for (int64_t c = 0; c < c_n; ++c)
            inv_std[static_cast<size_t>(c)] =
                1.0f / std::sqrt(params.running_var[static_cast<size_t>(c)] + params.epsilon);
        const float* pi = input.data();
        float* po = out.data();
        for (int64_t p = 0; p < n; ++p) {
            const float* row = pi + p * c_n;
            float* orow = po + p * c_n;
            for (int64_t c = 0; c < c_n; ++c) {
                const size_t ci = static_cast<size_t>(c);
                orow[c] = params.gamma[ci] * (row[c] - params.running_mean[ci]) *
                              inv_std[ci] +
                          params.beta_shift[ci];
            }
        }
        if (cache) {
            cache->train_mode = false;
            cache->normalized = Tensor();
            cache->inv_std.clear();
            cache->gamma = params.gamma;
        }
        return out;
    }

    require(n > 1, ErrorKind::Domain,
            "batchnorm: train mode needs batch*height*width > 1, got ", n);

    // Two-pass per-channel statistics with 64-bit accumulation.
    std::vector<double> mean(static_cast<size_t>(c_n), 0.0);
    std::vector<double> var(static_cast<size_t>(c_n), 0.0);
    const float* pi = input.data();
    for (int64_t p = 0; p < n; ++p) {
        const float* row = pi + p * c_n;
        for (int64_t c = 0; c < c_n; ++c) mean[static_cast<size_t>(c)] += row[c];
    }
    for (int64_t c = 0; c < c_n; ++c) mean[static_cast<size_t>(c)] /= static_cast<double>(n);
    for (int64_t p = 0; p < n; ++p) {
        const float* row = pi + p * c_n;
        for (int64_t c = 0; c < c_n; ++c) {
            const double d = row[c] - mean[static_cast<size_t>(c)];
            var[static_cast<size_t>(c)] += d * d;
        }
    }
    for (int64_t c = 0; c < c_n; ++c) var[static_cast<size_t>(c)] /= static_cast<double>(n);

    std::vector<float> mean_f(static_cast<size_t>(c_n)), inv_std(static_cast<size_t>(c_n));
    for (int64_t c = 0; c < c_n; ++c) {
        const size_t ci = static_cast<size_t>(c);
        mean_f[ci] = static_cast<float>(mean[ci]);
        inv_std[ci] = 1.0f / std::sqrt(static_cast<float>(var[ci]) + params.epsilon);
    }

    Tensor normalized(s);
    float* pn = normalized.data();
    float* po = out.data();
    for (int64_t p = 0; p < n; ++p) {
        const float* row = pi + p * c_n;
        float* nrow = pn + p * c_n;
        float* orow = po + p * c_n;
        for (int64_t c = 0; c < c_n; ++c) {
            const size_t ci = static_cast<size_t>(c);
            const float xhat = (row[c] - mean_f[ci]) * inv_std[ci];
            nrow[c] = xhat;
            orow[c] = params.gamma[ci] * xhat + params.beta_shift[ci];
        }
    }

    // Exponential moving average of the batch statistics.
    for (int64_t c = 0; c < c_n; ++c) {
        const size_t ci = static_cast<size_t>(c);
        params.running_mean[ci] = params.momentum * params.running_mean[ci] +
                                  (1.0f - params.momentum) * mean_f[ci];
        params.running_var[ci] = params.momentum * params.running_var[ci] +
                                 (1.0f - params.momentum) * static_cast<float>(var[ci]);
    }

    if (cache) {
        cache->train_mode = true;
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
        cache->gamma = params.gamma;
    }
    return out;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache,
                                  const Tensor& upstream_grad) {
    require(cache.train_mode, ErrorKind::Contract,
            "batchnorm_backward: cache must come from a train-mode forward");
    check_same_shape(cache.normalized, upstream_grad, "batchnorm_backward");
    const Shape& s = upstream_grad.shape();
    const int64_t n = s.b * s.h * s.w;
    const int64_t c_n = s.c;

    std::vector<double> sum_dy(static_cast<size_t>(c_n), 0.0);
    std::vector<double> sum_dy_xhat(static_cast<size_t>(c_n), 0.0);
    const float* pg = upstream_grad.data();
    const float* pn = cache.normalized.data();
    for (int64_t p = 0; p < n; ++p) {
        const float* grow = pg + p * c_n;
        const float* nrow = pn + p * c_n;
        for (int64_t c = 0; c < c_n; ++c) {
            const size_t ci = static_cast<size_t>(c);
            sum_dy[ci] += grow[c];
            sum_dy_xhat[ci] += static_cast<double>(grow[c]) * nrow[c];
        }
    }

    BatchNormGrads grads;
    grads.gamma.resize(static_cast<size_t>(c_n));
    grads.beta_shift.resize(static_cast<size_t>(c_n));
    std::vector<float> mean_dy(static_cast<size_t>(c_n)), mean_dy_xhat(static_cast<size_t>(c_n));
    for (int64_t c = 0; c < c_n; ++c) {
        const size_t ci = static_cast<size_t>(c);
        grads.gamma[ci] = static_cast<float>(sum_dy_xhat[ci]);
        grads.beta_shift[ci] = static_cast<float>(sum_dy[ci]);
        mean_dy[ci] = static_cast<float>(sum_dy[ci] / static_cast<double>(n));
        mean_dy_xhat[ci] = static_cast<float>(sum_dy_xhat[ci] / static_cast<double>(n));
    }

    grads.input = Tensor(s);
    float* po = grads.input.data();
    for (int64_t p = 0; p < n; ++p) {
        const float* grow = pg + p * c_n;
        const float* nrow = pn + p * c_n;
        float* orow = po + p * c_n;
        for (int64_t c = 0; c < c_n; ++c) {
            const size_t ci = static_cast<size_t>(c);
            orow[c] = cache.gamma[ci] * cache.inv_std[ci] *
                      (grow[c] - mean_dy[ci] - nrow[c] * mean_dy_xhat[ci]);
        }
    }
    return grads;
}

}  // namespace ldt
