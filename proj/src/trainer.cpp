#include "ldt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "ldt/checkpoint.hpp"
#include "ldt/error.hpp"
#include "ldt/metrics.hpp"
#include "ldt/rng.hpp"

namespace ldt {

namespace {

void check_triples(const std::vector<HazeTriple>& data) {
    require(!data.empty(), ErrorKind::Config, "training set is empty");
    const Shape& ref = data.front().hazy.shape();
    for (size_t i = 0; i < data.size(); ++i) {
        const HazeTriple& t = data[i];
        require(t.hazy.shape() == ref, ErrorKind::Data, "triple ", i,
                ": hazy extents ", t.hazy.shape().str(), " differ from first triple ",
                ref.str());
        require(t.clear.shape() == ref, ErrorKind::Data, "triple ", i,
                ": clear extents do not match hazy");
        const Shape& ts = t.transmission.shape();
        require(ts.h == ref.h && ts.w == ref.w && ts.c == 1, ErrorKind::Data, "triple ",
                i, ": transmission extents ", ts.str(), " do not match hazy");
    }
}

// Gathers a batch by copying (optionally cropped) images into contiguous
// batch tensors.
struct Batch {
    Tensor hazy;
    Tensor clear;
    Tensor trans;
};

Batch gather_batch(const std::vector<HazeTriple>& data, const std::vector<size_t>& order,
                   size_t first, size_t count, int64_t crop, Rng& rng) {
    const Shape& full = data.front().hazy.shape();
    int64_t h = crop > 0 ? crop : full.h;
    int64_t w = crop > 0 ? crop : full.w;
    int64_t n = static_cast<int64_t>(count);
    Batch b{Tensor(Shape{n, h, w, 3}), Tensor(Shape{n, h, w, 3}),
            Tensor(Shape{n, h, w, 1})};
    for (size_t i = 0; i < count; ++i) {
        const HazeTriple& t = data[order[first + i]];
        int64_t oy = 0;
        int64_t ox = 0;
        if (crop > 0) {
            oy = static_cast<int64_t>(rng.below(static_cast<uint64_t>(full.h - crop + 1)));
            ox = static_cast<int64_t>(rng.below(static_cast<uint64_t>(full.w - crop + 1)));
        }
        for (int64_t y = 0; y < h; ++y) {
            const float* src_h = t.hazy.pixel(0, oy + y, ox);
            const float* src_c = t.clear.pixel(0, oy + y, ox);
            const float* src_t = t.transmission.pixel(0, oy + y, ox);
            std::copy(src_h, src_h + w * 3, b.hazy.pixel(static_cast<int64_t>(i), y, 0));
            std::copy(src_c, src_c + w * 3, b.clear.pixel(static_cast<int64_t>(i), y, 0));
            std::copy(src_t, src_t + w, b.trans.pixel(static_cast<int64_t>(i), y, 0));
        }
    }
    return b;
}

}  // namespace

void TrainConfig::validate() const {
    require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, ErrorKind::Config,
            "loss weight alpha ", alpha, " outside [0,1]");
    require(batch_size >= 1, ErrorKind::Config, "batch size must be positive, got ",
            batch_size);
    require(epochs >= 1, ErrorKind::Config, "epoch count must be positive, got ", epochs);
    require(std::isfinite(val_fraction) && val_fraction >= 0.0 && val_fraction < 1.0,
            ErrorKind::Config, "validation fraction ", val_fraction, " outside [0,1)");
    require(crop >= 0, ErrorKind::Config, "crop size must be non-negative, got ", crop);
}

double dehaze_mse(const LdtNetParams& params, const std::vector<HazeTriple>& triples) {
    require(!triples.empty(), ErrorKind::Config, "validation set is empty");
    LdtNetParams p = params;  // eval-mode forward never mutates, but keep const API
    double total = 0.0;
    for (const HazeTriple& t : triples) {
        ForwardTrace trace = forward(p, t.hazy, Mode::Eval);
        total += mse(trace.dehazed, t.clear);
    }
    return total / static_cast<double>(triples.size());
}

TrainResult train_model(const std::vector<HazeTriple>& data, const TrainConfig& config) {
    config.validate();
    check_triples(data);
    const Shape& full = data.front().hazy.shape();
    if (config.crop > 0)
        require(config.crop <= full.h && config.crop <= full.w, ErrorKind::Config,
                "crop ", config.crop, " exceeds image extents ", full.str());

    // Deterministic split: shuffle all indices once, carve off the tail.
    std::vector<size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), size_t{0});
    Rng split_rng(derive_stream(config.seed, 0x5917));
    split_rng.shuffle(indices);
    size_t val_count = 0;
    if (config.val_fraction > 0.0) {
        require(data.size() >= 2, ErrorKind::Config,
                "need at least 2 triples to hold out validation data");
        val_count = static_cast<size_t>(
            std::llround(config.val_fraction * static_cast<double>(data.size())));
        val_count = std::min(std::max<size_t>(val_count, 1), data.size() - 1);
    }
    std::vector<size_t> train_idx(indices.begin(), indices.end() - val_count);
    std::vector<HazeTriple> val_set;
    for (size_t i = indices.size() - val_count; i < indices.size(); ++i)
        val_set.push_back(data[indices[i]]);

    LdtNetParams params = init_params(config.seed);
    AdamState opt = adam_init(params, config.adam);
    LossWeights weights{config.alpha};

    std::ofstream log;
    if (!config.log_path.empty()) {
        log.open(config.log_path, std::ios::trunc);
        require(log.good(), ErrorKind::Data, "cannot open log file ", config.log_path);
        log << "epoch,train_loss,dehaze_loss,trans_loss,val_mse,improved\n";
    }

    TrainResult result;
    result.best_val_mse = std::numeric_limits<double>::infinity();
    bool have_best = false;

    for (int64_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng epoch_rng(derive_stream(config.seed, 0xE000 + static_cast<uint64_t>(epoch)));
        epoch_rng.shuffle(train_idx);

        double loss_sum = 0.0;
        double dehaze_sum = 0.0;
        double trans_sum = 0.0;
        int64_t sample_sum = 0;
        for (size_t first = 0; first < train_idx.size();
             first += static_cast<size_t>(config.batch_size)) {
            size_t count = std::min(static_cast<size_t>(config.batch_size),
                                    train_idx.size() - first);
            Batch batch = gather_batch(data, train_idx, first, count, config.crop,
                                       epoch_rng);
            ForwardTrace trace = forward(params, batch.hazy, Mode::Train);
            LossValues lv = loss(trace, batch.clear, batch.trans, weights);
            require(std::isfinite(lv.total), ErrorKind::Numeric,
                    "training loss became non-finite at epoch ", epoch,
                    "; last best checkpoint is preserved");
            LdtNetGrads grads = backward(trace, batch.clear, batch.trans, weights, params);
            adam_step(params, grads, opt);
            double weight = static_cast<double>(count);
            loss_sum += lv.total * weight;
            dehaze_sum += lv.dehaze * weight;
            trans_sum += lv.transmission * weight;
            sample_sum += static_cast<int64_t>(count);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(sample_sum);
        stats.train_dehaze = dehaze_sum / static_cast<double>(sample_sum);
        stats.train_trans = trans_sum / static_cast<double>(sample_sum);
        if (!val_set.empty()) {
            stats.val_mse = dehaze_mse(params, val_set);
            require(std::isfinite(stats.val_mse), ErrorKind::Numeric,
                    "validation error became non-finite at epoch ", epoch);
            if (stats.val_mse < result.best_val_mse) {
                stats.improved = true;
                result.best_val_mse = stats.val_mse;
                result.best_epoch = epoch;
                result.params = params;
                have_best = true;
                if (!config.checkpoint_path.empty())
                    save_params(params, config.checkpoint_path);
            }
        }
        if (log.is_open()) {
            char line[256];
            std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g,%.17g,%.17g,%d\n",
                          static_cast<long long>(stats.epoch), stats.train_loss,
                          stats.train_dehaze, stats.train_trans, stats.val_mse,
                          stats.improved ? 1 : 0);
            log << line;
            log.flush();
        }
        if (config.on_epoch) config.on_epoch(stats);
        result.history.push_back(stats);
    }

    result.final_params = params;
    if (!have_best) {
        result.params = params;
        result.best_epoch = config.epochs;
        result.best_val_mse = result.history.empty() ? 0.0
                                                     : result.history.back().train_loss;
        if (!config.checkpoint_path.empty()) save_params(params, config.checkpoint_path);
    }
    return result;
}

}  // namespace ldt
