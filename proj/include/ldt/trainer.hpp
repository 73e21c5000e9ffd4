#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ldt/adam.hpp"
#include "ldt/haze.hpp"
#include "ldt/model.hpp"

namespace ldt {

struct TrainConfig {
    AdamConfig adam;
    double alpha = 0.4;       // transmission-task weight in the joint loss
    int64_t batch_size = 4;
    int64_t epochs = 30;
    uint64_t seed = 1;
    double val_fraction = 0.1;
    int64_t crop = 0;         // random square crop size; 0 trains on full images
    std::string log_path;         // optional per-epoch CSV log
    std::string checkpoint_path;  // optional; rewritten at each improvement
    std::function<void(const struct EpochStats&)> on_epoch;  // optional progress hook

    void validate() const;
};

struct EpochStats {
    int64_t epoch = 0;          // 1-based
    double train_loss = 0.0;    // joint loss, sample-weighted epoch mean
    double train_dehaze = 0.0;
    double train_trans = 0.0;
    double val_mse = 0.0;       // dehazing MSE on held-out images (eval mode)
    bool improved = false;
};

struct TrainResult {
    LdtNetParams params;        // best validation MSE; final state if no val set
    LdtNetParams final_params;
    double best_val_mse = 0.0;
    int64_t best_epoch = 0;
    std::vector<EpochStats> history;
};

// Mean dehazing MSE of the model over the given triples, eval mode, one
// image at a time.
double dehaze_mse(const LdtNetParams& params, const std::vector<HazeTriple>& triples);

// Mini-batch training from scratch. Deterministic per (config, data): the
// seed drives initialization, the train/validation split, per-epoch
// shuffles, and crop positions. A non-finite loss or gradient aborts with a
// numeric error; the best checkpoint written so far stays on disk.
TrainResult train_model(const std::vector<HazeTriple>& data, const TrainConfig& config);

}  // namespace ldt
