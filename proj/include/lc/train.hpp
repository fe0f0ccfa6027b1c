#pragma once

#include "lc/data.hpp"
#include "lc/model.hpp"
#include "lc/nn.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lc::train {

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EpochRecord {
    std::string phase;
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> records;
};

// CSV: phase,epoch,train_loss,val_loss,seconds
void write_train_log_csv(const TrainLog& log, const std::string& path);

struct TripletIndex {
    int anchor = 0;
    int positive = 0;
    int negative = 0;
    bool fallback = false;  // no candidate beyond the distance threshold
};

struct Phase1Options {
    int epochs = 12;
    int batch_size = 128;
    std::uint64_t seed = 0;
};

struct Phase2Options {
    int epochs = 5;
    int batch_size = 128;
    float margin = 1.0f;
    float neg_threshold = 0.5f;  // Euclidean distance, not squared
    std::uint64_t seed = 0;
};

// Minimizes reconstruction MSE; per-epoch validation reconstruction loss is
// recorded to watch for overfitting. Aborts with NumericError on NaN loss.
TrainLog train_phase1(Autoencoder<float>& model, const data::Dataset& train_ds,
                      const data::Dataset& val_ds, nn::Adam<float>& optimizer,
                      const Phase1Options& opts);

// Embeddings of a dataset in eval mode, [N, latent_dim], L2-normalized rows.
Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> embed_all(
    Autoencoder<float>& model, const data::Dataset& ds, int batch_size = 256);

// Unsupervised mining over current eval-mode embeddings. Each subset point
// anchors one triplet, in seed-shuffled order: positive is the exact nearest
// non-identical neighbor, negative is sampled uniformly among points farther
// than the threshold. When none qualifies, the farthest point is used and the
// triplet is flagged. Labels are never consulted.
std::vector<TripletIndex> mine_triplets(
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& embeddings,
    float threshold, std::uint64_t seed);

// Fine-tunes with triplet loss only, re-mining each epoch from the current
// embeddings. Validation triplets are mined from val_ds with the same rules.
// The optimizer carries its state in from Phase 1.
TrainLog train_phase2(Autoencoder<float>& model, const data::Dataset& mining_ds,
                      const data::Dataset& val_ds, nn::Adam<float>& optimizer,
                      const Phase2Options& opts);

}  // namespace lc::train
