#include "lc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace lc::train {

namespace {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double validation_mse(Autoencoder<float>& model, const data::Dataset& val_ds, int batch_size) {
    if (val_ds.size() == 0) return 0.0;
    NoGradGuard guard;
    double total = 0.0;
    for (int start = 0; start < val_ds.size(); start += batch_size) {
        const int b = std::min(batch_size, val_ds.size() - start);
        std::vector<int> idx(static_cast<std::size_t>(b));
        std::iota(idx.begin(), idx.end(), start);
        Tensor<float> batch = data::gather_images(val_ds, idx);
        Tensor<float> recon = model.reconstruct(batch, /*train=*/false);
        total += static_cast<double>(nn::mse_loss(recon, batch).item()) * b;
    }
    return total / val_ds.size();
}

Tensor<float> gather_triplet_side(const data::Dataset& ds,
                                  const std::vector<TripletIndex>& triplets, int start, int count,
                                  int TripletIndex::* side) {
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        idx[static_cast<std::size_t>(i)] = triplets[static_cast<std::size_t>(start + i)].*side;
    return data::gather_images(ds, idx);
}

}  // namespace

void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw NumericError("cannot open '" + path + "' for writing");
    os << "phase,epoch,train_loss,val_loss,seconds\n";
    os.precision(9);
    for (const auto& r : log.records)
        os << r.phase << "," << r.epoch << "," << r.train_loss << "," << r.val_loss << ","
           << r.seconds << "\n";
}

TrainLog train_phase1(Autoencoder<float>& model, const data::Dataset& train_ds,
                      const data::Dataset& val_ds, nn::Adam<float>& optimizer,
                      const Phase1Options& opts) {
    TrainLog log;
    if (opts.epochs == 0) return log;
    auto params = model.parameters();
    data::BatchIterator batches(train_ds.size(), opts.batch_size, /*shuffle=*/true, opts.seed);

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        for (int b = 0; b < batches.num_batches(); ++b) {
            std::vector<int> idx = batches.batch(b);
            Tensor<float> batch = data::gather_images(train_ds, idx);
            Tensor<float> recon = model.reconstruct(batch, /*train=*/true);
            Tensor<float> loss = nn::mse_loss(recon, batch);
            if (!std::isfinite(loss.item()))
                throw NumericError("phase1: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b));
            optimizer.zero_grad(params);
            backward(loss);
            optimizer.step(params);
            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(idx.size());
        }
        EpochRecord rec;
        rec.phase = "phase1";
        rec.epoch = epoch;
        rec.train_loss = loss_sum / train_ds.size();
        rec.val_loss = validation_mse(model, val_ds, opts.batch_size);
        rec.seconds = elapsed_seconds(start);
        log.records.push_back(rec);
        batches.next_epoch();
    }
    return log;
}

Matrix embed_all(Autoencoder<float>& model, const data::Dataset& ds, int batch_size) {
    NoGradGuard guard;
    const int n = ds.size();
    Matrix out(n, model.latent_dim());
    for (int start = 0; start < n; start += batch_size) {
        const int b = std::min(batch_size, n - start);
        std::vector<int> idx(static_cast<std::size_t>(b));
        std::iota(idx.begin(), idx.end(), start);
        Tensor<float> batch = data::gather_images(ds, idx);
        Tensor<float> z = model.encode(batch, /*train=*/false);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < model.latent_dim(); ++j)
                out(start + i, j) = z.data()[static_cast<std::size_t>(i) * model.latent_dim() + j];
    }
    return out;
}

std::vector<TripletIndex> mine_triplets(const Matrix& embeddings, float threshold,
                                        std::uint64_t seed) {
    const int n = static_cast<int>(embeddings.rows());
    if (n < 3) throw NumericError("mine_triplets: subset must have at least 3 samples");
    const float thr_sq = threshold * threshold;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    data::shuffle_indices(order, rng);

    Eigen::VectorXf sq_norms = embeddings.rowwise().squaredNorm();
    std::vector<TripletIndex> triplets;
    triplets.reserve(static_cast<std::size_t>(n));

    // anchors in shuffled order; one row of squared distances per anchor
    Eigen::VectorXf d2(n);
    for (int a : order) {
        d2.noalias() = sq_norms;
        d2.array() += sq_norms(a);
        d2.noalias() -= 2.0f * (embeddings * embeddings.row(a).transpose());
        d2 = d2.cwiseMax(0.0f);

        TripletIndex t;
        t.anchor = a;
        int nearest = -1;
        float nearest_d = std::numeric_limits<float>::max();
        int farthest = a;
        float farthest_d = -1.0f;
        int candidates = 0;
        for (int j = 0; j < n; ++j) {
            if (j == a) continue;
            const float dj = d2(j);
            if (dj < nearest_d) {
                nearest_d = dj;
                nearest = j;
            }
            if (dj > farthest_d) {
                farthest_d = dj;
                farthest = j;
            }
            if (dj > thr_sq) ++candidates;
        }
        t.positive = nearest;
        if (candidates > 0) {
            int r = static_cast<int>(rng() % static_cast<std::uint64_t>(candidates));
            for (int j = 0; j < n; ++j) {
                if (j == a || d2(j) <= thr_sq) continue;
                if (r-- == 0) {
                    t.negative = j;
                    break;
                }
            }
        } else {
            t.negative = farthest;
            t.fallback = true;
        }
        triplets.push_back(t);
    }
    return triplets;
}

TrainLog train_phase2(Autoencoder<float>& model, const data::Dataset& mining_ds,
                      const data::Dataset& val_ds, nn::Adam<float>& optimizer,
                      const Phase2Options& opts) {
    TrainLog log;
    if (opts.epochs == 0) return log;
    auto params = model.parameters();

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();

        Matrix embeddings = embed_all(model, mining_ds);
        std::vector<TripletIndex> triplets =
            mine_triplets(embeddings, opts.neg_threshold, opts.seed + static_cast<std::uint64_t>(epoch));

        double loss_sum = 0.0;
        const int total = static_cast<int>(triplets.size());
        int batch_index = 0;
        for (int startt = 0; startt < total; startt += opts.batch_size, ++batch_index) {
            const int b = std::min(opts.batch_size, total - startt);
            Tensor<float> anchors =
                gather_triplet_side(mining_ds, triplets, startt, b, &TripletIndex::anchor);
            Tensor<float> positives =
                gather_triplet_side(mining_ds, triplets, startt, b, &TripletIndex::positive);
            Tensor<float> negatives =
                gather_triplet_side(mining_ds, triplets, startt, b, &TripletIndex::negative);

            Tensor<float> za = model.encode(anchors, /*train=*/true);
            Tensor<float> zp = model.encode(positives, /*train=*/true);
            Tensor<float> zn = model.encode(negatives, /*train=*/true);
            Tensor<float> loss = nn::triplet_loss(za, zp, zn, opts.margin);
            if (!std::isfinite(loss.item()))
                throw NumericError("phase2: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_index));
            optimizer.zero_grad(params);
            backward(loss);
            // the triplet loss reaches only the encoder; decoder grads stay
            // zero so the shared optimizer state keeps stepping all parameters
            for (auto& p : params) p.grad_accum();
            optimizer.step(params);
            loss_sum += static_cast<double>(loss.item()) * b;
        }

        // validation triplet loss, mined from the held-out set with the same rules
        double val_loss = 0.0;
        if (val_ds.size() >= 3) {
            NoGradGuard guard;
            Matrix val_emb = embed_all(model, val_ds);
            std::vector<TripletIndex> val_triplets = mine_triplets(
                val_emb, opts.neg_threshold, opts.seed + 0x5eedull + static_cast<std::uint64_t>(epoch));
            double sum = 0.0;
            const int vtotal = static_cast<int>(val_triplets.size());
            for (int startt = 0; startt < vtotal; startt += opts.batch_size) {
                const int b = std::min(opts.batch_size, vtotal - startt);
                Tensor<float> za = model.encode(
                    gather_triplet_side(val_ds, val_triplets, startt, b, &TripletIndex::anchor),
                    false);
                Tensor<float> zp = model.encode(
                    gather_triplet_side(val_ds, val_triplets, startt, b, &TripletIndex::positive),
                    false);
                Tensor<float> zn = model.encode(
                    gather_triplet_side(val_ds, val_triplets, startt, b, &TripletIndex::negative),
                    false);
                sum += static_cast<double>(nn::triplet_loss(za, zp, zn, opts.margin).item()) * b;
            }
            val_loss = sum / vtotal;
        }

        EpochRecord rec;
        rec.phase = "phase2";
        rec.epoch = epoch;
        rec.train_loss = loss_sum / total;
        rec.val_loss = val_loss;
        rec.seconds = elapsed_seconds(start);
        log.records.push_back(rec);
    }
    return log;
}

}  // namespace lc::train
