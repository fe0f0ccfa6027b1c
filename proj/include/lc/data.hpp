#pragma once

#include "lc/tensor.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lc::data {

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Images as [N,1,28,28] floats in [0,1]; labels only ever read by evaluation.
struct Dataset {
    Tensor<float> images;
    std::vector<int> labels;

    int size() const { return images.defined() ? images.shape()[0] : 0; }
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

// Big-endian IDX files: magic 0x00000803 (images) / 0x00000801 (labels).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes a small IDX pair; used by tests and fixtures.
void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::vector<std::uint8_t>>& images,
               const std::vector<std::uint8_t>& labels);

// Seed-deterministic disjoint partition, ceil(0.8 N) / remainder.
std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec);

// Copies the rows at `indices` into a new dataset.
Dataset take(const Dataset& ds, const std::vector<int>& indices);

// Deterministic Fisher-Yates; independent of standard library shuffle details.
void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng);

// Per-epoch batch index lists. Every sample appears exactly once; the final
// batch may be short.
class BatchIterator {
public:
    BatchIterator(int n, int batch_size, bool shuffle, std::uint64_t seed);

    // Index list for batch b of the current epoch.
    std::vector<int> batch(int b) const;
    int num_batches() const;
    void next_epoch();  // reshuffles with a derived seed

private:
    int n_, batch_size_;
    bool shuffle_;
    std::uint64_t seed_;
    int epoch_ = 0;
    std::vector<int> order_;
    void reorder();
};

// Gathers image rows into a [B,1,28,28] batch tensor.
Tensor<float> gather_images(const Dataset& ds, const std::vector<int>& indices);

std::vector<std::size_t> label_histogram(const Dataset& ds, int num_classes = 10);

}  // namespace lc::data
