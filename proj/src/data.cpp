#include "lc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace lc::data {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& is, const std::string& what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated IDX header: " + what);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imf(images_path, std::ios::binary);
    if (!imf) throw DataError("cannot open image file '" + images_path + "'");
    if (read_be32(imf, images_path) != kImagesMagic)
        throw DataError("bad magic in image file '" + images_path + "'");
    const std::uint32_t n = read_be32(imf, images_path);
    const std::uint32_t rows = read_be32(imf, images_path);
    const std::uint32_t cols = read_be32(imf, images_path);
    if (rows != 28 || cols != 28)
        throw DataError("expected 28x28 images, file has " + std::to_string(rows) + "x" +
                        std::to_string(cols));

    std::ifstream lbf(labels_path, std::ios::binary);
    if (!lbf) throw DataError("cannot open label file '" + labels_path + "'");
    if (read_be32(lbf, labels_path) != kLabelsMagic)
        throw DataError("bad magic in label file '" + labels_path + "'");
    const std::uint32_t nl = read_be32(lbf, labels_path);
    if (n != nl)
        throw DataError("image/label count mismatch: " + std::to_string(n) + " vs " +
                        std::to_string(nl));

    const std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
    std::vector<std::uint8_t> raw(pixels);
    if (!imf.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels)))
        throw DataError("truncated image payload in '" + images_path + "'");

    std::vector<std::uint8_t> raw_labels(n);
    if (!lbf.read(reinterpret_cast<char*>(raw_labels.data()), n))
        throw DataError("truncated label payload in '" + labels_path + "'");

    Dataset ds;
    ds.images = Tensor<float>::zeros({static_cast<int>(n), 1, 28, 28});
    float* dst = ds.images.data();
    for (std::size_t i = 0; i < pixels; ++i) dst[i] = static_cast<float>(raw[i]) / 255.0f;
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (raw_labels[i] > 9)
            throw DataError("label out of range at index " + std::to_string(i));
        ds.labels[i] = raw_labels[i];
    }
    return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::vector<std::uint8_t>>& images,
               const std::vector<std::uint8_t>& labels) {
    if (images.size() != labels.size()) throw DataError("write_idx: count mismatch");
    std::ofstream imf(images_path, std::ios::binary);
    write_be32(imf, kImagesMagic);
    write_be32(imf, static_cast<std::uint32_t>(images.size()));
    write_be32(imf, 28);
    write_be32(imf, 28);
    for (const auto& img : images) {
        if (img.size() != 784) throw DataError("write_idx: image must have 784 pixels");
        imf.write(reinterpret_cast<const char*>(img.data()), 784);
    }
    std::ofstream lbf(labels_path, std::ios::binary);
    write_be32(lbf, kLabelsMagic);
    write_be32(lbf, static_cast<std::uint32_t>(labels.size()));
    lbf.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

Dataset take(const Dataset& ds, const std::vector<int>& indices) {
    Dataset out;
    out.images = gather_images(ds, indices);
    out.labels.reserve(indices.size());
    for (int i : indices) out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    const int n = ds.size();
    if (n < 2) throw DataError("split: need at least 2 samples");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(spec.seed);
    shuffle_indices(idx, rng);
    const int n_train =
        static_cast<int>(std::ceil(spec.train_fraction * static_cast<double>(n)));
    std::vector<int> train_idx(idx.begin(), idx.begin() + n_train);
    std::vector<int> val_idx(idx.begin() + n_train, idx.end());
    return {take(ds, train_idx), take(ds, val_idx)};
}

Tensor<float> gather_images(const Dataset& ds, const std::vector<int>& indices) {
    const int b = static_cast<int>(indices.size());
    Tensor<float> batch = Tensor<float>::zeros({b, 1, 28, 28});
    const float* src = ds.images.data();
    float* dst = batch.data();
    for (int i = 0; i < b; ++i)
        std::copy_n(src + static_cast<std::size_t>(indices[static_cast<std::size_t>(i)]) * 784,
                    784, dst + static_cast<std::size_t>(i) * 784);
    return batch;
}

BatchIterator::BatchIterator(int n, int batch_size, bool shuffle, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), shuffle_(shuffle), seed_(seed) {
    if (batch_size < 1) throw DataError("batch size must be >= 1");
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    reorder();
}

void BatchIterator::reorder() {
    std::iota(order_.begin(), order_.end(), 0);
    if (shuffle_) {
        // epoch mixed into the seed so each epoch gets a distinct order
        std::mt19937_64 rng(seed_ + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch_ + 1));
        shuffle_indices(order_, rng);
    }
}

int BatchIterator::num_batches() const { return (n_ + batch_size_ - 1) / batch_size_; }

std::vector<int> BatchIterator::batch(int b) const {
    const int start = b * batch_size_;
    const int end = std::min(start + batch_size_, n_);
    return std::vector<int>(order_.begin() + start, order_.begin() + end);
}

void BatchIterator::next_epoch() {
    ++epoch_;
    reorder();
}

std::vector<std::size_t> label_histogram(const Dataset& ds, int num_classes) {
    std::vector<std::size_t> hist(static_cast<std::size_t>(num_classes), 0);
    for (int l : ds.labels) ++hist[static_cast<std::size_t>(l)];
    return hist;
}

}  // namespace lc::data
