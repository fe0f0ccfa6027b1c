#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lc::viz {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct VizError : std::runtime_error {
    explicit VizError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;  // applied for the first 250 iterations
    int exaggeration_end = 250;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;       // switches at exaggeration_end
    std::uint64_t seed = 0;
};

struct TsneResult {
    Matrix points;          // [N,2], centered
    double kl_at_500 = 0.0;  // KL(P||Q) snapshot at iteration 500
    double kl_final = 0.0;
};

// Exact O(N^2) t-SNE. Per-point Gaussian bandwidths found by bisection so the
// conditional entropy matches log(perplexity) within 1e-4 (<= 50 steps).
// Output is re-centered every iteration. Requires perplexity < N/3, N <= 5000.
TsneResult tsne(const Matrix& X, const TsneConfig& cfg);

// header: id,z0,...,z{D-1},cluster,label
void export_embeddings_csv(const Matrix& embeddings, const std::vector<int>& clusters,
                           const std::vector<int>& labels, const std::string& path);

// Standalone SVG scatter, fixed 10-color palette, no axes.
void render_scatter_svg(const Matrix& points, const std::vector<int>& colors,
                        const std::string& path);

// Bar chart with value labels above each bar.
void render_bar_svg(const std::vector<std::string>& labels, const std::vector<double>& values,
                    const std::string& path);

}  // namespace lc::viz
