#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lc::eval {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MetricError : std::runtime_error {
    explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// Returned when a ratio degenerates (zero within-cluster scatter, coincident
// centroids); keeps every report value finite.
inline constexpr double kDegenerateSentinel = 1e12;

enum class NmiVariant { arithmetic, geometric };

// Mean over samples of (b-a)/max(a,b); Euclidean distances, singleton
// clusters score 0. O(N^2) in blocks.
double silhouette(const Matrix& X, const std::vector<int>& labels);

double davies_bouldin(const Matrix& X, const std::vector<int>& labels);

double calinski_harabasz(const Matrix& X, const std::vector<int>& labels);

// Mutual information normalized by the arithmetic (default) or geometric
// mean of the two entropies; natural log internally, 0/0 -> 0.
double nmi(const std::vector<int>& true_labels, const std::vector<int>& pred_labels,
           NmiVariant variant = NmiVariant::arithmetic);

double ari(const std::vector<int>& true_labels, const std::vector<int>& pred_labels);

// Minimum-cost assignment over a square cost matrix (Jonker-style shortest
// augmenting paths). Returns row -> column.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost);

// Maximum-agreement bijection cluster -> class plus the resulting accuracy.
std::pair<std::vector<int>, double> hungarian_align(const std::vector<int>& true_labels,
                                                    const std::vector<int>& pred_clusters,
                                                    int k = 10);

struct MetricsReport {
    double silhouette = 0.0;
    double davies_bouldin = 0.0;
    double calinski_harabasz = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
    double aligned_accuracy = 0.0;
    int n_samples = 0;
    int k = 0;
};

MetricsReport compute_report(const Matrix& X, const std::vector<int>& true_labels,
                             const std::vector<int>& pred_clusters, int k,
                             NmiVariant variant = NmiVariant::arithmetic);

std::string report_to_json(const MetricsReport& report);

}  // namespace lc::eval
