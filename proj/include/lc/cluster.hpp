#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lc::cluster {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ClusterError : std::runtime_error {
    explicit ClusterError(const std::string& msg) : std::runtime_error(msg) {}
};

struct KMeansResult {
    Matrix centroids;              // [k,D]
    std::vector<int> assignments;  // [N], values in 0..k-1
    double inertia = 0.0;          // sum of squared distances to assigned centroid
    int iterations = 0;
};

// k-means++ seeding, Lloyd iterations until max centroid shift < tol.
// Empty clusters are repaired by seizing the point farthest from its centroid.
// Single initialization per seed; fully deterministic.
KMeansResult kmeans_fit(const Matrix& X, int k, std::uint64_t seed, int max_iter = 300,
                        double tol = 1e-4);

struct PcaModel {
    Eigen::VectorXf mean;            // [D]
    Matrix components;               // [n_components, D], orthonormal rows
    std::vector<float> explained_variances;  // decreasing
};

// Center, project onto the top right singular directions (covariance
// eigenvectors), decreasing eigenvalue order. Sign fixed so the
// largest-magnitude entry of each direction is positive. If the data rank is
// below n_components only the available directions are kept.
std::pair<Matrix, PcaModel> pca_fit_transform(const Matrix& X, int n_components = 50);

// CSV export: header "index,cluster", one row per sample.
void export_assignments_csv(const std::vector<int>& assignments, const std::string& path);

}  // namespace lc::cluster
