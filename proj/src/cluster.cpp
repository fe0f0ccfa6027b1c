#include "lc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>

namespace lc::cluster {

namespace {

// Squared distance of every row of X to every row of C, via the Gram
// expansion ||x||^2 - 2 x.c + ||c||^2. Results clamped at zero.
Eigen::MatrixXf sq_distances(const Matrix& X, const Matrix& C) {
    Eigen::VectorXf xn = X.rowwise().squaredNorm();
    Eigen::VectorXf cn = C.rowwise().squaredNorm();
    Eigen::MatrixXf d = (-2.0f * X * C.transpose());
    d.colwise() += xn;
    d.rowwise() += cn.transpose();
    return d.cwiseMax(0.0f);
}

}  // namespace

KMeansResult kmeans_fit(const Matrix& X, int k, std::uint64_t seed, int max_iter, double tol) {
    const int n = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    if (n < k) throw ClusterError("kmeans: need at least k=" + std::to_string(k) + " points");

    std::mt19937_64 rng(seed);
    auto uniform01 = [&rng]() {
        return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    };

    // k-means++ seeding
    Matrix centroids(k, d);
    centroids.row(0) = X.row(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
    Eigen::VectorXd best_sq = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());
    for (int c = 1; c < k; ++c) {
        for (int i = 0; i < n; ++i) {
            const double dist = (X.row(i) - centroids.row(c - 1)).squaredNorm();
            if (dist < best_sq[i]) best_sq[i] = dist;
        }
        const double total = best_sq.sum();
        int pick = n - 1;
        if (total > 0) {
            const double r = uniform01() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += best_sq[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
        }
        centroids.row(c) = X.row(pick);
    }

    KMeansResult result;
    result.assignments.assign(n, 0);
    Eigen::MatrixXd sums(k, d);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k));

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        Eigen::MatrixXf d2 = sq_distances(X, centroids);
        for (int i = 0; i < n; ++i) {
            int best = 0;
            float bestv = d2(i, 0);
            for (int c = 1; c < k; ++c)
                if (d2(i, c) < bestv) {
                    bestv = d2(i, c);
                    best = c;
                }
            result.assignments[static_cast<std::size_t>(i)] = best;
        }

        // empty-cluster repair: seize the point farthest from its centroid
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(result.assignments[i])];
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            int worst = -1;
            float worstv = -1.0f;
            for (int i = 0; i < n; ++i) {
                const int a = result.assignments[static_cast<std::size_t>(i)];
                if (counts[static_cast<std::size_t>(a)] <= 1) continue;  // don't empty another
                const float v = d2(i, a);
                if (v > worstv) {
                    worstv = v;
                    worst = i;
                }
            }
            if (worst >= 0) {
                --counts[static_cast<std::size_t>(result.assignments[worst])];
                result.assignments[static_cast<std::size_t>(worst)] = c;
                ++counts[static_cast<std::size_t>(c)];
            }
        }

        // centroid update, fixed point order, double accumulation
        sums.setZero();
        for (int i = 0; i < n; ++i)
            sums.row(result.assignments[static_cast<std::size_t>(i)]) +=
                X.row(i).cast<double>();
        double max_shift = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;
            Eigen::RowVectorXf updated =
                (sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]))
                    .cast<float>();
            max_shift = std::max(
                max_shift, static_cast<double>((updated - centroids.row(c)).norm()));
            centroids.row(c) = updated;
        }
        if (max_shift < tol) {
            ++iter;
            break;
        }
    }

    // final assignment against converged centroids
    Eigen::MatrixXf d2 = sq_distances(X, centroids);
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        int best = 0;
        float bestv = d2(i, 0);
        for (int c = 1; c < k; ++c)
            if (d2(i, c) < bestv) {
                bestv = d2(i, c);
                best = c;
            }
        result.assignments[static_cast<std::size_t>(i)] = best;
        inertia += static_cast<double>(bestv);
    }
    result.centroids = std::move(centroids);
    result.inertia = inertia;
    result.iterations = iter;
    return result;
}

std::pair<Matrix, PcaModel> pca_fit_transform(const Matrix& X, int n_components) {
    const int n = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    if (n <= n_components)
        throw ClusterError("pca: need more samples than components");

    Eigen::MatrixXd Xd = X.cast<double>();
    Eigen::RowVectorXd mean = Xd.colwise().mean();
    Xd.rowwise() -= mean;

    Eigen::MatrixXd cov = (Xd.transpose() * Xd) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw ClusterError("pca: eigendecomposition failed");

    // Eigen returns ascending eigenvalues; walk from the top.
    const double max_ev = std::max(solver.eigenvalues()(d - 1), 0.0);
    const double rank_tol = max_ev * 1e-12;
    std::vector<int> kept;
    for (int i = d - 1; i >= 0 && static_cast<int>(kept.size()) < n_components; --i) {
        if (solver.eigenvalues()(i) > rank_tol) kept.push_back(i);
    }
    if (static_cast<int>(kept.size()) < n_components)
        std::cerr << "pca: data rank " << kept.size() << " below requested " << n_components
                  << " components; keeping " << kept.size() << "\n";

    PcaModel model;
    model.mean = mean.cast<float>().transpose();
    model.components.resize(static_cast<Eigen::Index>(kept.size()), d);
    model.explained_variances.reserve(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        Eigen::VectorXd dir = solver.eigenvectors().col(kept[r]);
        // deterministic sign: largest-magnitude entry positive
        int arg = 0;
        for (int i = 1; i < d; ++i)
            if (std::abs(dir(i)) > std::abs(dir(arg))) arg = i;
        if (dir(arg) < 0) dir = -dir;
        model.components.row(static_cast<Eigen::Index>(r)) = dir.cast<float>().transpose();
        model.explained_variances.push_back(static_cast<float>(solver.eigenvalues()(kept[r])));
    }

    Matrix projected =
        (Xd * model.components.transpose().cast<double>()).cast<float>();
    return {std::move(projected), std::move(model)};
}

void export_assignments_csv(const std::vector<int>& assignments, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ClusterError("cannot open '" + path + "' for writing");
    os << "index,cluster\n";
    for (std::size_t i = 0; i < assignments.size(); ++i)
        os << i << "," << assignments[i] << "\n";
}

}  // namespace lc::cluster
