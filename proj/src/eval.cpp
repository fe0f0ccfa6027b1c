#include "lc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

namespace lc::eval {

namespace {

// Remaps arbitrary label values to 0..k-1 and returns cluster sizes.
std::pair<std::vector<int>, int> compact_labels(const std::vector<int>& labels) {
    std::map<int, int> remap;
    for (int l : labels) remap.emplace(l, 0);
    int next = 0;
    for (auto& [key, id] : remap) id = next++;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = remap[labels[i]];
    return {std::move(out), next};
}

std::vector<std::int64_t> cluster_sizes(const std::vector<int>& labels, int k) {
    std::vector<std::int64_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    return sizes;
}

Eigen::MatrixXd centroids_of(const Matrix& X, const std::vector<int>& labels, int k) {
    const int d = static_cast<int>(X.cols());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, d);
    auto sizes = cluster_sizes(labels, k);
    for (int i = 0; i < static_cast<int>(X.rows()); ++i)
        c.row(labels[static_cast<std::size_t>(i)]) += X.row(i).cast<double>();
    for (int j = 0; j < k; ++j)
        if (sizes[static_cast<std::size_t>(j)] > 0)
            c.row(j) /= static_cast<double>(sizes[static_cast<std::size_t>(j)]);
    return c;
}

}  // namespace

double silhouette(const Matrix& X, const std::vector<int>& labels) {
    const int n = static_cast<int>(X.rows());
    if (static_cast<int>(labels.size()) != n) throw MetricError("silhouette: length mismatch");
    auto [compact, k] = compact_labels(labels);
    if (k < 2) throw MetricError("silhouette: needs at least 2 clusters");
    auto sizes = cluster_sizes(compact, k);

    // double precision throughout: the Gram expansion cancels catastrophically
    // in float for nearby points
    Eigen::MatrixXd Xd = X.cast<double>();
    Eigen::VectorXd sq_norms = Xd.rowwise().squaredNorm();
    const int block = 256;
    double total = 0.0;
    std::vector<double> cluster_sum(static_cast<std::size_t>(k));
    for (int start = 0; start < n; start += block) {
        const int rows = std::min(block, n - start);
        // Euclidean distances from this block to every point
        Eigen::MatrixXd d2 = (-2.0 * Xd.middleRows(start, rows) * Xd.transpose());
        d2.colwise() += sq_norms.segment(start, rows);
        d2.rowwise() += sq_norms.transpose();
        for (int r = 0; r < rows; ++r) {
            const int i = start + r;
            const int own = compact[static_cast<std::size_t>(i)];
            if (sizes[static_cast<std::size_t>(own)] == 1) continue;  // singleton scores 0
            std::fill(cluster_sum.begin(), cluster_sum.end(), 0.0);
            for (int j = 0; j < n; ++j)
                cluster_sum[static_cast<std::size_t>(compact[static_cast<std::size_t>(j)])] +=
                    std::sqrt(std::max(0.0, static_cast<double>(d2(r, j))));
            const double a = cluster_sum[static_cast<std::size_t>(own)] /
                             static_cast<double>(sizes[static_cast<std::size_t>(own)] - 1);
            double b = std::numeric_limits<double>::max();
            for (int c = 0; c < k; ++c) {
                if (c == own || sizes[static_cast<std::size_t>(c)] == 0) continue;
                b = std::min(b, cluster_sum[static_cast<std::size_t>(c)] /
                                    static_cast<double>(sizes[static_cast<std::size_t>(c)]));
            }
            const double denom = std::max(a, b);
            if (denom > 0) total += (b - a) / denom;
        }
    }
    return total / static_cast<double>(n);
}

double davies_bouldin(const Matrix& X, const std::vector<int>& labels) {
    const int n = static_cast<int>(X.rows());
    if (static_cast<int>(labels.size()) != n) throw MetricError("davies_bouldin: length mismatch");
    auto [compact, k] = compact_labels(labels);
    if (k < 2) throw MetricError("davies_bouldin: needs at least 2 clusters");
    auto sizes = cluster_sizes(compact, k);
    Eigen::MatrixXd cent = centroids_of(X, compact, k);

    std::vector<double> scatter(static_cast<std::size_t>(k), 0.0);
    for (int i = 0; i < n; ++i) {
        const int c = compact[static_cast<std::size_t>(i)];
        scatter[static_cast<std::size_t>(c)] +=
            (X.row(i).cast<double>() - cent.row(c)).norm();
    }
    for (int c = 0; c < k; ++c)
        if (sizes[static_cast<std::size_t>(c)] > 0)
            scatter[static_cast<std::size_t>(c)] /=
                static_cast<double>(sizes[static_cast<std::size_t>(c)]);

    double total = 0.0;
    bool warned = false;
    for (int i = 0; i < k; ++i) {
        double worst = 0.0;
        for (int j = 0; j < k; ++j) {
            if (i == j) continue;
            const double dist = (cent.row(i) - cent.row(j)).norm();
            double ratio;
            if (dist <= 0.0) {
                ratio = kDegenerateSentinel;
                if (!warned) {
                    std::cerr << "davies_bouldin: coincident centroids, using sentinel\n";
                    warned = true;
                }
            } else {
                ratio = (scatter[static_cast<std::size_t>(i)] +
                         scatter[static_cast<std::size_t>(j)]) /
                        dist;
            }
            worst = std::max(worst, ratio);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

double calinski_harabasz(const Matrix& X, const std::vector<int>& labels) {
    const int n = static_cast<int>(X.rows());
    if (static_cast<int>(labels.size()) != n)
        throw MetricError("calinski_harabasz: length mismatch");
    auto [compact, k] = compact_labels(labels);
    if (k < 2 || k >= n) throw MetricError("calinski_harabasz: requires 2 <= k < N");
    auto sizes = cluster_sizes(compact, k);
    Eigen::MatrixXd cent = centroids_of(X, compact, k);
    Eigen::RowVectorXd grand = Eigen::RowVectorXd::Zero(X.cols());
    for (int i = 0; i < n; ++i) grand += X.row(i).cast<double>();
    grand /= static_cast<double>(n);

    double between = 0.0;
    for (int c = 0; c < k; ++c)
        between += static_cast<double>(sizes[static_cast<std::size_t>(c)]) *
                   (cent.row(c) - grand).squaredNorm();
    double within = 0.0;
    for (int i = 0; i < n; ++i)
        within += (X.row(i).cast<double>() - cent.row(compact[static_cast<std::size_t>(i)]))
                      .squaredNorm();

    if (within <= 0.0) {
        std::cerr << "calinski_harabasz: zero within-cluster scatter, using sentinel\n";
        return kDegenerateSentinel;
    }
    return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

namespace {

struct Contingency {
    std::vector<std::vector<std::int64_t>> counts;  // [ku][kv]
    std::vector<std::int64_t> row_sums, col_sums;
    std::int64_t n = 0;
};

Contingency contingency_table(const std::vector<int>& u, const std::vector<int>& v) {
    auto [cu, ku] = compact_labels(u);
    auto [cv, kv] = compact_labels(v);
    Contingency t;
    t.counts.assign(static_cast<std::size_t>(ku),
                    std::vector<std::int64_t>(static_cast<std::size_t>(kv), 0));
    t.row_sums.assign(static_cast<std::size_t>(ku), 0);
    t.col_sums.assign(static_cast<std::size_t>(kv), 0);
    t.n = static_cast<std::int64_t>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        ++t.counts[static_cast<std::size_t>(cu[i])][static_cast<std::size_t>(cv[i])];
        ++t.row_sums[static_cast<std::size_t>(cu[i])];
        ++t.col_sums[static_cast<std::size_t>(cv[i])];
    }
    return t;
}

double entropy_of(const std::vector<std::int64_t>& sums, std::int64_t n) {
    double h = 0.0;
    for (std::int64_t s : sums) {
        if (s == 0) continue;
        const double p = static_cast<double>(s) / static_cast<double>(n);
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

double nmi(const std::vector<int>& true_labels, const std::vector<int>& pred_labels,
           NmiVariant variant) {
    if (true_labels.size() != pred_labels.size() || true_labels.empty())
        throw MetricError("nmi: label vectors must have equal nonzero length");
    Contingency t = contingency_table(true_labels, pred_labels);

    double mi = 0.0;
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
            const std::int64_t nij = t.counts[i][j];
            if (nij == 0) continue;
            const double pij = static_cast<double>(nij) / static_cast<double>(t.n);
            mi += pij * std::log(static_cast<double>(nij) * static_cast<double>(t.n) /
                                 (static_cast<double>(t.row_sums[i]) *
                                  static_cast<double>(t.col_sums[j])));
        }
    }
    const double hu = entropy_of(t.row_sums, t.n);
    const double hv = entropy_of(t.col_sums, t.n);
    const double denom = variant == NmiVariant::arithmetic ? 0.5 * (hu + hv)
                                                           : std::sqrt(hu * hv);
    if (denom <= 0.0) return 0.0;  // 0/0 convention
    return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(const std::vector<int>& true_labels, const std::vector<int>& pred_labels) {
    if (true_labels.size() != pred_labels.size() || true_labels.size() < 2)
        throw MetricError("ari: label vectors must have equal length >= 2");
    Contingency t = contingency_table(true_labels, pred_labels);

    auto choose2 = [](std::int64_t m) { return m * (m - 1) / 2; };
    std::int64_t sum_ij = 0, sum_a = 0, sum_b = 0;
    for (std::size_t i = 0; i < t.counts.size(); ++i)
        for (std::int64_t nij : t.counts[i]) sum_ij += choose2(nij);
    for (std::int64_t a : t.row_sums) sum_a += choose2(a);
    for (std::int64_t b : t.col_sums) sum_b += choose2(b);
    const double total = static_cast<double>(choose2(t.n));
    const double expected = static_cast<double>(sum_a) * static_cast<double>(sum_b) / total;
    const double max_index = 0.5 * static_cast<double>(sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both labelings put all pairs together
    return (static_cast<double>(sum_ij) - expected) / (max_index - expected);
}

std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0),
        v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1,
                                 std::numeric_limits<double>::infinity());
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(
                                       j - 1)] -
                                   u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<std::size_t>(j)])
            row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

std::pair<std::vector<int>, double> hungarian_align(const std::vector<int>& true_labels,
                                                    const std::vector<int>& pred_clusters,
                                                    int k) {
    if (true_labels.size() != pred_clusters.size())
        throw MetricError("hungarian_align: length mismatch");
    std::vector<std::vector<std::int64_t>> counts(
        static_cast<std::size_t>(k), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
    std::int64_t max_count = 0;
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int c = pred_clusters[i], t = true_labels[i];
        if (c < 0 || c >= k || t < 0 || t >= k)
            throw MetricError("hungarian_align: label outside 0..k-1");
        max_count = std::max(max_count, ++counts[static_cast<std::size_t>(c)]
                                                [static_cast<std::size_t>(t)]);
    }
    // maximize agreement == minimize (max - count)
    std::vector<std::vector<double>> cost(static_cast<std::size_t>(k),
                                          std::vector<double>(static_cast<std::size_t>(k)));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = static_cast<double>(
                max_count - counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);

    std::vector<int> mapping = hungarian_min_cost(cost);
    std::int64_t correct = 0;
    for (int i = 0; i < k; ++i)
        correct += counts[static_cast<std::size_t>(i)]
                         [static_cast<std::size_t>(mapping[static_cast<std::size_t>(i)])];
    const double accuracy =
        static_cast<double>(correct) / static_cast<double>(true_labels.size());
    return {std::move(mapping), accuracy};
}

MetricsReport compute_report(const Matrix& X, const std::vector<int>& true_labels,
                             const std::vector<int>& pred_clusters, int k, NmiVariant variant) {
    MetricsReport r;
    r.silhouette = silhouette(X, pred_clusters);
    r.davies_bouldin = davies_bouldin(X, pred_clusters);
    r.calinski_harabasz = calinski_harabasz(X, pred_clusters);
    r.nmi = nmi(true_labels, pred_clusters, variant);
    r.ari = ari(true_labels, pred_clusters);
    r.aligned_accuracy = hungarian_align(true_labels, pred_clusters, k).second;
    r.n_samples = static_cast<int>(X.rows());
    r.k = k;
    return r;
}

std::string report_to_json(const MetricsReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << "{\n"
       << "  \"silhouette\": " << r.silhouette << ",\n"
       << "  \"davies_bouldin\": " << r.davies_bouldin << ",\n"
       << "  \"calinski_harabasz\": " << r.calinski_harabasz << ",\n"
       << "  \"nmi\": " << r.nmi << ",\n"
       << "  \"ari\": " << r.ari << ",\n"
       << "  \"aligned_accuracy\": " << r.aligned_accuracy << ",\n"
       << "  \"n_samples\": " << r.n_samples << ",\n"
       << "  \"k\": " << r.k << "\n"
       << "}\n";
    return os.str();
}

}  // namespace lc::eval
