#include "lc/embed_viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

namespace lc::viz {

namespace {

Eigen::MatrixXf pairwise_sq_distances(const Matrix& X) {
    Eigen::VectorXf sq = X.rowwise().squaredNorm();
    Eigen::MatrixXf d = -2.0f * X * X.transpose();
    d.colwise() += sq;
    d.rowwise() += sq.transpose();
    return d.cwiseMax(0.0f);
}

// Static row partition; each worker owns a contiguous slab, results are
// written to disjoint rows, so the outcome is independent of thread count.
template <typename Fn>
void parallel_rows(int n, Fn&& fn) {
    const int workers =
        std::max(1, std::min<int>(static_cast<int>(std::thread::hardware_concurrency()), 8));
    if (workers == 1 || n < 64) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi]() { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

TsneResult tsne(const Matrix& X, const TsneConfig& cfg) {
    const int n = static_cast<int>(X.rows());
    if (n > 5000) throw VizError("tsne: exact method capped at N=5000");
    if (cfg.perplexity * 3.0 >= static_cast<double>(n))
        throw VizError("tsne: perplexity must be < N/3");
    if (cfg.perplexity <= 0 || cfg.iterations <= 0 || cfg.learning_rate <= 0)
        throw VizError("tsne: config values must be positive");

    Eigen::MatrixXf d2 = pairwise_sq_distances(X);
    const double target_entropy = std::log(cfg.perplexity);

    // conditional distributions with per-point bandwidth search
    Eigen::MatrixXf P(n, n);
    parallel_rows(n, [&](int lo, int hi) {
        std::vector<double> row(static_cast<std::size_t>(n));
        for (int i = lo; i < hi; ++i) {
            double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
            double sum = 0.0;
            for (int step = 0; step < 50; ++step) {
                sum = 0.0;
                double weighted = 0.0;
                for (int j = 0; j < n; ++j) {
                    if (j == i) {
                        row[static_cast<std::size_t>(j)] = 0.0;
                        continue;
                    }
                    const double pj = std::exp(-beta * static_cast<double>(d2(i, j)));
                    row[static_cast<std::size_t>(j)] = pj;
                    sum += pj;
                    weighted += pj * static_cast<double>(d2(i, j));
                }
                const double entropy = std::log(sum) + beta * weighted / sum;
                const double diff = entropy - target_entropy;
                if (std::abs(diff) < 1e-4) break;
                if (diff > 0) {  // entropy too high -> narrow the kernel
                    beta_lo = beta;
                    beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
                } else {
                    beta_hi = beta;
                    beta = 0.5 * (beta + beta_lo);
                }
            }
            for (int j = 0; j < n; ++j)
                P(i, j) = static_cast<float>(row[static_cast<std::size_t>(j)] / sum);
        }
    });

    // symmetrize, floor, and pre-scale
    Eigen::MatrixXf Psym = (P + P.transpose()) / (2.0f * static_cast<float>(n));
    Psym = Psym.cwiseMax(1e-12f);
    P.resize(0, 0);
    d2.resize(0, 0);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> init(0.0, 1e-4);
    Eigen::MatrixXd Y(n, 2), velocity = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
    for (int i = 0; i < n; ++i) {
        Y(i, 0) = init(rng);
        Y(i, 1) = init(rng);
    }

    Eigen::MatrixXd grad(n, 2);
    std::vector<double> row_z(static_cast<std::size_t>(n));
    TsneResult result;

    auto kl_divergence = [&](double z) {
        // KL(P||Q) with q_ij = num_ij / z; evaluated against the true P
        double kl = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double p = static_cast<double>(Psym(i, j));
                const double dy0 = Y(i, 0) - Y(j, 0), dy1 = Y(i, 1) - Y(j, 1);
                const double num = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                const double q = std::max(num / z, 1e-12);
                kl += p * std::log(p / q);
            }
        }
        return kl;
    };

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const double exaggeration = iter < cfg.exaggeration_end ? cfg.early_exaggeration : 1.0;
        const double momentum =
            iter < cfg.exaggeration_end ? cfg.momentum_initial : cfg.momentum_final;

        // Student-t numerators; per-row partial sums keep the reduction order fixed
        parallel_rows(n, [&](int lo, int hi) {
            for (int i = lo; i < hi; ++i) {
                double z = 0.0;
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double dy0 = Y(i, 0) - Y(j, 0), dy1 = Y(i, 1) - Y(j, 1);
                    z += 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                }
                row_z[static_cast<std::size_t>(i)] = z;
            }
        });
        double z_total = 0.0;
        for (int i = 0; i < n; ++i) z_total += row_z[static_cast<std::size_t>(i)];
        const double z_inv = 1.0 / std::max(z_total, 1e-12);

        parallel_rows(n, [&](int lo, int hi) {
            for (int i = lo; i < hi; ++i) {
                double g0 = 0.0, g1 = 0.0;
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double dy0 = Y(i, 0) - Y(j, 0), dy1 = Y(i, 1) - Y(j, 1);
                    const double num = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                    const double q = num * z_inv;
                    const double mult =
                        (exaggeration * static_cast<double>(Psym(i, j)) - q) * num;
                    g0 += mult * dy0;
                    g1 += mult * dy1;
                }
                grad(i, 0) = 4.0 * g0;
                grad(i, 1) = 4.0 * g1;
            }
        });

        // adaptive per-coordinate gains, as in reference t-SNE descent
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < 2; ++c) {
                const bool same_sign = (grad(i, c) > 0.0) == (velocity(i, c) < 0.0);
                gains(i, c) = same_sign ? gains(i, c) + 0.2 : gains(i, c) * 0.8;
                gains(i, c) = std::max(gains(i, c), 0.01);
                velocity(i, c) =
                    momentum * velocity(i, c) - cfg.learning_rate * gains(i, c) * grad(i, c);
                Y(i, c) += velocity(i, c);
            }
        }
        Y.rowwise() -= Y.colwise().mean();

        if (iter == 499 || iter == cfg.iterations - 1) {
            // recompute Z for the current Y before scoring
            double z = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    const double dy0 = Y(i, 0) - Y(j, 0), dy1 = Y(i, 1) - Y(j, 1);
                    z += 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                }
            const double kl = kl_divergence(z);
            if (iter == 499) result.kl_at_500 = kl;
            if (iter == cfg.iterations - 1) result.kl_final = kl;
        }
    }

    result.points = Y.cast<float>();
    return result;
}

void export_embeddings_csv(const Matrix& embeddings, const std::vector<int>& clusters,
                           const std::vector<int>& labels, const std::string& path) {
    const int n = static_cast<int>(embeddings.rows());
    if (static_cast<int>(clusters.size()) != n || static_cast<int>(labels.size()) != n)
        throw VizError("export_embeddings_csv: length mismatch");
    std::ofstream os(path);
    if (!os) throw VizError("cannot open '" + path + "' for writing");
    os << "id";
    for (int j = 0; j < embeddings.cols(); ++j) os << ",z" << j;
    os << ",cluster,label\n";
    os.precision(9);
    for (int i = 0; i < n; ++i) {
        os << i;
        for (int j = 0; j < embeddings.cols(); ++j) os << "," << embeddings(i, j);
        os << "," << clusters[static_cast<std::size_t>(i)] << ","
           << labels[static_cast<std::size_t>(i)] << "\n";
    }
    if (!os) throw VizError("write failure on '" + path + "'");
}

namespace {

const char* kPalette[10] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void render_scatter_svg(const Matrix& points, const std::vector<int>& colors,
                        const std::string& path) {
    const int n = static_cast<int>(points.rows());
    if (static_cast<int>(colors.size()) != n) throw VizError("render_scatter_svg: length mismatch");
    const double width = 800, height = 800, pad = 40;

    double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
    if (n > 0) {
        min_x = points.col(0).minCoeff();
        max_x = points.col(0).maxCoeff();
        min_y = points.col(1).minCoeff();
        max_y = points.col(1).maxCoeff();
        if (max_x == min_x) max_x = min_x + 1;
        if (max_y == min_y) max_y = min_y + 1;
    }
    std::ofstream os(path);
    if (!os) throw VizError("cannot open '" + path + "' for writing");
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
       << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os.precision(6);
    for (int i = 0; i < n; ++i) {
        const double x = pad + (points(i, 0) - min_x) / (max_x - min_x) * (width - 2 * pad);
        const double y = height - pad - (points(i, 1) - min_y) / (max_y - min_y) * (height - 2 * pad);
        const int c = colors[static_cast<std::size_t>(i)];
        os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2.5\" fill=\""
           << kPalette[c % 10] << "\" fill-opacity=\"0.7\"/>\n";
    }
    // legend
    for (int c = 0; c < 10; ++c) {
        const double lx = width - pad - 70, ly = pad + 18.0 * c;
        os << "<rect x=\"" << lx << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
           << kPalette[c] << "\"/>\n"
           << "<text x=\"" << lx + 18 << "\" y=\"" << ly + 11
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << c << "</text>\n";
    }
    os << "</svg>\n";
    if (!os) throw VizError("write failure on '" + path + "'");
}

void render_bar_svg(const std::vector<std::string>& labels, const std::vector<double>& values,
                    const std::string& path) {
    if (labels.size() != values.size()) throw VizError("render_bar_svg: length mismatch");
    const double width = 640, height = 480, pad = 60;
    const int n = static_cast<int>(values.size());
    double vmax = 0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0) vmax = 1;

    std::ofstream os(path);
    if (!os) throw VizError("cannot open '" + path + "' for writing");
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
       << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os.precision(4);
    const double band = n > 0 ? (width - 2 * pad) / n : 1;
    for (int i = 0; i < n; ++i) {
        const double bh = values[static_cast<std::size_t>(i)] / vmax * (height - 2 * pad);
        const double x = pad + band * i + band * 0.15;
        const double y = height - pad - bh;
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << band * 0.7
           << "\" height=\"" << bh << "\" fill=\"" << kPalette[i % 10] << "\"/>\n"
           << "<text x=\"" << x + band * 0.35 << "\" y=\"" << y - 6
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
           << values[static_cast<std::size_t>(i)] << "</text>\n"
           << "<text x=\"" << x + band * 0.35 << "\" y=\"" << height - pad + 20
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
           << labels[static_cast<std::size_t>(i)] << "</text>\n";
    }
    os << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad
       << "\" y2=\"" << height - pad << "\" stroke=\"black\"/>\n"
       << "</svg>\n";
    if (!os) throw VizError("write failure on '" + path + "'");
}

}  // namespace lc::viz
