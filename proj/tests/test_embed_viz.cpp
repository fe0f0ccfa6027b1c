#include "lc/embed_viz.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <vector>

using lc::viz::Matrix;
using lc::viz::TsneConfig;
using lc::viz::VizError;

namespace {

Matrix two_blobs_64d(int per_blob, float separation, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> noise(0.0f, 1.0f);
    Matrix X(2 * per_blob, 64);
    for (int i = 0; i < 2 * per_blob; ++i)
        for (int d = 0; d < 64; ++d)
            X(i, d) = (i < per_blob && d == 0 ? separation : 0.0f) + noise(rng);
    return X;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// minimal XML well-formedness: tags balance and nest properly
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::regex tag_re("<(/?)([A-Za-z?][A-Za-z0-9?]*)[^>]*?(/?)>");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), tag_re);
         it != std::sregex_iterator(); ++it) {
        const std::string name = (*it)[2];
        if (name[0] == '?') continue;  // declaration
        if ((*it)[1].length() > 0) {
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if ((*it)[3].length() == 0) {
            stack.push_back(name);
        }
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("tsne rejects invalid configurations") {
    Matrix X = Matrix::Random(20, 4);
    TsneConfig cfg;
    cfg.perplexity = 7.0;  // >= 20/3
    CHECK_THROWS_AS(lc::viz::tsne(X, cfg), VizError);
    cfg.perplexity = 5.0;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(lc::viz::tsne(X, cfg), VizError);
    cfg.learning_rate = 200.0;
    cfg.iterations = -1;
    CHECK_THROWS_AS(lc::viz::tsne(X, cfg), VizError);
    CHECK_THROWS_AS(lc::viz::tsne(Matrix::Random(5001, 2), TsneConfig{}), VizError);
}

TEST_CASE("three equidistant points map to a near-equilateral triangle") {
    Matrix X(3, 2);
    const float h = std::sqrt(3.0f) / 2.0f;
    X << 0, 0, 1, 0, 0.5f, h;
    TsneConfig cfg;
    cfg.perplexity = 0.9;
    cfg.seed = 1;
    auto res = lc::viz::tsne(X, cfg);
    REQUIRE(res.points.rows() == 3);
    auto d = [&](int i, int j) { return (res.points.row(i) - res.points.row(j)).norm(); };
    const float dmax = std::max({d(0, 1), d(0, 2), d(1, 2)});
    const float dmin = std::min({d(0, 1), d(0, 2), d(1, 2)});
    CHECK(dmin > 0.0f);
    CHECK(dmax / dmin < 2.0f);
}

TEST_CASE("separated 64-d blobs stay linearly separable in 2-d") {
    auto X = two_blobs_64d(100, 20.0f, 5);
    TsneConfig cfg;
    cfg.seed = 2;
    auto res = lc::viz::tsne(X, cfg);

    // project onto the axis through the class means, threshold at the midpoint
    Eigen::Vector2f mean_a = Eigen::Vector2f::Zero(), mean_b = Eigen::Vector2f::Zero();
    for (int i = 0; i < 100; ++i) mean_a += res.points.row(i).transpose();
    for (int i = 100; i < 200; ++i) mean_b += res.points.row(i).transpose();
    mean_a /= 100.0f;
    mean_b /= 100.0f;
    const Eigen::Vector2f axis = mean_b - mean_a;
    const float mid = axis.dot((mean_a + mean_b) / 2.0f);
    int correct = 0;
    for (int i = 0; i < 200; ++i) {
        const float proj = axis.dot(res.points.row(i).transpose());
        if ((proj < mid) == (i < 100)) ++correct;
    }
    CHECK(correct == 200);

    // weak monotone trend of the objective
    CHECK(res.kl_final < res.kl_at_500);
    CHECK(res.kl_final > 0.0);

    // per-iteration centering
    CHECK(std::abs(res.points.col(0).mean()) < 1e-3f);
    CHECK(std::abs(res.points.col(1).mean()) < 1e-3f);
}

TEST_CASE("bandwidth bisection reaches the target log-perplexity") {
    // replicates the search criterion on the same data the implementation sees
    auto X = two_blobs_64d(40, 8.0f, 7);
    const int n = static_cast<int>(X.rows());
    const double target = std::log(30.0);
    for (int i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double entropy = 0.0;
        for (int step = 0; step < 50; ++step) {
            double sum = 0.0, weighted = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d2 = (X.row(i) - X.row(j)).squaredNorm();
                const double p = std::exp(-beta * d2);
                sum += p;
                weighted += p * d2;
            }
            entropy = std::log(sum) + beta * weighted / sum;
            if (std::abs(entropy - target) < 1e-4) break;
            if (entropy > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        CHECK(std::abs(entropy - target) < 1e-3);
    }
}

TEST_CASE("tsne is deterministic for a fixed seed") {
    auto X = two_blobs_64d(30, 10.0f, 9);
    TsneConfig cfg;
    cfg.perplexity = 10.0;
    cfg.iterations = 600;
    cfg.seed = 3;
    auto a = lc::viz::tsne(X, cfg);
    auto b = lc::viz::tsne(X, cfg);
    CHECK((a.points - b.points).cwiseAbs().maxCoeff() == 0.0f);
    CHECK(a.kl_at_500 == b.kl_at_500);
    CHECK(a.kl_final == b.kl_final);
}

TEST_CASE("embeddings csv round-trips") {
    Matrix E(2, 4);
    E << 0.125f, -3.5f, 0.0078125f, 2.0f, 1.5f, -0.25f, 9.0f, -1.0f;
    const auto path = temp_path("lc_embed.csv");
    lc::viz::export_embeddings_csv(E, {1, 0}, {7, 3}, path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "id,z0,z1,z2,z3,cluster,label");
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 7);
        CHECK(std::stoi(cells[0]) == rows);
        for (int j = 0; j < 4; ++j)
            CHECK(std::stod(cells[static_cast<std::size_t>(1 + j)]) ==
                  doctest::Approx(E(rows, j)).epsilon(1e-6));
        CHECK(std::stoi(cells[5]) == (rows == 0 ? 1 : 0));
        CHECK(std::stoi(cells[6]) == (rows == 0 ? 7 : 3));
        ++rows;
    }
    CHECK(rows == 2);
    std::remove(path.c_str());
}

TEST_CASE("embeddings csv rejects inconsistent lengths") {
    CHECK_THROWS_AS(
        lc::viz::export_embeddings_csv(Matrix::Zero(2, 3), {0}, {0, 1}, temp_path("lc_bad.csv")),
        VizError);
}

TEST_CASE("empty scatter is still a valid svg") {
    const auto path = temp_path("lc_scatter_empty.svg");
    lc::viz::render_scatter_svg(Matrix(0, 2), {}, path);
    const auto text = slurp(path);
    CHECK(text.find("<svg") != std::string::npos);
    CHECK(xml_well_formed(text));
    std::remove(path.c_str());
}

TEST_CASE("scatter svg is well-formed and colors every point") {
    Matrix pts(30, 2);
    std::mt19937 rng(11);
    std::normal_distribution<float> dist(0.0f, 5.0f);
    std::vector<int> colors;
    for (int i = 0; i < 30; ++i) {
        pts(i, 0) = dist(rng);
        pts(i, 1) = dist(rng);
        colors.push_back(i % 10);
    }
    const auto path = temp_path("lc_scatter.svg");
    lc::viz::render_scatter_svg(pts, colors, path);
    const auto text = slurp(path);
    CHECK(xml_well_formed(text));
    std::size_t circles = 0, pos = 0;
    while ((pos = text.find("<circle", pos)) != std::string::npos) {
        ++circles;
        ++pos;
    }
    CHECK(circles == 30);
    for (int c = 0; c < 10; ++c) {
        // every palette entry appears (points cycle through all ten colors)
        CHECK(text.find("#1f77b4") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("bar chart of the three silhouette scores has the tallest bar first") {
    const auto path = temp_path("lc_bars.svg");
    lc::viz::render_bar_svg({"triplet_ae", "raw_pixels", "pca50"}, {0.2061, 0.0589, 0.0845},
                            path);
    const auto text = slurp(path);
    CHECK(xml_well_formed(text));
    for (const char* v : {"0.2061", "0.0589", "0.0845"})
        CHECK(text.find(v) != std::string::npos);

    // pull the bar rect heights in order
    std::regex rect_re("<rect x=\"[^\"]*\" y=\"[^\"]*\" width=\"[^\"]*\" height=\"([0-9.]+)\"");
    std::vector<double> heights;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), rect_re);
         it != std::sregex_iterator(); ++it)
        heights.push_back(std::stod((*it)[1]));
    REQUIRE(heights.size() == 3);
    CHECK(heights[0] > heights[1]);
    CHECK(heights[0] > heights[2]);
    CHECK(heights[2] > heights[1]);
    std::remove(path.c_str());
}
