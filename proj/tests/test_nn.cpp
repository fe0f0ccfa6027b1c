#include "lc/nn.hpp"

#include "doctest.h"
#include "grad_check.hpp"

#include <cmath>
#include <random>

using lc::Tensor;
namespace nn = lc::nn;

TEST_CASE("conv2d output spatial dims") {
    std::mt19937 rng(1);
    nn::Conv2dLayer<double> c1(1, 32, rng);
    nn::Conv2dLayer<double> c2(32, 64, rng);
    auto x = random_tensor({1, 1, 28, 28}, rng, false);
    auto y = nn::conv2d_forward(x, c1);
    CHECK(y.shape() == lc::Shape{1, 32, 14, 14});
    auto z = nn::conv2d_forward(y, c2);
    CHECK(z.shape() == lc::Shape{1, 64, 7, 7});
}

TEST_CASE("conv2d channel mismatch") {
    std::mt19937 rng(1);
    nn::Conv2dLayer<double> c(4, 8, rng);
    auto x = random_tensor({1, 3, 8, 8}, rng, false);
    CHECK_THROWS_AS(nn::conv2d_forward(x, c), lc::DimensionError);
}

// Independent oracle: each output equals the sum over the padded receptive
// field, computed by direct summation.
TEST_CASE("conv2d ones-kernel matches direct summation") {
    std::mt19937 rng(2);
    nn::Conv2dLayer<double> c(1, 1, rng);
    for (std::size_t i = 0; i < c.weight.size(); ++i) c.weight.data()[i] = 1.0;
    c.bias.data()[0] = 0.0;

    auto x = random_tensor({1, 1, 4, 4}, rng, false);
    auto y = nn::conv2d_forward(x, c);
    CHECK(y.shape() == lc::Shape{1, 1, 2, 2});
    for (int oy = 0; oy < 2; ++oy) {
        for (int ox = 0; ox < 2; ++ox) {
            double expected = 0.0;
            for (int kr = 0; kr < 3; ++kr)
                for (int kc = 0; kc < 3; ++kc) {
                    const int iy = oy * 2 - 1 + kr, ix = ox * 2 - 1 + kc;
                    if (iy >= 0 && iy < 4 && ix >= 0 && ix < 4) expected += x.data()[iy * 4 + ix];
                }
            CHECK(y.data()[oy * 2 + ox] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937 rng(3);
    nn::Conv2dLayer<double> c(2, 3, rng);
    auto x = random_tensor({2, 2, 5, 5}, rng);
    const double err = grad_check_max_rel_error<>(
        {x, c.weight, c.bias},
        [&]() { return lc::mean(lc::square(nn::conv2d_forward(x, c))); });
    CHECK(err < 1e-4);
}

TEST_CASE("conv_transpose2d doubles spatial dims") {
    std::mt19937 rng(4);
    nn::ConvTranspose2dLayer<double> t1(64, 32, rng);
    nn::ConvTranspose2dLayer<double> t2(32, 1, rng);
    auto x = random_tensor({1, 64, 7, 7}, rng, false);
    auto y = nn::conv_transpose2d_forward(x, t1);
    CHECK(y.shape() == lc::Shape{1, 32, 14, 14});
    auto z = nn::conv_transpose2d_forward(y, t2);
    CHECK(z.shape() == lc::Shape{1, 1, 28, 28});
}

// Scatter-add oracle: a delta input stamps the kernel at the matching
// output location.
TEST_CASE("conv_transpose2d of delta input stamps the kernel") {
    std::mt19937 rng(5);
    nn::ConvTranspose2dLayer<double> t(1, 1, rng);
    t.bias.data()[0] = 0.0;

    auto x = lc::Tensor<double>::zeros({1, 1, 4, 4});
    const int dy = 1, dx = 2;
    x.data()[dy * 4 + dx] = 1.0;
    auto y = nn::conv_transpose2d_forward(x, t);
    CHECK(y.shape() == lc::Shape{1, 1, 8, 8});

    std::vector<double> expected(64, 0.0);
    for (int kr = 0; kr < 3; ++kr)
        for (int kc = 0; kc < 3; ++kc) {
            const int oy = dy * 2 - 1 + kr, ox = dx * 2 - 1 + kc;
            if (oy >= 0 && oy < 8 && ox >= 0 && ox < 8)
                expected[oy * 8 + ox] = t.weight.data()[kr * 3 + kc];
        }
    for (int i = 0; i < 64; ++i) CHECK(y.data()[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("conv_transpose2d gradients match finite differences") {
    std::mt19937 rng(6);
    nn::ConvTranspose2dLayer<double> t(3, 2, rng);
    auto x = random_tensor({2, 3, 4, 4}, rng);
    const double err = grad_check_max_rel_error<>(
        {x, t.weight, t.bias},
        [&]() { return lc::mean(lc::square(nn::conv_transpose2d_forward(x, t))); });
    CHECK(err < 1e-4);
}

TEST_CASE("conv then conv_transpose restores spatial dims") {
    std::mt19937 rng(7);
    nn::Conv2dLayer<double> c1(1, 4, rng), c2(4, 8, rng);
    nn::ConvTranspose2dLayer<double> t1(8, 4, rng), t2(4, 1, rng);
    auto x = random_tensor({1, 1, 28, 28}, rng, false);
    auto z = nn::conv2d_forward(nn::conv2d_forward(x, c1), c2);
    CHECK(z.shape() == lc::Shape{1, 8, 7, 7});
    auto y = nn::conv_transpose2d_forward(nn::conv_transpose2d_forward(z, t1), t2);
    CHECK(y.shape() == lc::Shape{1, 1, 28, 28});
}

TEST_CASE("batchnorm2d train mode statistics") {
    nn::BatchNorm2dLayer<double> bn(2);
    std::mt19937 rng(8);
    auto x = random_tensor({4, 2, 3, 3}, rng, false, 2.0);
    auto y = nn::batchnorm2d_forward(x, bn, true);

    // per-channel batch mean ~ 0, variance ~ 1 (gamma=1, beta=0)
    for (int c = 0; c < 2; ++c) {
        double mu = 0, var = 0;
        int count = 0;
        for (int n = 0; n < 4; ++n)
            for (int j = 0; j < 9; ++j) {
                mu += y.data()[(n * 2 + c) * 9 + j];
                ++count;
            }
        mu /= count;
        for (int n = 0; n < 4; ++n)
            for (int j = 0; j < 9; ++j) {
                const double d = y.data()[(n * 2 + c) * 9 + j] - mu;
                var += d * d;
            }
        var /= count;
        CHECK(std::abs(mu) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batchnorm2d constant channel maps to zeros in train mode") {
    nn::BatchNorm2dLayer<double> bn(1);
    auto x = lc::Tensor<double>::zeros({2, 1, 2, 2});
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = 7.5;
    auto y = nn::batchnorm2d_forward(x, bn, true);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y.data()[i]) < 1e-6);
}

TEST_CASE("batchnorm2d eval mode with unit running stats is identity") {
    nn::BatchNorm2dLayer<double> bn(2);
    bn.eps = 0.0;
    std::mt19937 rng(9);
    auto x = random_tensor({2, 2, 3, 3}, rng, false);
    auto y = nn::batchnorm2d_forward(x, bn, false);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("batchnorm2d degenerate batch rejected in train mode") {
    nn::BatchNorm2dLayer<double> bn(1);
    auto x = lc::Tensor<double>::zeros({1, 1, 1, 1});
    CHECK_THROWS_AS(nn::batchnorm2d_forward(x, bn, true), lc::ContractError);
}

TEST_CASE("batchnorm2d gradients match finite differences") {
    std::mt19937 rng(10);
    auto x = random_tensor({3, 2, 2, 2}, rng);
    SUBCASE("train mode") {
        nn::BatchNorm2dLayer<double> bn(2);
        const double err = grad_check_max_rel_error<>(
            {x, bn.gamma, bn.beta},
            [&]() { return lc::mean(lc::square(nn::batchnorm2d_forward(x, bn, true))); });
        CHECK(err < 1e-4);
    }
    SUBCASE("eval mode") {
        nn::BatchNorm2dLayer<double> bn(2);
        bn.running_mean.data()[0] = 0.3;
        bn.running_var.data()[1] = 2.0;
        const double err = grad_check_max_rel_error<>(
            {x, bn.gamma, bn.beta},
            [&]() { return lc::mean(lc::square(nn::batchnorm2d_forward(x, bn, false))); });
        CHECK(err < 1e-4);
    }
}

TEST_CASE("linear gradients match finite differences") {
    std::mt19937 rng(11);
    nn::LinearLayer<double> fc(6, 4, rng);
    auto x = random_tensor({3, 6}, rng);
    const double err = grad_check_max_rel_error<>(
        {x, fc.weight, fc.bias},
        [&]() { return lc::mean(lc::square(nn::linear_forward(x, fc))); });
    CHECK(err < 1e-4);
}

TEST_CASE("l2_normalize_rows values") {
    auto x = Tensor<double>::from_data({1, 2}, {3, 4});
    auto y = nn::l2_normalize_rows(x);
    CHECK(y.data()[0] == doctest::Approx(0.6));
    CHECK(y.data()[1] == doctest::Approx(0.8));

    // idempotence on an already-unit row
    auto y2 = nn::l2_normalize_rows(y);
    CHECK(y2.data()[0] == doctest::Approx(y.data()[0]).epsilon(1e-12));
    CHECK(y2.data()[1] == doctest::Approx(y.data()[1]).epsilon(1e-12));

    // near-zero rows stay zero
    auto z = Tensor<double>::from_data({1, 2}, {0, 0});
    auto yz = nn::l2_normalize_rows(z);
    CHECK(yz.data()[0] == 0.0);
    CHECK(yz.data()[1] == 0.0);
}

TEST_CASE("l2_normalize_rows gradient matches finite differences") {
    std::mt19937 rng(12);
    auto x = random_tensor({4, 5}, rng);
    const double err = grad_check_max_rel_error<>(
        {x}, [&]() { return lc::sum(nn::l2_normalize_rows(x)); });
    CHECK(err < 1e-4);
}

TEST_CASE("mse_loss values and scalar-loop oracle") {
    auto p = Tensor<double>::from_data({2}, {1, 1});
    auto t = Tensor<double>::from_data({2}, {0, 0});
    CHECK(nn::mse_loss(p, p).item() == 0.0);
    CHECK(nn::mse_loss(p, t).item() == doctest::Approx(1.0));

    std::mt19937 rng(13);
    auto a = random_tensor({3, 7}, rng, false);
    auto b = random_tensor({3, 7}, rng, false);
    double expected = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        expected += d * d;
    }
    expected /= static_cast<double>(a.size());
    CHECK(nn::mse_loss(a, b).item() == doctest::Approx(expected).epsilon(1e-6));

    CHECK_THROWS_AS(nn::mse_loss(a, Tensor<double>::zeros({3, 6})), lc::DimensionError);
}

TEST_CASE("triplet_loss trivial geometry") {
    // anchor == positive, negative at squared distance >= margin: hinge off
    auto a = Tensor<double>::from_data({1, 2}, {1, 0});
    auto n = Tensor<double>::from_data({1, 2}, {-1, 0});  // squared dist 4
    CHECK(nn::triplet_loss(a, a, n, 1.0).item() == 0.0);

    // all three identical: distances cancel, loss = margin
    CHECK(nn::triplet_loss(a, a, a, 1.0).item() == doctest::Approx(1.0));
}

TEST_CASE("triplet_loss matches scalar-loop oracle on unit-norm rows") {
    std::mt19937 rng(14);
    const int n = 5, d = 8;
    auto unit_rows = [&]() {
        auto t = random_tensor({n, d}, rng, false);
        for (int i = 0; i < n; ++i) {
            double norm = 0.0;
            for (int j = 0; j < d; ++j) norm += t.data()[i * d + j] * t.data()[i * d + j];
            norm = std::sqrt(norm);
            for (int j = 0; j < d; ++j) t.data()[i * d + j] /= norm;
        }
        return t;
    };
    auto za = unit_rows(), zp = unit_rows(), zn = unit_rows();
    const double margin = 1.0;

    double expected = 0.0;
    for (int i = 0; i < n; ++i) {
        double dap = 0.0, dan = 0.0;
        for (int j = 0; j < d; ++j) {
            const double ep = za.data()[i * d + j] - zp.data()[i * d + j];
            const double en = za.data()[i * d + j] - zn.data()[i * d + j];
            dap += ep * ep;
            dan += en * en;
        }
        expected += std::max(0.0, dap - dan + margin);
    }
    expected /= n;
    CHECK(nn::triplet_loss(za, zp, zn, margin).item() ==
          doctest::Approx(expected).epsilon(1e-6));
    CHECK(nn::triplet_loss(za, zp, zn, margin).item() >= 0.0);
}

TEST_CASE("triplet_loss gradient matches finite differences") {
    std::mt19937 rng(15);
    auto za = random_tensor({4, 6}, rng);
    auto zp = random_tensor({4, 6}, rng);
    auto zn = random_tensor({4, 6}, rng);
    const double err = grad_check_max_rel_error<>(
        {za, zp, zn}, [&]() { return nn::triplet_loss(za, zp, zn, 1.0); });
    CHECK(err < 1e-4);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    auto w = Tensor<double>::from_data({3}, {1, 2, 3}, true);
    w.grad_accum();  // allocate zero grads
    std::vector<Tensor<double>> params{w};
    nn::Adam<double> opt(0.001);
    opt.step(params);
    CHECK(opt.step_count() == 1);
    CHECK(w.data()[0] == 1.0);
    CHECK(w.data()[1] == 2.0);
    CHECK(w.data()[2] == 3.0);
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
    auto w = Tensor<double>::from_data({2}, {0.0, 0.0}, true);
    w.grad_accum()[0] = 0.7;
    w.grad_accum()[1] = -1234.5;
    std::vector<Tensor<double>> params{w};
    nn::Adam<double> opt(0.001);
    opt.step(params);
    CHECK(w.data()[0] == doctest::Approx(-0.001).epsilon(1e-3));
    CHECK(w.data()[1] == doctest::Approx(0.001).epsilon(1e-3));
}

TEST_CASE("adam on f(w)=w^2 decreases |w| over steps") {
    auto w = Tensor<double>::from_data({1}, {1.0}, true);
    std::vector<Tensor<double>> params{w};
    nn::Adam<double> opt(0.1);
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
        opt.zero_grad(params);
        auto loss = lc::sum(lc::square(w));
        lc::backward(loss);
        opt.step(params);
        CHECK(std::abs(w.data()[0]) < prev);
        prev = std::abs(w.data()[0]);
    }
}

TEST_CASE("adam requires populated gradients") {
    auto w = Tensor<double>::from_data({1}, {1.0}, true);
    std::vector<Tensor<double>> params{w};
    nn::Adam<double> opt;
    CHECK_THROWS_AS(opt.step(params), lc::ContractError);
}

TEST_CASE("two-layer composition gradient check") {
    std::mt19937 rng(16);
    nn::Conv2dLayer<double> c(1, 2, rng);
    nn::BatchNorm2dLayer<double> bn(2);
    nn::LinearLayer<double> fc(2 * 3 * 3, 4, rng);
    auto x = random_tensor({2, 1, 6, 6}, rng);
    auto loss_fn = [&]() {
        auto h = lc::relu(nn::batchnorm2d_forward(nn::conv2d_forward(x, c), bn, true));
        auto flat = lc::reshape(h, {2, 2 * 3 * 3});
        return lc::mean(lc::square(nn::l2_normalize_rows(nn::linear_forward(flat, fc))));
    };
    const double err =
        grad_check_max_rel_error<>({x, c.weight, c.bias, bn.gamma, bn.beta, fc.weight, fc.bias},
                                   loss_fn);
    CHECK(err < 1e-3);
}
