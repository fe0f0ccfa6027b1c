#include "lc/model.hpp"

#include "doctest.h"
#include "grad_check.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using lc::Autoencoder;
using lc::Tensor;

namespace {

Tensor<float> random_images(int n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    auto t = Tensor<float>::zeros({n, 1, 28, 28});
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    return t;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("trainable parameter count is exactly 442433") {
    Autoencoder<float> model(0);
    CHECK(lc::count_parameters(model) == 442433);
    CHECK(model.encoder_parameter_count() == 219776);
    CHECK(model.decoder_parameter_count() == 222657);
}

TEST_CASE("encode shape and row norms") {
    Autoencoder<float> model(1);
    auto x = random_images(3, 42);
    lc::NoGradGuard guard;
    auto z = model.encode(x);
    CHECK(z.shape() == lc::Shape{3, 64});
    for (int i = 0; i < 3; ++i) {
        double norm = 0.0;
        for (int j = 0; j < 64; ++j) norm += double(z.data()[i * 64 + j]) * z.data()[i * 64 + j];
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("encode rejects wrong input shape") {
    Autoencoder<float> model(1);
    CHECK_THROWS_AS(model.encode(Tensor<float>::zeros({1, 1, 27, 27})), lc::DimensionError);
}

TEST_CASE("duplicated input rows give identical embeddings in eval mode") {
    Autoencoder<float> model(2);
    auto single = random_images(1, 7);
    auto dup = Tensor<float>::zeros({2, 1, 28, 28});
    for (int i = 0; i < 784; ++i) {
        dup.data()[i] = single.data()[i];
        dup.data()[784 + i] = single.data()[i];
    }
    lc::NoGradGuard guard;
    auto z = model.encode(dup);
    for (int j = 0; j < 64; ++j) CHECK(z.data()[j] == z.data()[64 + j]);
}

TEST_CASE("decode produces a valid image in (0,1)") {
    Autoencoder<float> model(3);
    lc::NoGradGuard guard;
    auto img = model.decode(Tensor<float>::zeros({1, 64}));
    CHECK(img.shape() == lc::Shape{1, 1, 28, 28});
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(img.data()[i] > 0.0f);
        CHECK(img.data()[i] < 1.0f);
    }

    std::mt19937 rng(9);
    auto z = Tensor<float>::zeros({2, 64});
    std::normal_distribution<float> dist(0.0f, 1.0f);
    for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = dist(rng);
    auto img2 = model.decode(z);
    for (std::size_t i = 0; i < img2.size(); ++i) {
        CHECK(img2.data()[i] >= 0.0f);
        CHECK(img2.data()[i] <= 1.0f);
    }
}

TEST_CASE("reconstruct round trip preserves shapes") {
    Autoencoder<float> model(4);
    lc::NoGradGuard guard;
    auto x = random_images(2, 5);
    auto y = model.reconstruct(x);
    CHECK(y.shape() == x.shape());
}

TEST_CASE("eval-mode forward is a pure function of params and input") {
    Autoencoder<float> model(5);
    auto x = random_images(2, 6);
    lc::NoGradGuard guard;
    auto a = model.encode(x);
    auto b = model.encode(x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("full encoder and decoder pass sampled finite-difference checks") {
    Autoencoder<double> model(6);
    std::mt19937 rng(123);
    auto x = random_tensor({2, 1, 28, 28}, rng, true, 0.5);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = std::abs(x.data()[i]);

    auto params = model.parameters();
    // parameter gradients only: finite differences across the ReLU kink are
    // unreliable for input perturbations
    SUBCASE("encoder") {
        std::vector<Tensor<double>> checked;
        for (auto& [name, t] : model.named_parameters())
            if (name.rfind("enc.", 0) == 0) checked.push_back(t);
        const double err = grad_check_sampled_max_rel_error<>(
            checked, [&]() { return lc::mean(lc::square(model.encode(x, true))); }, rng, 4);
        CHECK(err < 1e-3);
    }
    SUBCASE("decoder") {
        auto z = random_tensor({2, 64}, rng);
        std::vector<Tensor<double>> checked;
        for (auto& [name, t] : model.named_parameters())
            if (name.rfind("dec.", 0) == 0) checked.push_back(t);
        const double err = grad_check_sampled_max_rel_error<>(
            checked, [&]() { return lc::mean(lc::square(model.decode(z, true))); }, rng, 4);
        CHECK(err < 1e-3);
    }
    SUBCASE("end to end") {
        const double err = grad_check_sampled_max_rel_error<>(
            params, [&]() { return lc::nn::mse_loss(model.reconstruct(x, true), x); }, rng, 2);
        CHECK(err < 1e-3);
    }
}

TEST_CASE("checkpoint round trip is bit identical") {
    Autoencoder<float> model(7);
    const std::string path = temp_path("lc_test_ckpt.bin");
    lc::CheckpointMeta meta;
    meta.phase = "phase1";
    meta.epoch = 12;
    lc::save_checkpoint(model, path, meta);

    Autoencoder<float> loaded(8);  // different init, fully overwritten by load
    auto restored = lc::load_checkpoint(loaded, path);
    CHECK(restored.phase == "phase1");
    CHECK(restored.epoch == 12);
    CHECK_FALSE(restored.has_optimizer);

    auto a = model.named_parameters();
    auto b = loaded.named_parameters();
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].tensor.size(); ++j)
            CHECK(a[i].tensor.data()[j] == b[i].tensor.data()[j]);
    auto ab = model.named_buffers();
    auto bb = loaded.named_buffers();
    for (std::size_t i = 0; i < ab.size(); ++i)
        for (std::size_t j = 0; j < ab[i].tensor.size(); ++j)
            CHECK(ab[i].tensor.data()[j] == bb[i].tensor.data()[j]);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint round trips optimizer state") {
    Autoencoder<float> model(9);
    auto params = model.parameters();
    for (auto& p : params) {
        p.grad_accum();
        for (std::size_t i = 0; i < p.size(); ++i) p.grad_accum()[i] = 0.01f;
    }
    lc::nn::Adam<float> opt(0.001f);
    opt.step(params);
    opt.step(params);

    const std::string path = temp_path("lc_test_ckpt_opt.bin");
    lc::save_checkpoint(model, path, {.phase = "phase1", .epoch = 1}, &opt);

    Autoencoder<float> loaded(10);
    lc::nn::Adam<float> opt2;
    auto meta = lc::load_checkpoint(loaded, path, &opt2);
    CHECK(meta.has_optimizer);
    CHECK(opt2.step_count() == 2);
    CHECK(opt2.moments().size() == params.size());
    CHECK(opt2.moments()[0].m[0] == opt.moments()[0].m[0]);
    std::remove(path.c_str());
}

TEST_CASE("truncated checkpoint is rejected") {
    Autoencoder<float> model(11);
    const std::string path = temp_path("lc_test_ckpt_trunc.bin");
    lc::save_checkpoint(model, path);
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    Autoencoder<float> loaded(12);
    CHECK_THROWS_AS(lc::load_checkpoint(loaded, path), lc::CheckpointError);
    std::remove(path.c_str());
}

TEST_CASE("bad magic is rejected") {
    const std::string path = temp_path("lc_test_ckpt_magic.bin");
    std::ofstream(path, std::ios::binary) << "NOPE-not-a-checkpoint";
    Autoencoder<float> model(13);
    CHECK_THROWS_AS(lc::load_checkpoint(model, path), lc::CheckpointError);
    std::remove(path.c_str());
}

TEST_CASE("latent-dim mismatch is a shape error") {
    Autoencoder<float> wide(14, 32);
    const std::string path = temp_path("lc_test_ckpt_latent.bin");
    lc::save_checkpoint(wide, path);
    Autoencoder<float> standard(15);  // latent 64
    CHECK_THROWS_AS(lc::load_checkpoint(standard, path), lc::CheckpointError);
    std::remove(path.c_str());
}
