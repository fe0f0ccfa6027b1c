#pragma once

#include "lc/nn.hpp"
#include "lc/tensor.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace lc {

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// Conv 1->32 s2, BN, ReLU, Conv 32->64 s2, BN, ReLU, flatten, Linear 3136->64,
// L2-normalize; decoder mirrors it back to a sigmoid [N,1,28,28] image.
template <typename S>
class Autoencoder {
public:
    static constexpr int kImageSide = 28;
    static constexpr int kFlatDim = 64 * 7 * 7;

    explicit Autoencoder(std::uint64_t seed = 0, int latent_dim = 64) : latent_dim_(latent_dim) {
        std::mt19937 rng(static_cast<std::uint32_t>(seed));
        enc_conv1_ = nn::Conv2dLayer<S>(1, 32, rng);
        enc_bn1_ = nn::BatchNorm2dLayer<S>(32);
        enc_conv2_ = nn::Conv2dLayer<S>(32, 64, rng);
        enc_bn2_ = nn::BatchNorm2dLayer<S>(64);
        enc_fc_ = nn::LinearLayer<S>(kFlatDim, latent_dim_, rng);
        dec_fc_ = nn::LinearLayer<S>(latent_dim_, kFlatDim, rng);
        dec_convt1_ = nn::ConvTranspose2dLayer<S>(64, 32, rng);
        dec_bn1_ = nn::BatchNorm2dLayer<S>(32);
        dec_convt2_ = nn::ConvTranspose2dLayer<S>(32, 1, rng);
    }

    int latent_dim() const { return latent_dim_; }

    // Rows come out L2-normalized.
    Tensor<S> encode(Tensor<S> images, bool train = false) {
        if (images.shape().size() != 4 || images.shape()[1] != 1 ||
            images.shape()[2] != kImageSide || images.shape()[3] != kImageSide)
            throw DimensionError("encode: expected [N,1,28,28], got " + shape_str(images.shape()));
        const int n = images.shape()[0];
        Tensor<S> x = nn::conv2d_forward(images, enc_conv1_);
        x = nn::batchnorm2d_forward(x, enc_bn1_, train);
        x = relu(x);
        x = nn::conv2d_forward(x, enc_conv2_);
        x = nn::batchnorm2d_forward(x, enc_bn2_, train);
        x = relu(x);
        x = reshape(x, {n, kFlatDim});
        x = nn::linear_forward(x, enc_fc_);
        return nn::l2_normalize_rows(x);
    }

    Tensor<S> decode(Tensor<S> latent, bool train = false) {
        if (latent.shape().size() != 2 || latent.shape()[1] != latent_dim_)
            throw DimensionError("decode: expected [N,64], got " + shape_str(latent.shape()));
        const int n = latent.shape()[0];
        Tensor<S> x = nn::linear_forward(latent, dec_fc_);
        x = relu(x);
        x = reshape(x, {n, 64, 7, 7});
        x = nn::conv_transpose2d_forward(x, dec_convt1_);
        x = nn::batchnorm2d_forward(x, dec_bn1_, train);
        x = relu(x);
        x = nn::conv_transpose2d_forward(x, dec_convt2_);
        return sigmoid(x);
    }

    Tensor<S> reconstruct(Tensor<S> images, bool train = false) {
        return decode(encode(images, train), train);
    }

    struct NamedTensor {
        std::string name;
        Tensor<S> tensor;
    };

    std::vector<NamedTensor> named_parameters() {
        return {
            {"enc.conv1.weight", enc_conv1_.weight}, {"enc.conv1.bias", enc_conv1_.bias},
            {"enc.bn1.gamma", enc_bn1_.gamma},       {"enc.bn1.beta", enc_bn1_.beta},
            {"enc.conv2.weight", enc_conv2_.weight}, {"enc.conv2.bias", enc_conv2_.bias},
            {"enc.bn2.gamma", enc_bn2_.gamma},       {"enc.bn2.beta", enc_bn2_.beta},
            {"enc.fc.weight", enc_fc_.weight},       {"enc.fc.bias", enc_fc_.bias},
            {"dec.fc.weight", dec_fc_.weight},       {"dec.fc.bias", dec_fc_.bias},
            {"dec.convt1.weight", dec_convt1_.weight}, {"dec.convt1.bias", dec_convt1_.bias},
            {"dec.bn1.gamma", dec_bn1_.gamma},       {"dec.bn1.beta", dec_bn1_.beta},
            {"dec.convt2.weight", dec_convt2_.weight}, {"dec.convt2.bias", dec_convt2_.bias},
        };
    }

    // Running statistics travel with checkpoints but are not trained.
    std::vector<NamedTensor> named_buffers() {
        return {
            {"enc.bn1.running_mean", enc_bn1_.running_mean},
            {"enc.bn1.running_var", enc_bn1_.running_var},
            {"enc.bn2.running_mean", enc_bn2_.running_mean},
            {"enc.bn2.running_var", enc_bn2_.running_var},
            {"dec.bn1.running_mean", dec_bn1_.running_mean},
            {"dec.bn1.running_var", dec_bn1_.running_var},
        };
    }

    std::vector<Tensor<S>> parameters() {
        std::vector<Tensor<S>> out;
        for (auto& [name, t] : named_parameters()) out.push_back(t);
        return out;
    }

    std::size_t encoder_parameter_count() {
        std::size_t n = 0;
        auto all = named_parameters();
        for (auto& [name, t] : all)
            if (name.rfind("enc.", 0) == 0) n += t.size();
        return n;
    }

    std::size_t decoder_parameter_count() {
        std::size_t n = 0;
        auto all = named_parameters();
        for (auto& [name, t] : all)
            if (name.rfind("dec.", 0) == 0) n += t.size();
        return n;
    }

private:
    int latent_dim_ = 64;
    nn::Conv2dLayer<S> enc_conv1_, enc_conv2_;
    nn::BatchNorm2dLayer<S> enc_bn1_, enc_bn2_;
    nn::LinearLayer<S> enc_fc_, dec_fc_;
    nn::ConvTranspose2dLayer<S> dec_convt1_, dec_convt2_;
    nn::BatchNorm2dLayer<S> dec_bn1_;
};

template <typename S>
std::size_t count_parameters(Autoencoder<S>& model) {
    std::size_t n = 0;
    for (auto& [name, t] : model.named_parameters()) n += t.size();
    return n;
}

// ---- checkpoint format ----
// magic "LCAE" | u32 version | u32 phase-tag length + bytes | u32 epoch |
// u8 has-optimizer | u32 tensor count | per tensor:
//   u32 name length | name bytes | u32 rank | u32 dims... | f32 LE payload
// If has-optimizer: u64 step count, f32 lr/beta1/beta2/eps, then per trainable
// parameter two extra tensors (first and second moments) in parameter order.

inline constexpr char kCheckpointMagic[4] = {'L', 'C', 'A', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::string phase;
    std::uint32_t epoch = 0;
    bool has_optimizer = false;
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated checkpoint");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is) {
    const std::uint64_t lo = read_u32(is);
    const std::uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
    const std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    const std::uint32_t len = read_u32(is);
    if (len > (1u << 20)) throw CheckpointError("corrupt checkpoint: absurd string length");
    std::string s(len, '\0');
    if (!is.read(s.data(), len)) throw CheckpointError("truncated checkpoint");
    return s;
}

template <typename S>
void write_tensor(std::ostream& os, const std::string& name, const Tensor<S>& t) {
    write_string(os, name);
    write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) write_f32(os, static_cast<float>(t.data()[i]));
}

template <typename S>
void read_tensor_into(std::istream& is, const std::string& expected_name, Tensor<S>& t) {
    const std::string name = read_string(is);
    if (name != expected_name)
        throw CheckpointError("checkpoint tensor order mismatch: expected '" + expected_name +
                              "', found '" + name + "'");
    const std::uint32_t rank = read_u32(is);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(is));
    if (shape != t.shape())
        throw CheckpointError("checkpoint shape mismatch for '" + name + "': file has " +
                              shape_str(shape) + ", model has " + shape_str(t.shape()));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(read_f32(is));
}

template <typename S>
void read_raw_vector(std::istream& is, const std::string& expected_name, std::vector<S>& out) {
    Tensor<S> tmp = Tensor<S>::zeros({static_cast<int>(out.size())});
    read_tensor_into(is, expected_name, tmp);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = tmp.data()[i];
}

}  // namespace detail

template <typename S>
void save_checkpoint(Autoencoder<S>& model, const std::string& path,
                     const CheckpointMeta& meta = {}, nn::Adam<S>* optimizer = nullptr) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open '" + path + "' for writing");
    os.write(kCheckpointMagic, 4);
    detail::write_u32(os, kCheckpointVersion);
    detail::write_string(os, meta.phase);
    detail::write_u32(os, meta.epoch);
    os.put(optimizer ? 1 : 0);

    auto params = model.named_parameters();
    auto buffers = model.named_buffers();
    detail::write_u32(os, static_cast<std::uint32_t>(params.size() + buffers.size()));
    for (auto& [name, t] : params) detail::write_tensor(os, name, t);
    for (auto& [name, t] : buffers) detail::write_tensor(os, name, t);

    if (optimizer) {
        detail::write_u64(os, static_cast<std::uint64_t>(optimizer->step_count()));
        detail::write_f32(os, static_cast<float>(optimizer->learning_rate()));
        detail::write_f32(os, static_cast<float>(optimizer->beta1()));
        detail::write_f32(os, static_cast<float>(optimizer->beta2()));
        detail::write_f32(os, static_cast<float>(optimizer->epsilon()));
        auto& moments = optimizer->moments();
        if (moments.size() != params.size())
            throw CheckpointError("optimizer state does not match model parameters");
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<S> m = Tensor<S>::from_data(params[i].tensor.shape(),
                                               std::vector<S>(moments[i].m));
            Tensor<S> v = Tensor<S>::from_data(params[i].tensor.shape(),
                                               std::vector<S>(moments[i].v));
            detail::write_tensor(os, params[i].name + ".adam_m", m);
            detail::write_tensor(os, params[i].name + ".adam_v", v);
        }
    }
    if (!os) throw CheckpointError("write failure on '" + path + "'");
}

template <typename S>
CheckpointMeta load_checkpoint(Autoencoder<S>& model, const std::string& path,
                               nn::Adam<S>* optimizer = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw CheckpointError("bad checkpoint magic in '" + path + "'");
    const std::uint32_t version = detail::read_u32(is);
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    CheckpointMeta meta;
    meta.phase = detail::read_string(is);
    meta.epoch = detail::read_u32(is);
    const int has_opt = is.get();
    if (has_opt == EOF) throw CheckpointError("truncated checkpoint");
    meta.has_optimizer = has_opt != 0;

    auto params = model.named_parameters();
    auto buffers = model.named_buffers();
    const std::uint32_t count = detail::read_u32(is);
    if (count != params.size() + buffers.size())
        throw CheckpointError("checkpoint tensor count mismatch");
    for (auto& [name, t] : params) detail::read_tensor_into(is, name, t);
    for (auto& [name, t] : buffers) detail::read_tensor_into(is, name, t);

    if (meta.has_optimizer && optimizer) {
        const auto t = static_cast<std::int64_t>(detail::read_u64(is));
        const float lr = detail::read_f32(is);
        const float b1 = detail::read_f32(is);
        const float b2 = detail::read_f32(is);
        const float eps = detail::read_f32(is);
        *optimizer = nn::Adam<S>(static_cast<S>(lr), static_cast<S>(b1), static_cast<S>(b2),
                                 static_cast<S>(eps));
        std::vector<typename nn::Adam<S>::Moments> moments(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            moments[i].m.assign(params[i].tensor.size(), S(0));
            moments[i].v.assign(params[i].tensor.size(), S(0));
            Tensor<S> m = Tensor<S>::zeros(params[i].tensor.shape());
            Tensor<S> v = Tensor<S>::zeros(params[i].tensor.shape());
            detail::read_tensor_into(is, params[i].name + ".adam_m", m);
            detail::read_tensor_into(is, params[i].name + ".adam_v", v);
            for (std::size_t j = 0; j < m.size(); ++j) {
                moments[i].m[j] = m.data()[j];
                moments[i].v[j] = v.data()[j];
            }
        }
        optimizer->restore(t, std::move(moments));
    }
    return meta;
}

}  // namespace lc
