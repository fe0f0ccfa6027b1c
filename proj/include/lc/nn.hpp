#pragma once

#include "lc/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lc::nn {

// All convolutions in this artifact are 3x3, stride 2, pad 1 (transposed
// adds output_padding 1). The helpers below are written against those
// constants but keep the geometry explicit.
inline constexpr int kKernel = 3;
inline constexpr int kStride = 2;
inline constexpr int kPad = 1;

inline int conv_out_dim(int in) { return (in + 2 * kPad - kKernel) / kStride + 1; }
inline int conv_transpose_out_dim(int in) {
    return (in - 1) * kStride - 2 * kPad + kKernel + 1;  // output_padding 1
}

namespace detail {

// [C,H,W] image -> [C*9, Hout*Wout] patch matrix, cross-correlation layout.
template <typename S>
void im2col(const S* img, int c, int h, int w, int hout, int wout, S* col) {
    for (int ch = 0; ch < c; ++ch) {
        for (int kr = 0; kr < kKernel; ++kr) {
            for (int kc = 0; kc < kKernel; ++kc) {
                S* dst = col + (static_cast<std::size_t>(ch) * kKernel * kKernel + kr * kKernel + kc) *
                                   hout * wout;
                for (int oy = 0; oy < hout; ++oy) {
                    const int iy = oy * kStride - kPad + kr;
                    for (int ox = 0; ox < wout; ++ox) {
                        const int ix = ox * kStride - kPad + kc;
                        S v = S(0);
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                            v = img[(static_cast<std::size_t>(ch) * h + iy) * w + ix];
                        dst[oy * wout + ox] = v;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add patches back into the image.
template <typename S>
void col2im(const S* col, int c, int h, int w, int hout, int wout, S* img) {
    for (int ch = 0; ch < c; ++ch) {
        for (int kr = 0; kr < kKernel; ++kr) {
            for (int kc = 0; kc < kKernel; ++kc) {
                const S* src = col + (static_cast<std::size_t>(ch) * kKernel * kKernel +
                                      kr * kKernel + kc) *
                                         hout * wout;
                for (int oy = 0; oy < hout; ++oy) {
                    const int iy = oy * kStride - kPad + kr;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < wout; ++ox) {
                        const int ix = ox * kStride - kPad + kc;
                        if (ix < 0 || ix >= w) continue;
                        img[(static_cast<std::size_t>(ch) * h + iy) * w + ix] += src[oy * wout + ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <typename S>
S kaiming_uniform_bound(int fan_in) {
    // gain sqrt(2) for ReLU stacks; uniform in [-b, b] with b = gain*sqrt(3/fan_in)
    return static_cast<S>(std::sqrt(2.0) * std::sqrt(3.0 / fan_in));
}

template <typename S>
void fill_uniform(Tensor<S>& t, S bound, std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(-static_cast<double>(bound),
                                                static_cast<double>(bound));
    S* d = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) d[i] = static_cast<S>(dist(rng));
}

template <typename S>
struct Conv2dLayer {
    Tensor<S> weight;  // [out_ch, in_ch, 3, 3]
    Tensor<S> bias;    // [out_ch]

    Conv2dLayer() = default;
    Conv2dLayer(int in_ch, int out_ch, std::mt19937& rng) {
        weight = Tensor<S>::zeros({out_ch, in_ch, kKernel, kKernel}, true);
        bias = Tensor<S>::zeros({out_ch}, true);
        fill_uniform(weight, kaiming_uniform_bound<S>(in_ch * kKernel * kKernel), rng);
    }
};

template <typename S>
struct ConvTranspose2dLayer {
    Tensor<S> weight;  // [in_ch, out_ch, 3, 3]
    Tensor<S> bias;    // [out_ch]

    ConvTranspose2dLayer() = default;
    ConvTranspose2dLayer(int in_ch, int out_ch, std::mt19937& rng) {
        weight = Tensor<S>::zeros({in_ch, out_ch, kKernel, kKernel}, true);
        bias = Tensor<S>::zeros({out_ch}, true);
        fill_uniform(weight, kaiming_uniform_bound<S>(in_ch * kKernel * kKernel), rng);
    }
};

template <typename S>
struct BatchNorm2dLayer {
    Tensor<S> gamma, beta;              // trainable
    Tensor<S> running_mean, running_var;  // buffers, not trained
    S eps = static_cast<S>(1e-5);
    S momentum = static_cast<S>(0.1);

    BatchNorm2dLayer() = default;
    explicit BatchNorm2dLayer(int channels) {
        gamma = Tensor<S>::zeros({channels}, true);
        beta = Tensor<S>::zeros({channels}, true);
        running_mean = Tensor<S>::zeros({channels});
        running_var = Tensor<S>::zeros({channels});
        for (int c = 0; c < channels; ++c) {
            gamma.data()[c] = S(1);
            running_var.data()[c] = S(1);
        }
    }
};

template <typename S>
struct LinearLayer {
    Tensor<S> weight;  // [out, in]
    Tensor<S> bias;    // [out]

    LinearLayer() = default;
    LinearLayer(int in, int out, std::mt19937& rng) {
        weight = Tensor<S>::zeros({out, in}, true);
        bias = Tensor<S>::zeros({out}, true);
        fill_uniform(weight, kaiming_uniform_bound<S>(in), rng);
    }
};

template <typename S>
Tensor<S> conv2d_forward(Tensor<S> input, Conv2dLayer<S>& layer) {
    const Shape& ish = input.shape();
    if (ish.size() != 4) throw DimensionError("conv2d: input must be [N,C,H,W]");
    const int n = ish[0], cin = ish[1], h = ish[2], w = ish[3];
    const int cout = layer.weight.shape()[0];
    if (layer.weight.shape()[1] != cin)
        throw DimensionError("conv2d: channel mismatch, input has " + std::to_string(cin) +
                             ", layer expects " + std::to_string(layer.weight.shape()[1]));
    if (h < kKernel || w < kKernel) throw DimensionError("conv2d: spatial dims below kernel size");
    const int hout = conv_out_dim(h), wout = conv_out_dim(w);
    const int patch = cin * kKernel * kKernel;

    Tensor<S> out = Tensor<S>::op_result({n, cout, hout, wout}, {input, layer.weight, layer.bias});
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat col(patch, hout * wout);
    auto wmat = layer.weight.mat(cout, patch);
    for (int i = 0; i < n; ++i) {
        detail::im2col(input.data() + static_cast<std::size_t>(i) * cin * h * w, cin, h, w, hout,
                       wout, col.data());
        Eigen::Map<Mat> omat(out.data() + static_cast<std::size_t>(i) * cout * hout * wout, cout,
                             hout * wout);
        omat.noalias() = wmat * col;
        omat.colwise() += layer.bias.vec();
    }

    Tensor<S> weight = layer.weight, bias = layer.bias;
    out.set_backward([input, weight, bias, out, n, cin, h, w, cout, hout, wout, patch]() mutable {
        Mat col(patch, hout * wout);
        auto wmat = weight.mat(cout, patch);
        const bool need_in = input.needs_grad();
        const bool need_w = weight.needs_grad();
        const bool need_b = bias.needs_grad();
        Mat dcol(patch, hout * wout);
        for (int i = 0; i < n; ++i) {
            Eigen::Map<const Mat> g(out.grad() + static_cast<std::size_t>(i) * cout * hout * wout,
                                    cout, hout * wout);
            if (need_w) {
                detail::im2col(input.data() + static_cast<std::size_t>(i) * cin * h * w, cin, h, w,
                               hout, wout, col.data());
                Eigen::Map<Mat> gw(weight.grad_accum(), cout, patch);
                gw.noalias() += g * col.transpose();
            }
            if (need_b) {
                Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> gb(bias.grad_accum(), cout);
                gb += g.rowwise().sum();
            }
            if (need_in) {
                dcol.noalias() = wmat.transpose() * g;
                detail::col2im(dcol.data(), cin, h, w, hout, wout,
                               input.grad_accum() + static_cast<std::size_t>(i) * cin * h * w);
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> conv_transpose2d_forward(Tensor<S> input, ConvTranspose2dLayer<S>& layer) {
    const Shape& ish = input.shape();
    if (ish.size() != 4) throw DimensionError("conv_transpose2d: input must be [N,C,H,W]");
    const int n = ish[0], cin = ish[1], h = ish[2], w = ish[3];
    if (layer.weight.shape()[0] != cin)
        throw DimensionError("conv_transpose2d: channel mismatch");
    const int cout = layer.weight.shape()[1];
    const int hout = conv_transpose_out_dim(h), wout = conv_transpose_out_dim(w);
    const int patch = cout * kKernel * kKernel;

    // Scatter semantics: the output is the adjoint of a stride-2 conv that
    // would map [cout,hout,wout] down to [cin,h,w].
    Tensor<S> out = Tensor<S>::op_result({n, cout, hout, wout}, {input, layer.weight, layer.bias});
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    auto wmat = layer.weight.mat(cin, patch);
    Mat colbuf(patch, h * w);
    for (int i = 0; i < n; ++i) {
        Eigen::Map<const Mat> imat(input.data() + static_cast<std::size_t>(i) * cin * h * w, cin,
                                   h * w);
        colbuf.noalias() = wmat.transpose() * imat;
        S* optr = out.data() + static_cast<std::size_t>(i) * cout * hout * wout;
        detail::col2im(colbuf.data(), cout, hout, wout, h, w, optr);
        for (int c = 0; c < cout; ++c) {
            const S b = layer.bias.data()[c];
            S* chan = optr + static_cast<std::size_t>(c) * hout * wout;
            for (int p = 0; p < hout * wout; ++p) chan[p] += b;
        }
    }

    Tensor<S> weight = layer.weight, bias = layer.bias;
    out.set_backward([input, weight, bias, out, n, cin, h, w, cout, hout, wout, patch]() mutable {
        Mat gcol(patch, h * w);
        auto wmat = weight.mat(cin, patch);
        for (int i = 0; i < n; ++i) {
            const S* gptr = out.grad() + static_cast<std::size_t>(i) * cout * hout * wout;
            detail::im2col(gptr, cout, hout, wout, h, w, gcol.data());
            if (input.needs_grad()) {
                Eigen::Map<Mat> gi(input.grad_accum() + static_cast<std::size_t>(i) * cin * h * w,
                                   cin, h * w);
                gi.noalias() += wmat * gcol;
            }
            if (weight.needs_grad()) {
                Eigen::Map<const Mat> imat(
                    input.data() + static_cast<std::size_t>(i) * cin * h * w, cin, h * w);
                Eigen::Map<Mat> gw(weight.grad_accum(), cin, patch);
                gw.noalias() += imat * gcol.transpose();
            }
            if (bias.needs_grad()) {
                S* gb = bias.grad_accum();
                for (int c = 0; c < cout; ++c) {
                    S acc = S(0);
                    const S* chan = gptr + static_cast<std::size_t>(c) * hout * wout;
                    for (int p = 0; p < hout * wout; ++p) acc += chan[p];
                    gb[c] += acc;
                }
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> batchnorm2d_forward(Tensor<S> input, BatchNorm2dLayer<S>& layer, bool train) {
    const Shape& ish = input.shape();
    if (ish.size() != 4) throw DimensionError("batchnorm2d: input must be [N,C,H,W]");
    const int n = ish[0], c = ish[1], h = ish[2], w = ish[3];
    if (layer.gamma.shape()[0] != c) throw DimensionError("batchnorm2d: channel mismatch");
    const std::size_t m = static_cast<std::size_t>(n) * h * w;  // elements per channel
    if (train && m < 2)
        throw ContractError("batchnorm2d: train mode needs at least 2 elements per channel");

    Tensor<S> out = Tensor<S>::op_result({n, c, h, w}, {input, layer.gamma, layer.beta});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    auto off = [c, plane](int ni, int ci) {
        return (static_cast<std::size_t>(ni) * c + ci) * plane;
    };

    std::vector<S> invstd(c), chan_mean(c);
    if (train) {
        for (int ci = 0; ci < c; ++ci) {
            S mu = S(0);
            for (int ni = 0; ni < n; ++ni) {
                const S* p = input.data() + off(ni, ci);
                for (std::size_t j = 0; j < plane; ++j) mu += p[j];
            }
            mu /= static_cast<S>(m);
            S var = S(0);
            for (int ni = 0; ni < n; ++ni) {
                const S* p = input.data() + off(ni, ci);
                for (std::size_t j = 0; j < plane; ++j) {
                    const S d = p[j] - mu;
                    var += d * d;
                }
            }
            var /= static_cast<S>(m);  // biased, used for normalization
            chan_mean[ci] = mu;
            invstd[ci] = S(1) / std::sqrt(var + layer.eps);
            // running stats use the unbiased variance
            const S unbiased = m > 1 ? var * static_cast<S>(m) / static_cast<S>(m - 1) : var;
            layer.running_mean.data()[ci] =
                (S(1) - layer.momentum) * layer.running_mean.data()[ci] + layer.momentum * mu;
            layer.running_var.data()[ci] =
                (S(1) - layer.momentum) * layer.running_var.data()[ci] + layer.momentum * unbiased;
        }
    } else {
        for (int ci = 0; ci < c; ++ci) {
            chan_mean[ci] = layer.running_mean.data()[ci];
            invstd[ci] = S(1) / std::sqrt(layer.running_var.data()[ci] + layer.eps);
        }
    }

    // xhat cached for the backward pass
    auto xhat = std::make_shared<std::vector<S>>(input.size());
    for (int ci = 0; ci < c; ++ci) {
        const S mu = chan_mean[ci], is = invstd[ci];
        const S g = layer.gamma.data()[ci], b = layer.beta.data()[ci];
        for (int ni = 0; ni < n; ++ni) {
            const S* p = input.data() + off(ni, ci);
            S* xh = xhat->data() + off(ni, ci);
            S* o = out.data() + off(ni, ci);
            for (std::size_t j = 0; j < plane; ++j) {
                xh[j] = (p[j] - mu) * is;
                o[j] = g * xh[j] + b;
            }
        }
    }

    Tensor<S> gamma = layer.gamma, beta = layer.beta;
    out.set_backward([input, gamma, beta, out, xhat, invstd, n, c, plane, m, train]() mutable {
        for (int ci = 0; ci < c; ++ci) {
            S sum_g = S(0), sum_gx = S(0);
            for (int ni = 0; ni < n; ++ni) {
                const std::size_t off = (static_cast<std::size_t>(ni) * c + ci) * plane;
                const S* g = out.grad() + off;
                const S* xh = xhat->data() + off;
                for (std::size_t j = 0; j < plane; ++j) {
                    sum_g += g[j];
                    sum_gx += g[j] * xh[j];
                }
            }
            if (gamma.needs_grad()) gamma.grad_accum()[ci] += sum_gx;
            if (beta.needs_grad()) beta.grad_accum()[ci] += sum_g;
            if (input.needs_grad()) {
                const S gm = gamma.data()[ci] * invstd[ci];
                const S mean_g = sum_g / static_cast<S>(m);
                const S mean_gx = sum_gx / static_cast<S>(m);
                for (int ni = 0; ni < n; ++ni) {
                    const std::size_t off = (static_cast<std::size_t>(ni) * c + ci) * plane;
                    const S* g = out.grad() + off;
                    const S* xh = xhat->data() + off;
                    S* gi = input.grad_accum() + off;
                    if (train) {
                        for (std::size_t j = 0; j < plane; ++j)
                            gi[j] += gm * (g[j] - mean_g - xh[j] * mean_gx);
                    } else {
                        for (std::size_t j = 0; j < plane; ++j) gi[j] += gm * g[j];
                    }
                }
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> linear_forward(Tensor<S> input, LinearLayer<S>& layer) {
    if (input.shape().size() != 2) throw DimensionError("linear: input must be [N,in]");
    const int n = input.shape()[0], in = input.shape()[1];
    const int out_dim = layer.weight.shape()[0];
    if (layer.weight.shape()[1] != in) throw DimensionError("linear: feature dim mismatch");

    Tensor<S> out = Tensor<S>::op_result({n, out_dim}, {input, layer.weight, layer.bias});
    out.mat(n, out_dim).noalias() = input.mat(n, in) * layer.weight.mat(out_dim, in).transpose();
    out.mat(n, out_dim).rowwise() += layer.bias.vec().transpose();

    Tensor<S> weight = layer.weight, bias = layer.bias;
    out.set_backward([input, weight, bias, out, n, in, out_dim]() mutable {
        using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const Mat> g(out.grad(), n, out_dim);
        if (input.needs_grad()) {
            Eigen::Map<Mat> gi(input.grad_accum(), n, in);
            gi.noalias() += g * weight.mat(out_dim, in);
        }
        if (weight.needs_grad()) {
            Eigen::Map<Mat> gw(weight.grad_accum(), out_dim, in);
            gw.noalias() += g.transpose() * input.mat(n, in);
        }
        if (bias.needs_grad()) {
            Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> gb(bias.grad_accum(), out_dim);
            gb += g.colwise().sum().transpose();
        }
    });
    return out;
}

// Rows with norm below eps stay zero (and get zero gradient).
template <typename S>
Tensor<S> l2_normalize_rows(Tensor<S> input) {
    if (input.shape().size() != 2) throw DimensionError("l2_normalize_rows: input must be [N,D]");
    const int n = input.shape()[0], d = input.shape()[1];
    const S eps = static_cast<S>(1e-12);

    Tensor<S> out = Tensor<S>::op_result({n, d}, {input});
    auto norms = std::make_shared<std::vector<S>>(n);
    for (int i = 0; i < n; ++i) {
        const S* row = input.data() + static_cast<std::size_t>(i) * d;
        S sq = S(0);
        for (int j = 0; j < d; ++j) sq += row[j] * row[j];
        const S norm = std::sqrt(sq);
        (*norms)[i] = norm;
        S* o = out.data() + static_cast<std::size_t>(i) * d;
        if (norm < eps) {
            for (int j = 0; j < d; ++j) o[j] = S(0);
        } else {
            for (int j = 0; j < d; ++j) o[j] = row[j] / norm;
        }
    }
    out.set_backward([input, out, norms, n, d, eps]() mutable {
        if (!input.needs_grad()) return;
        for (int i = 0; i < n; ++i) {
            const S norm = (*norms)[i];
            if (norm < eps) continue;
            const std::size_t off = static_cast<std::size_t>(i) * d;
            const S* g = out.grad() + off;
            const S* y = out.data() + off;
            S* gi = input.grad_accum() + off;
            S dot = S(0);
            for (int j = 0; j < d; ++j) dot += y[j] * g[j];
            for (int j = 0; j < d; ++j) gi[j] += (g[j] - y[j] * dot) / norm;
        }
    });
    return out;
}

// Mean over every element of (pred - target)^2. Gradient flows to pred only.
template <typename S>
Tensor<S> mse_loss(Tensor<S> pred, Tensor<S> target) {
    lc::detail::check_same_shape(pred, target, "mse_loss");
    Tensor<S> out = Tensor<S>::op_result({1}, {pred});
    const std::size_t n = pred.size();
    S acc = S(0);
    for (std::size_t i = 0; i < n; ++i) {
        const S d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    out.data()[0] = acc / static_cast<S>(n);
    out.set_backward([pred, target, out, n]() mutable {
        if (!pred.needs_grad()) return;
        const S g = out.grad()[0] * S(2) / static_cast<S>(n);
        S* gp = pred.grad_accum();
        for (std::size_t i = 0; i < n; ++i) gp[i] += g * (pred.data()[i] - target.data()[i]);
    });
    return out;
}

// (1/N) sum_i max(0, ||a_i - p_i||^2 - ||a_i - n_i||^2 + margin).
// The hinge zeroes gradients for satisfied triplets.
template <typename S>
Tensor<S> triplet_loss(Tensor<S> anchor, Tensor<S> positive, Tensor<S> negative, S margin) {
    lc::detail::check_same_shape(anchor, positive, "triplet_loss");
    lc::detail::check_same_shape(anchor, negative, "triplet_loss");
    if (anchor.shape().size() != 2) throw DimensionError("triplet_loss: inputs must be [N,D]");
    const int n = anchor.shape()[0], d = anchor.shape()[1];
    if (n < 1) throw ContractError("triplet_loss: empty batch");

    Tensor<S> out = Tensor<S>::op_result({1}, {anchor, positive, negative});
    auto active = std::make_shared<std::vector<std::uint8_t>>(n);
    S acc = S(0);
    for (int i = 0; i < n; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * d;
        const S *a = anchor.data() + off, *p = positive.data() + off, *q = negative.data() + off;
        S dap = S(0), dan = S(0);
        for (int j = 0; j < d; ++j) {
            const S ep = a[j] - p[j], en = a[j] - q[j];
            dap += ep * ep;
            dan += en * en;
        }
        const S v = dap - dan + margin;
        (*active)[i] = v > S(0);
        if (v > S(0)) acc += v;
    }
    out.data()[0] = acc / static_cast<S>(n);

    out.set_backward([anchor, positive, negative, out, active, n, d]() mutable {
        const S g = out.grad()[0] * S(2) / static_cast<S>(n);
        for (int i = 0; i < n; ++i) {
            if (!(*active)[i]) continue;
            const std::size_t off = static_cast<std::size_t>(i) * d;
            const S *a = anchor.data() + off, *p = positive.data() + off,
                    *q = negative.data() + off;
            if (anchor.needs_grad()) {
                S* ga = anchor.grad_accum() + off;
                for (int j = 0; j < d; ++j) ga[j] += g * (q[j] - p[j]);
            }
            if (positive.needs_grad()) {
                S* gp = positive.grad_accum() + off;
                for (int j = 0; j < d; ++j) gp[j] += g * (p[j] - a[j]);
            }
            if (negative.needs_grad()) {
                S* gn = negative.grad_accum() + off;
                for (int j = 0; j < d; ++j) gn[j] += g * (a[j] - q[j]);
            }
        }
    });
    return out;
}

// Adam with bias correction. Moment buffers are keyed by parameter order,
// so the parameter list must be stable across steps.
template <typename S>
class Adam {
public:
    explicit Adam(S lr = static_cast<S>(1e-3), S beta1 = static_cast<S>(0.9),
                  S beta2 = static_cast<S>(0.999), S eps = static_cast<S>(1e-8))
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<Tensor<S>>& params) {
        if (moments_.empty()) {
            moments_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                moments_[i].m.assign(params[i].size(), S(0));
                moments_[i].v.assign(params[i].size(), S(0));
            }
        }
        if (moments_.size() != params.size())
            throw ContractError("adam: parameter list changed size");
        ++t_;
        const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1_), t_));
        const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2_), t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!params[i].has_grad())
                throw ContractError("adam: missing gradient for parameter " + std::to_string(i));
            S* w = params[i].data();
            const S* g = params[i].grad();
            S* m = moments_[i].m.data();
            S* v = moments_[i].v.data();
            for (std::size_t j = 0; j < params[i].size(); ++j) {
                m[j] = beta1_ * m[j] + (S(1) - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (S(1) - beta2_) * g[j] * g[j];
                const S mhat = m[j] / bc1;
                const S vhat = v[j] / bc2;
                w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    void zero_grad(std::vector<Tensor<S>>& params) {
        for (auto& p : params) p.zero_grad();
    }

    std::int64_t step_count() const { return t_; }
    S learning_rate() const { return lr_; }
    S beta1() const { return beta1_; }
    S beta2() const { return beta2_; }
    S epsilon() const { return eps_; }

    struct Moments {
        std::vector<S> m, v;
    };
    std::vector<Moments>& moments() { return moments_; }
    void restore(std::int64_t t, std::vector<Moments> moments) {
        t_ = t;
        moments_ = std::move(moments);
    }

private:
    S lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Moments> moments_;
};

}  // namespace lc::nn
