#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aod/errors.hpp"
#include "aod/rng.hpp"
#include "aod/tensor.hpp"

namespace aod::nn {

// ---------------------------------------------------------------------------
// Layer types. Tensors flow as [N, C, H, W] until Flatten, then [N, features].
// ---------------------------------------------------------------------------

struct Conv2d {
    std::size_t in_ch = 1, out_ch = 1, kernel = 3, stride = 1, pad = 0;
    Tensor weight; // [out_ch, in_ch, k, k]
    Tensor bias;   // [out_ch]
};

struct BatchNorm {
    std::size_t channels = 1;
    double momentum = 0.9; // running = momentum*running + (1-momentum)*batch
    double eps = 1e-5;
    Tensor gamma, beta;              // trainable
    Tensor running_mean, running_var; // inference statistics (biased var)
};

struct ReLU {};

struct MaxPool {
    std::size_t kernel = 2, stride = 2;
};

struct Flatten {};

struct Dense {
    std::size_t in = 1, out = 1;
    Tensor weight; // [out, in]
    Tensor bias;   // [out]
};

struct Dropout {
    double p = 0.25; // inverted dropout: survivors scaled by 1/(1-p)
};

using Layer = std::variant<Conv2d, BatchNorm, ReLU, MaxPool, Flatten, Dense, Dropout>;

// Min-max bounds fitted on the training inputs.
struct ScalingParams {
    double min = 0.0;
    double max = 1.0;
};

struct Model {
    std::vector<Layer> layers;
    std::optional<ScalingParams> scaler;
};

enum class Mode { Train, Infer };

// ---------------------------------------------------------------------------
// Shape algebra
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void shape_error(std::size_t layer_index, const std::string& kind,
                                     const std::string& msg) {
    throw DataError("layer " + std::to_string(layer_index) + " (" + kind + "): " + msg);
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                   std::size_t pad, std::size_t layer_index, const char* kind) {
    const std::size_t padded = in + 2 * pad;
    if (padded < kernel) shape_error(layer_index, kind, "kernel larger than padded input");
    if ((padded - kernel) % stride != 0 && std::string(kind) == "conv2d")
        shape_error(layer_index, kind, "input extent not divisible by stride");
    return (padded - kernel) / stride + 1; // floor for pooling
}

} // namespace detail

// Output shape of one layer; throws a DataError naming the layer on mismatch.
inline std::vector<std::size_t> layer_output_shape(const Layer& layer,
                                                   const std::vector<std::size_t>& in,
                                                   std::size_t layer_index) {
    using detail::shape_error;
    if (std::holds_alternative<Conv2d>(layer)) {
        const auto& l = std::get<Conv2d>(layer);
        if (in.size() != 4) shape_error(layer_index, "conv2d", "expected rank-4 input, got " + shape_string(in));
        if (in[1] != l.in_ch)
            shape_error(layer_index, "conv2d",
                        "expected " + std::to_string(l.in_ch) + " channels, got " + std::to_string(in[1]));
        std::size_t h = detail::conv_out_extent(in[2], l.kernel, l.stride, l.pad, layer_index, "conv2d");
        std::size_t w = detail::conv_out_extent(in[3], l.kernel, l.stride, l.pad, layer_index, "conv2d");
        return {in[0], l.out_ch, h, w};
    }
    if (std::holds_alternative<BatchNorm>(layer)) {
        const auto& l = std::get<BatchNorm>(layer);
        if (in.size() != 4) shape_error(layer_index, "batchnorm", "expected rank-4 input, got " + shape_string(in));
        if (in[1] != l.channels)
            shape_error(layer_index, "batchnorm",
                        "expected " + std::to_string(l.channels) + " channels, got " + std::to_string(in[1]));
        return in;
    }
    if (std::holds_alternative<ReLU>(layer)) return in;
    if (std::holds_alternative<MaxPool>(layer)) {
        const auto& l = std::get<MaxPool>(layer);
        if (in.size() != 4) shape_error(layer_index, "maxpool", "expected rank-4 input, got " + shape_string(in));
        if (in[2] < l.kernel || in[3] < l.kernel)
            shape_error(layer_index, "maxpool", "window larger than input " + shape_string(in));
        std::size_t h = (in[2] - l.kernel) / l.stride + 1;
        std::size_t w = (in[3] - l.kernel) / l.stride + 1;
        return {in[0], in[1], h, w};
    }
    if (std::holds_alternative<Flatten>(layer)) {
        if (in.size() < 2) shape_error(layer_index, "flatten", "expected rank >= 2, got " + shape_string(in));
        std::size_t features = 1;
        for (std::size_t d = 1; d < in.size(); ++d) features *= in[d];
        return {in[0], features};
    }
    if (std::holds_alternative<Dense>(layer)) {
        const auto& l = std::get<Dense>(layer);
        if (in.size() != 2) shape_error(layer_index, "dense", "expected rank-2 input, got " + shape_string(in));
        if (in[1] != l.in)
            shape_error(layer_index, "dense",
                        "expected " + std::to_string(l.in) + " features, got " + std::to_string(in[1]));
        return {in[0], l.out};
    }
    return in; // Dropout
}

// Per-layer shape trace starting from `input` (the input shape is entry 0).
inline std::vector<std::vector<std::size_t>> shape_trace(const Model& model,
                                                         std::vector<std::size_t> input) {
    std::vector<std::vector<std::size_t>> trace{input};
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        input = layer_output_shape(model.layers[i], input, i);
        trace.push_back(input);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Layer forward/backward kernels
// ---------------------------------------------------------------------------

namespace detail {

// Writes one sample's patch matrix (K = C*k*k rows, P = H'*W' columns) into
// a wider batch-fused matrix: row r of the sample lands at
// col[r * row_stride + col_offset .. + P]. Zero padding outside the input.
inline void im2col(const double* x, std::size_t channels, std::size_t height, std::size_t width,
                   std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t out_h,
                   std::size_t out_w, double* col, std::size_t row_stride, std::size_t col_offset) {
    const std::size_t patch = kernel * kernel;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < kernel; ++ki) {
            for (std::size_t kj = 0; kj < kernel; ++kj) {
                double* row = col + (c * patch + ki * kernel + kj) * row_stride + col_offset;
                for (std::size_t oh = 0; oh < out_h; ++oh) {
                    const long long ih = static_cast<long long>(oh * stride + ki) - static_cast<long long>(pad);
                    if (ih < 0 || ih >= static_cast<long long>(height)) {
                        for (std::size_t ow = 0; ow < out_w; ++ow) row[oh * out_w + ow] = 0.0;
                        continue;
                    }
                    const double* xrow = x + (c * height + static_cast<std::size_t>(ih)) * width;
                    for (std::size_t ow = 0; ow < out_w; ++ow) {
                        const long long iw = static_cast<long long>(ow * stride + kj) - static_cast<long long>(pad);
                        row[oh * out_w + ow] =
                            (iw < 0 || iw >= static_cast<long long>(width)) ? 0.0 : xrow[iw];
                    }
                }
            }
        }
    }
}

// Scatter-add of one sample's slice of a batch-fused col matrix back onto
// the input image.
inline void col2im_acc(const double* col, std::size_t channels, std::size_t height,
                       std::size_t width, std::size_t kernel, std::size_t stride, std::size_t pad,
                       std::size_t out_h, std::size_t out_w, double* dx, std::size_t row_stride,
                       std::size_t col_offset) {
    const std::size_t patch = kernel * kernel;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < kernel; ++ki) {
            for (std::size_t kj = 0; kj < kernel; ++kj) {
                const double* row = col + (c * patch + ki * kernel + kj) * row_stride + col_offset;
                for (std::size_t oh = 0; oh < out_h; ++oh) {
                    const long long ih = static_cast<long long>(oh * stride + ki) - static_cast<long long>(pad);
                    if (ih < 0 || ih >= static_cast<long long>(height)) continue;
                    double* xrow = dx + (c * height + static_cast<std::size_t>(ih)) * width;
                    for (std::size_t ow = 0; ow < out_w; ++ow) {
                        const long long iw = static_cast<long long>(ow * stride + kj) - static_cast<long long>(pad);
                        if (iw < 0 || iw >= static_cast<long long>(width)) continue;
                        xrow[iw] += row[oh * out_w + ow];
                    }
                }
            }
        }
    }
}

} // namespace detail

// Cross-correlation (no kernel flip) plus per-channel bias. The whole batch
// goes through one GEMM: Y(out_ch x N*P) = W(out_ch x K) * col(K x N*P),
// then the fused columns scatter back into [N, out_ch, P] layout.
inline Tensor conv2d_forward(const Conv2d& layer, const Tensor& x, std::size_t layer_index = 0) {
    auto out_shape = layer_output_shape(Layer{layer}, x.shape, layer_index);
    const std::size_t batch = x.shape[0], height = x.shape[2], width = x.shape[3];
    const std::size_t out_h = out_shape[2], out_w = out_shape[3];
    const std::size_t positions = out_h * out_w;
    const std::size_t fused = batch * positions;
    const std::size_t kdim = layer.in_ch * layer.kernel * layer.kernel;

    std::vector<double> col(kdim * fused);
    const std::size_t in_stride = layer.in_ch * height * width;
    for (std::size_t n = 0; n < batch; ++n)
        detail::im2col(x.data.data() + n * in_stride, layer.in_ch, height, width, layer.kernel,
                       layer.stride, layer.pad, out_h, out_w, col.data(), fused, n * positions);

    std::vector<double> y_fused(layer.out_ch * fused, 0.0);
    gemm_acc(y_fused.data(), layer.weight.data.data(), col.data(), layer.out_ch, kdim, fused);

    Tensor y(out_shape);
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t oc = 0; oc < layer.out_ch; ++oc) {
            const double* src = y_fused.data() + oc * fused + n * positions;
            double* dst = y.data.data() + (n * layer.out_ch + oc) * positions;
            const double b = layer.bias[oc];
            for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p] + b;
        }
    return y;
}

// dx, dw, db from upstream dy, with the same batch-fused GEMM shapes.
inline void conv2d_backward(const Conv2d& layer, const Tensor& x, const Tensor& dy, Tensor& dx,
                            Tensor& dw, Tensor& db) {
    const std::size_t batch = x.shape[0], height = x.shape[2], width = x.shape[3];
    const std::size_t out_h = dy.shape[2], out_w = dy.shape[3];
    const std::size_t positions = out_h * out_w;
    const std::size_t fused = batch * positions;
    const std::size_t kdim = layer.in_ch * layer.kernel * layer.kernel;

    dx = Tensor(x.shape);
    dw = Tensor(layer.weight.shape);
    db = Tensor(layer.bias.shape);

    // dy rearranged to (out_ch x N*P); db falls out of the row sums
    std::vector<double> dy_fused(layer.out_ch * fused);
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t oc = 0; oc < layer.out_ch; ++oc) {
            const double* src = dy.data.data() + (n * layer.out_ch + oc) * positions;
            double* dst = dy_fused.data() + oc * fused + n * positions;
            for (std::size_t p = 0; p < positions; ++p) dst[p] = src[p];
        }
    for (std::size_t oc = 0; oc < layer.out_ch; ++oc) {
        const double* row = dy_fused.data() + oc * fused;
        double sum = 0.0;
        for (std::size_t p = 0; p < fused; ++p) sum += row[p];
        db[oc] = sum;
    }

    std::vector<double> col(kdim * fused);
    const std::size_t in_stride = layer.in_ch * height * width;
    for (std::size_t n = 0; n < batch; ++n)
        detail::im2col(x.data.data() + n * in_stride, layer.in_ch, height, width, layer.kernel,
                       layer.stride, layer.pad, out_h, out_w, col.data(), fused, n * positions);

    // dW(out_ch x K) = dy_fused * col^T
    std::vector<double> col_t(fused * kdim);
    transpose_into(col_t.data(), col.data(), kdim, fused);
    gemm_acc(dw.data.data(), dy_fused.data(), col_t.data(), layer.out_ch, fused, kdim);

    // dcol(K x N*P) = W^T * dy_fused, scattered back through col2im
    std::vector<double> w_t(kdim * layer.out_ch);
    transpose_into(w_t.data(), layer.weight.data.data(), layer.out_ch, kdim);
    std::vector<double> dcol(kdim * fused, 0.0);
    gemm_acc(dcol.data(), w_t.data(), dy_fused.data(), kdim, layer.out_ch, fused);
    for (std::size_t n = 0; n < batch; ++n)
        detail::col2im_acc(dcol.data(), layer.in_ch, height, width, layer.kernel, layer.stride,
                           layer.pad, out_h, out_w, dx.data.data() + n * in_stride, fused,
                           n * positions);
}

// Windowwise max with floor semantics; ties keep the first occurrence in
// row-major order. `argmax` caches flat input offsets for the backward pass.
inline Tensor maxpool_forward(const MaxPool& layer, const Tensor& x,
                              std::vector<std::size_t>& argmax, std::size_t layer_index = 0) {
    auto out_shape = layer_output_shape(Layer{layer}, x.shape, layer_index);
    const std::size_t batch = x.shape[0], channels = x.shape[1], height = x.shape[2],
                      width = x.shape[3];
    const std::size_t out_h = out_shape[2], out_w = out_shape[3];
    Tensor y(out_shape);
    argmax.assign(y.numel(), 0);

    std::size_t out_i = 0;
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t plane = (n * channels + c) * height * width;
            for (std::size_t oh = 0; oh < out_h; ++oh) {
                for (std::size_t ow = 0; ow < out_w; ++ow, ++out_i) {
                    std::size_t best_idx = plane + (oh * layer.stride) * width + ow * layer.stride;
                    double best = x[best_idx];
                    for (std::size_t ki = 0; ki < layer.kernel; ++ki) {
                        for (std::size_t kj = 0; kj < layer.kernel; ++kj) {
                            std::size_t idx =
                                plane + (oh * layer.stride + ki) * width + (ow * layer.stride + kj);
                            if (x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    y[out_i] = best;
                    argmax[out_i] = best_idx;
                }
            }
        }
    }
    return y;
}

inline Tensor maxpool_backward(const Tensor& dy, const std::vector<std::size_t>& argmax,
                               const std::vector<std::size_t>& in_shape) {
    Tensor dx(in_shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[argmax[i]] += dy[i];
    return dx;
}

struct BatchNormCache {
    Tensor xhat;
    std::vector<double> inv_std; // per channel
};

// Train mode normalizes by the biased batch statistics and folds them into
// the running estimates; infer mode uses the running estimates.
inline Tensor batchnorm_forward(BatchNorm& layer, const Tensor& x, Mode mode,
                                BatchNormCache* cache = nullptr, std::size_t layer_index = 0) {
    layer_output_shape(Layer{layer}, x.shape, layer_index);
    const std::size_t batch = x.shape[0], channels = x.shape[1], plane = x.shape[2] * x.shape[3];
    const std::size_t per_channel = batch * plane;
    if (mode == Mode::Train && per_channel < 2)
        throw DataError("layer " + std::to_string(layer_index) + " (batchnorm): batch too small, need N*H*W >= 2");

    Tensor y(x.shape);
    if (cache) {
        cache->xhat = Tensor(x.shape);
        cache->inv_std.assign(channels, 0.0);
    }
    for (std::size_t c = 0; c < channels; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double sum = 0.0;
            for (std::size_t n = 0; n < batch; ++n) {
                const double* src = x.data.data() + (n * channels + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += src[i];
            }
            mean = sum / static_cast<double>(per_channel);
            double sq = 0.0;
            for (std::size_t n = 0; n < batch; ++n) {
                const double* src = x.data.data() + (n * channels + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) sq += (src[i] - mean) * (src[i] - mean);
            }
            var = sq / static_cast<double>(per_channel);
            layer.running_mean[c] = layer.momentum * layer.running_mean[c] + (1.0 - layer.momentum) * mean;
            layer.running_var[c] = layer.momentum * layer.running_var[c] + (1.0 - layer.momentum) * var;
        } else {
            mean = layer.running_mean[c];
            var = layer.running_var[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + layer.eps);
        const double g = layer.gamma[c], b = layer.beta[c];
        for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xhat = (x[base + i] - mean) * inv_std;
                if (cache) cache->xhat[base + i] = xhat;
                y[base + i] = g * xhat + b;
            }
        }
        if (cache) cache->inv_std[c] = inv_std;
    }
    return y;
}

// Running-statistics normalization without any state update.
inline Tensor batchnorm_infer(const BatchNorm& layer, const Tensor& x, std::size_t layer_index = 0) {
    layer_output_shape(Layer{layer}, x.shape, layer_index);
    const std::size_t batch = x.shape[0], channels = x.shape[1], plane = x.shape[2] * x.shape[3];
    Tensor y(x.shape);
    for (std::size_t c = 0; c < channels; ++c) {
        const double inv_std = 1.0 / std::sqrt(layer.running_var[c] + layer.eps);
        const double g = layer.gamma[c], b = layer.beta[c], mean = layer.running_mean[c];
        for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) y[base + i] = g * (x[base + i] - mean) * inv_std + b;
        }
    }
    return y;
}

// Full batch-statistics gradient:
//   dx = gamma*inv_std * (dy - mean(dy) - xhat*mean(dy*xhat))
inline Tensor batchnorm_backward(const BatchNorm& layer, const BatchNormCache& cache,
                                 const Tensor& dy, Tensor& dgamma, Tensor& dbeta) {
    const std::size_t batch = dy.shape[0], channels = dy.shape[1], plane = dy.shape[2] * dy.shape[3];
    const double per_channel = static_cast<double>(batch * plane);
    dgamma = Tensor(layer.gamma.shape);
    dbeta = Tensor(layer.beta.shape);
    Tensor dx(dy.shape);
    for (std::size_t c = 0; c < channels; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[base + i];
                sum_dy_xhat += dy[base + i] * cache.xhat[base + i];
            }
        }
        dgamma[c] = sum_dy_xhat;
        dbeta[c] = sum_dy;
        const double scale = layer.gamma[c] * cache.inv_std[c];
        const double mean_dy = sum_dy / per_channel;
        const double mean_dy_xhat = sum_dy_xhat / per_channel;
        for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                dx[base + i] = scale * (dy[base + i] - mean_dy - cache.xhat[base + i] * mean_dy_xhat);
        }
    }
    return dx;
}

// y = x * W^T + b
inline Tensor dense_forward(const Dense& layer, const Tensor& x, std::size_t layer_index = 0) {
    auto out_shape = layer_output_shape(Layer{layer}, x.shape, layer_index);
    const std::size_t batch = x.shape[0];
    Tensor y(out_shape);
    std::vector<double> w_t(layer.in * layer.out);
    transpose_into(w_t.data(), layer.weight.data.data(), layer.out, layer.in);
    gemm_acc(y.data.data(), x.data.data(), w_t.data(), batch, layer.in, layer.out);
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < layer.out; ++o) y[n * layer.out + o] += layer.bias[o];
    return y;
}

inline void dense_backward(const Dense& layer, const Tensor& x, const Tensor& dy, Tensor& dx,
                           Tensor& dw, Tensor& db) {
    const std::size_t batch = x.shape[0];
    dx = Tensor(x.shape);
    dw = Tensor(layer.weight.shape);
    db = Tensor(layer.bias.shape);

    gemm_acc(dx.data.data(), dy.data.data(), layer.weight.data.data(), batch, layer.out, layer.in);

    std::vector<double> dy_t(layer.out * batch);
    transpose_into(dy_t.data(), dy.data.data(), batch, layer.out);
    gemm_acc(dw.data.data(), dy_t.data(), x.data.data(), layer.out, batch, layer.in);

    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t o = 0; o < layer.out; ++o) db[o] += dy[n * layer.out + o];
}

inline Tensor relu_forward(const Tensor& x, std::vector<std::uint8_t>* mask = nullptr) {
    Tensor y(x.shape);
    if (mask) mask->assign(x.numel(), 0);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (x[i] > 0.0) {
            y[i] = x[i];
            if (mask) (*mask)[i] = 1;
        }
    }
    return y;
}

inline Tensor relu_backward(const Tensor& dy, const std::vector<std::uint8_t>& mask) {
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = mask[i] ? dy[i] : 0.0;
    return dx;
}

// Inverted dropout; identity in infer mode.
inline Tensor dropout_forward(const Dropout& layer, const Tensor& x, Mode mode, Xoshiro256* rng,
                              std::vector<std::uint8_t>* mask = nullptr) {
    if (layer.p < 0.0 || layer.p >= 1.0) throw DataError("dropout: p must be in [0, 1)");
    if (mode == Mode::Infer || layer.p == 0.0) {
        if (mask) mask->assign(x.numel(), 1);
        return x;
    }
    if (!rng) throw DataError("dropout: train mode needs an RNG");
    const double keep_scale = 1.0 / (1.0 - layer.p);
    Tensor y(x.shape);
    if (mask) mask->assign(x.numel(), 0);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (rng->next_double() >= layer.p) {
            y[i] = x[i] * keep_scale;
            if (mask) (*mask)[i] = 1;
        }
    }
    return y;
}

inline Tensor dropout_backward(const Dropout& layer, const Tensor& dy,
                               const std::vector<std::uint8_t>& mask) {
    const double keep_scale = layer.p == 0.0 ? 1.0 : 1.0 / (1.0 - layer.p);
    Tensor dx(dy.shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] = mask[i] ? dy[i] * keep_scale : 0.0;
    return dx;
}

// L = mean((pred - target)^2) over the whole batch; grad = 2(pred - target)/N.
struct MseResult {
    double loss = 0.0;
    Tensor grad;
};

inline MseResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw DataError("mse_loss: shape mismatch");
    if (pred.numel() == 0) throw DataError("mse_loss: empty batch");
    MseResult r;
    r.grad = Tensor(pred.shape);
    const double n = static_cast<double>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double e = pred[i] - target[i];
        r.loss += e * e;
        r.grad[i] = 2.0 * e / n;
    }
    r.loss /= n;
    return r;
}

// ---------------------------------------------------------------------------
// Whole-model forward/backward
// ---------------------------------------------------------------------------

struct Conv2dCache {
    Tensor input;
};
struct BatchNormLayerCache {
    BatchNormCache bn;
};
struct ReLUCache {
    std::vector<std::uint8_t> mask;
};
struct MaxPoolCache {
    std::vector<std::size_t> argmax;
    std::vector<std::size_t> in_shape;
};
struct FlattenCache {
    std::vector<std::size_t> in_shape;
};
struct DenseCache {
    Tensor input;
};
struct DropoutCache {
    std::vector<std::uint8_t> mask;
};

using LayerCache = std::variant<std::monostate, Conv2dCache, BatchNormLayerCache, ReLUCache,
                                MaxPoolCache, FlattenCache, DenseCache, DropoutCache>;

// Deterministic, cache-free inference pass.
inline Tensor infer(const Model& model, const Tensor& input) {
    Tensor x = input;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            x = conv2d_forward(*conv, x, i);
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            x = batchnorm_infer(*bn, x, i);
        } else if (std::holds_alternative<ReLU>(layer)) {
            x = relu_forward(x);
        } else if (const auto* pool = std::get_if<MaxPool>(&layer)) {
            std::vector<std::size_t> argmax;
            x = maxpool_forward(*pool, x, argmax, i);
        } else if (std::holds_alternative<Flatten>(layer)) {
            auto shape = layer_output_shape(layer, x.shape, i);
            x.shape = shape;
        } else if (const auto* dense = std::get_if<Dense>(&layer)) {
            x = dense_forward(*dense, x, i);
        } else if (const auto* drop = std::get_if<Dropout>(&layer)) {
            x = dropout_forward(*drop, x, Mode::Infer, nullptr);
        }
    }
    return x;
}

// Training pass; caches everything the backward pass consumes. BatchNorm
// running statistics are updated, so the model is mutable here.
inline Tensor forward_train(Model& model, const Tensor& input, Xoshiro256& rng,
                            std::vector<LayerCache>& caches) {
    caches.assign(model.layers.size(), std::monostate{});
    Tensor x = input;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        Layer& layer = model.layers[i];
        if (auto* conv = std::get_if<Conv2d>(&layer)) {
            caches[i] = Conv2dCache{x};
            x = conv2d_forward(*conv, x, i);
        } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
            BatchNormLayerCache cache;
            x = batchnorm_forward(*bn, x, Mode::Train, &cache.bn, i);
            caches[i] = std::move(cache);
        } else if (std::holds_alternative<ReLU>(layer)) {
            ReLUCache cache;
            x = relu_forward(x, &cache.mask);
            caches[i] = std::move(cache);
        } else if (auto* pool = std::get_if<MaxPool>(&layer)) {
            MaxPoolCache cache;
            cache.in_shape = x.shape;
            x = maxpool_forward(*pool, x, cache.argmax, i);
            caches[i] = std::move(cache);
        } else if (std::holds_alternative<Flatten>(layer)) {
            caches[i] = FlattenCache{x.shape};
            x.shape = layer_output_shape(layer, x.shape, i);
        } else if (auto* dense = std::get_if<Dense>(&layer)) {
            caches[i] = DenseCache{x};
            x = dense_forward(*dense, x, i);
        } else if (auto* drop = std::get_if<Dropout>(&layer)) {
            DropoutCache cache;
            x = dropout_forward(*drop, x, Mode::Train, &rng, &cache.mask);
            caches[i] = std::move(cache);
        }
    }
    return x;
}

// Parameter gradients aligned with the model's layer list.
struct LayerGrads {
    Tensor a; // conv/dense weight, batchnorm gamma
    Tensor b; // conv/dense bias, batchnorm beta
    bool present = false;
};

using Gradients = std::vector<LayerGrads>;

// Reverse pass from the loss gradient; returns d(input).
inline Tensor backward(const Model& model, const std::vector<LayerCache>& caches,
                       const Tensor& loss_grad, Gradients& grads) {
    if (caches.size() != model.layers.size())
        throw DataError("backward: cache does not match model (stale or missing forward cache)");
    grads.assign(model.layers.size(), LayerGrads{});
    Tensor dy = loss_grad;
    for (std::size_t ri = model.layers.size(); ri-- > 0;) {
        const Layer& layer = model.layers[ri];
        const LayerCache& cache = caches[ri];
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            const auto* c = std::get_if<Conv2dCache>(&cache);
            if (!c) throw DataError("backward: missing conv cache at layer " + std::to_string(ri));
            Tensor dx;
            conv2d_backward(*conv, c->input, dy, dx, grads[ri].a, grads[ri].b);
            grads[ri].present = true;
            dy = std::move(dx);
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            const auto* c = std::get_if<BatchNormLayerCache>(&cache);
            if (!c) throw DataError("backward: missing batchnorm cache at layer " + std::to_string(ri));
            dy = batchnorm_backward(*bn, c->bn, dy, grads[ri].a, grads[ri].b);
            grads[ri].present = true;
        } else if (std::holds_alternative<ReLU>(layer)) {
            const auto* c = std::get_if<ReLUCache>(&cache);
            if (!c) throw DataError("backward: missing relu cache at layer " + std::to_string(ri));
            dy = relu_backward(dy, c->mask);
        } else if (std::holds_alternative<MaxPool>(layer)) {
            const auto* c = std::get_if<MaxPoolCache>(&cache);
            if (!c) throw DataError("backward: missing maxpool cache at layer " + std::to_string(ri));
            dy = maxpool_backward(dy, c->argmax, c->in_shape);
        } else if (std::holds_alternative<Flatten>(layer)) {
            const auto* c = std::get_if<FlattenCache>(&cache);
            if (!c) throw DataError("backward: missing flatten cache at layer " + std::to_string(ri));
            dy.shape = c->in_shape;
        } else if (const auto* dense = std::get_if<Dense>(&layer)) {
            const auto* c = std::get_if<DenseCache>(&cache);
            if (!c) throw DataError("backward: missing dense cache at layer " + std::to_string(ri));
            Tensor dx;
            dense_backward(*dense, c->input, dy, dx, grads[ri].a, grads[ri].b);
            grads[ri].present = true;
            dy = std::move(dx);
        } else if (const auto* drop = std::get_if<Dropout>(&layer)) {
            const auto* c = std::get_if<DropoutCache>(&cache);
            if (!c) throw DataError("backward: missing dropout cache at layer " + std::to_string(ri));
            dy = dropout_backward(*drop, dy, c->mask);
        }
    }
    return dy;
}

// ---------------------------------------------------------------------------
// Parameters and Adam
// ---------------------------------------------------------------------------

inline std::vector<Tensor*> parameters(Model& model) {
    std::vector<Tensor*> out;
    for (Layer& layer : model.layers) {
        if (auto* conv = std::get_if<Conv2d>(&layer)) {
            out.push_back(&conv->weight);
            out.push_back(&conv->bias);
        } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
            out.push_back(&bn->gamma);
            out.push_back(&bn->beta);
        } else if (auto* dense = std::get_if<Dense>(&layer)) {
            out.push_back(&dense->weight);
            out.push_back(&dense->bias);
        }
    }
    return out;
}

inline std::vector<const Tensor*> gradient_list(const Model& model, const Gradients& grads) {
    std::vector<const Tensor*> out;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        if (std::holds_alternative<Conv2d>(layer) || std::holds_alternative<BatchNorm>(layer) ||
            std::holds_alternative<Dense>(layer)) {
            if (!grads[i].present) throw DataError("gradient_list: missing grads at layer " + std::to_string(i));
            out.push_back(&grads[i].a);
            out.push_back(&grads[i].b);
        }
    }
    return out;
}

inline std::size_t parameter_count(const Model& model) {
    std::size_t n = 0;
    for (const Tensor* t : parameters(const_cast<Model&>(model))) n += t->numel();
    return n;
}

struct AdamState {
    double lr = 0.003;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::vector<Tensor> m, v; // aligned with parameters(model)

    static AdamState init(Model& model, double lr = 0.003) {
        AdamState s;
        s.lr = lr;
        for (Tensor* p : parameters(model)) {
            s.m.emplace_back(p->shape);
            s.v.emplace_back(p->shape);
        }
        return s;
    }
};

// Standard bias-corrected Adam; one step per call.
inline void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                      AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw DataError("adam_step: parameter/gradient/state shape mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.same_shape(g) || !p.same_shape(state.m[i]))
            throw DataError("adam_step: shape mismatch at parameter " + std::to_string(i));
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace detail {

inline void he_uniform(Tensor& t, std::size_t fan_in, Xoshiro256& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

} // namespace detail

inline Conv2d make_conv(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                        std::size_t stride, std::size_t pad, Xoshiro256& rng) {
    Conv2d c{in_ch, out_ch, kernel, stride, pad, Tensor({out_ch, in_ch, kernel, kernel}),
             Tensor({out_ch})};
    detail::he_uniform(c.weight, in_ch * kernel * kernel, rng);
    return c;
}

inline BatchNorm make_batchnorm(std::size_t channels) {
    BatchNorm bn;
    bn.channels = channels;
    bn.gamma = Tensor({channels});
    bn.gamma.fill(1.0);
    bn.beta = Tensor({channels});
    bn.running_mean = Tensor({channels});
    bn.running_var = Tensor({channels});
    bn.running_var.fill(1.0);
    return bn;
}

inline Dense make_dense(std::size_t in, std::size_t out, Xoshiro256& rng) {
    Dense d{in, out, Tensor({out, in}), Tensor({out})};
    detail::he_uniform(d.weight, in, rng);
    return d;
}

constexpr std::uint64_t kInitStream = 0x494e4954; // "INIT"

// Three conv/norm/relu/pool stages (16/32/64 channels, 3x3 kernels, pad 1)
// followed by 128/32 dense layers with dropout and a linear single-output
// head. Sized for 1x30x30 inputs: the flatten sees 64*3*3 = 576 features.
inline Model default_architecture(std::uint64_t seed) {
    Xoshiro256 rng(seed, kInitStream);
    Model model;
    model.layers.push_back(make_conv(1, 16, 3, 1, 1, rng));
    model.layers.push_back(make_batchnorm(16));
    model.layers.push_back(ReLU{});
    model.layers.push_back(MaxPool{2, 2});
    model.layers.push_back(make_conv(16, 32, 3, 1, 1, rng));
    model.layers.push_back(make_batchnorm(32));
    model.layers.push_back(ReLU{});
    model.layers.push_back(MaxPool{2, 2});
    model.layers.push_back(make_conv(32, 64, 3, 1, 1, rng));
    model.layers.push_back(make_batchnorm(64));
    model.layers.push_back(ReLU{});
    model.layers.push_back(MaxPool{2, 2});
    model.layers.push_back(Flatten{});
    model.layers.push_back(make_dense(576, 128, rng));
    model.layers.push_back(ReLU{});
    model.layers.push_back(Dropout{0.25});
    model.layers.push_back(make_dense(128, 32, rng));
    model.layers.push_back(ReLU{});
    model.layers.push_back(Dropout{0.25});
    model.layers.push_back(make_dense(32, 1, rng));
    return model;
}

} // namespace aod::nn
