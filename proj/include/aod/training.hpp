#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "aod/collocation.hpp"
#include "aod/errors.hpp"
#include "aod/metrics.hpp"
#include "aod/nn.hpp"
#include "aod/rng.hpp"

namespace aod {

enum class Regime { All, Extreme };

inline const char* regime_name(Regime r) { return r == Regime::All ? "all" : "extreme"; }

struct TrainConfig {
    double lr = 0.003;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    Regime regime = Regime::All;
    double dropout_p = 0.25;
    double extreme_threshold = 0.7;
};

struct EpochStats {
    std::size_t epoch = 0; // 1-based
    double train_loss = 0.0;
    double heldout_rmse = 0.0;
};

struct TrainHistory {
    Regime regime = Regime::All;
    std::size_t n_input = 0;   // samples offered
    std::size_t n_regime = 0;  // samples surviving the regime filter
    std::size_t n_train = 0;
    std::size_t n_heldout = 0;
    std::vector<EpochStats> epochs;
};

struct TrainResult {
    nn::Model model;
    TrainHistory history;
};

struct EvaluateResult {
    std::vector<double> predictions;
    ErrorStats stats;
    std::size_t negative_predictions = 0; // reported as-is, not clipped
};

// Min/max over every patch cell of the given (training) samples. Never feed
// this the test partition; the split happens before the scaler is fitted.
inline nn::ScalingParams fit_scaler(const std::vector<Sample>& samples) {
    if (samples.empty()) throw DataError("fit_scaler: empty training partition");
    double lo = samples.front().patch.values.front();
    double hi = lo;
    for (const Sample& s : samples) {
        for (double v : s.patch.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) throw DataError("fit_scaler: degenerate input, max equals min");
    return {lo, hi};
}

// (x - min) / (max - min); out-of-range inputs are not clipped.
inline std::vector<double> apply_scaler(const std::vector<double>& values,
                                        const nn::ScalingParams& params) {
    std::vector<double> out(values.size());
    const double span = params.max - params.min;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - params.min) / span;
    return out;
}

namespace detail {

inline void shuffle_indices(std::vector<std::size_t>& idx, Xoshiro256& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_below(i)]);
}

constexpr std::uint64_t kSplitStream = 0x53504c49;   // "SPLI"
constexpr std::uint64_t kShuffleStream = 0x53485546; // "SHUF"
constexpr std::uint64_t kDropStream = 0x44524f50;    // "DROP"

} // namespace detail

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Seeded uniform shuffle; first floor(0.7 n) indices train, the rest test.
inline SplitIndices split_70_30(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw DataError("split_70_30: need at least 2 samples");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Xoshiro256 rng(seed, detail::kSplitStream);
    detail::shuffle_indices(idx, rng);
    const std::size_t n_train = static_cast<std::size_t>(0.7 * static_cast<double>(n));
    SplitIndices split;
    split.train.assign(idx.begin(), idx.begin() + n_train);
    split.test.assign(idx.begin() + n_train, idx.end());
    return split;
}

namespace detail {

// Packs samples[indices] into X [N,1,s,s] (scaled) and y [N,1].
inline void pack_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                       std::size_t lo, std::size_t hi, const nn::ScalingParams& scaler,
                       Tensor& x, Tensor& y) {
    const std::size_t n = hi - lo;
    const std::size_t side = samples[indices[lo]].patch.size;
    const std::size_t cells = side * side;
    x = Tensor({n, 1, side, side});
    y = Tensor({n, 1});
    const double span = scaler.max - scaler.min;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = samples[indices[lo + i]];
        double* dst = x.data.data() + i * cells;
        for (std::size_t j = 0; j < cells; ++j) dst[j] = (s.patch.values[j] - scaler.min) / span;
        y[i] = s.target;
    }
    (void)cells;
}

} // namespace detail

// Infer-mode predictions and error stats. Chunked to bound activation memory.
inline EvaluateResult evaluate(const nn::Model& model, const std::vector<Sample>& samples) {
    if (!model.scaler) throw DataError("evaluate: model has no fitted scaler");
    EvaluateResult result;
    result.predictions.reserve(samples.size());
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    constexpr std::size_t kChunk = 128;
    for (std::size_t lo = 0; lo < samples.size(); lo += kChunk) {
        const std::size_t hi = std::min(samples.size(), lo + kChunk);
        Tensor x, y;
        detail::pack_batch(samples, all, lo, hi, *model.scaler, x, y);
        Tensor pred = nn::infer(model, x);
        for (std::size_t i = 0; i < pred.numel(); ++i) {
            result.predictions.push_back(pred[i]);
            if (pred[i] < 0.0) ++result.negative_predictions;
        }
    }
    if (!samples.empty()) {
        std::vector<double> truth(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) truth[i] = samples[i].target;
        result.stats = compute_stats(result.predictions, truth);
    }
    return result;
}

// Mini-batch MSE/Adam training of the default architecture. The regime
// filter runs first; the 70/30 split and the scaler fit both happen on the
// filtered set (scaler on the train side only). Targets stay in AOD units.
inline TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config) {
    if (config.epochs < 1 || config.batch_size < 1 || config.lr <= 0.0)
        throw DataError("train: invalid config");

    std::vector<Sample> pool;
    for (const Sample& s : samples)
        if (config.regime == Regime::All || classify_extreme(s.target, config.extreme_threshold))
            pool.push_back(s);

    if (pool.size() < 2 * config.batch_size)
        throw DataError("train: too few samples for regime '" + std::string(regime_name(config.regime)) +
                        "': have " + std::to_string(pool.size()) + ", need at least " +
                        std::to_string(2 * config.batch_size));

    SplitIndices split = split_70_30(pool.size(), config.seed);

    std::vector<Sample> train_part, test_part;
    train_part.reserve(split.train.size());
    test_part.reserve(split.test.size());
    for (std::size_t i : split.train) train_part.push_back(pool[i]);
    for (std::size_t i : split.test) test_part.push_back(pool[i]);

    nn::Model model = nn::default_architecture(config.seed);
    for (auto& layer : model.layers)
        if (auto* drop = std::get_if<nn::Dropout>(&layer)) drop->p = config.dropout_p;
    model.scaler = fit_scaler(train_part);

    nn::AdamState adam = nn::AdamState::init(model, config.lr);
    Xoshiro256 shuffle_rng(config.seed, detail::kShuffleStream);
    Xoshiro256 dropout_rng(config.seed, detail::kDropStream);

    TrainHistory history;
    history.regime = config.regime;
    history.n_input = samples.size();
    history.n_regime = pool.size();
    history.n_train = train_part.size();
    history.n_heldout = test_part.size();

    std::vector<std::size_t> order(train_part.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto params = nn::parameters(model);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        detail::shuffle_indices(order, shuffle_rng);
        double loss_sum = 0.0;
        std::size_t seen = 0, batch_no = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size, ++batch_no) {
            const std::size_t hi = std::min(order.size(), lo + config.batch_size);
            Tensor x, y;
            detail::pack_batch(train_part, order, lo, hi, *model.scaler, x, y);

            std::vector<nn::LayerCache> caches;
            Tensor pred = nn::forward_train(model, x, dropout_rng, caches);
            nn::MseResult mse = nn::mse_loss(pred, y);
            if (!std::isfinite(mse.loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_no));
            nn::Gradients grads;
            nn::backward(model, caches, mse.grad, grads);
            nn::adam_step(params, nn::gradient_list(model, grads), adam);

            loss_sum += mse.loss * static_cast<double>(hi - lo);
            seen += hi - lo;
        }
        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(seen);
        es.heldout_rmse = test_part.empty() ? 0.0 : evaluate(model, test_part).stats.rmse;
        history.epochs.push_back(es);
    }

    return {std::move(model), std::move(history)};
}

struct TwoRegimeResult {
    TrainResult all;
    TrainResult extreme;
};

// The two networks are trained independently and never combined at
// inference time.
inline TwoRegimeResult train_two_regimes(const std::vector<Sample>& samples,
                                         const TrainConfig& base) {
    TrainConfig all_cfg = base;
    all_cfg.regime = Regime::All;
    TrainConfig ext_cfg = base;
    ext_cfg.regime = Regime::Extreme;
    return {train(samples, all_cfg), train(samples, ext_cfg)};
}

} // namespace aod
