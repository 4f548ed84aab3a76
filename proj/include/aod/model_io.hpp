#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "aod/errors.hpp"
#include "aod/nn.hpp"
#include "aod/util.hpp"

namespace aod::nn {

// aodcnn-v1: JSON model container. Written by hand so every number carries
// up to 17 significant digits and round-trips bit-exactly; parsed with
// nlohmann::json (strtod on the way in is exact for %.17g output).

namespace detail {

inline void emit_array(std::string& out, const Tensor& t) {
    out += '[';
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (i) out += ',';
        out += format_g17(t[i]);
    }
    out += ']';
}

} // namespace detail

inline std::string serialize_model(const Model& model) {
    if (model.layers.empty()) throw DataError("serialize_model: invalid model (empty layer list)");
    std::string out;
    out.reserve(1 << 16);
    out += "{\n\"format\":\"aodcnn-v1\",\n";
    if (model.scaler)
        out += "\"scaler\":{\"min\":" + format_g17(model.scaler->min) +
               ",\"max\":" + format_g17(model.scaler->max) + "},\n";
    else
        out += "\"scaler\":null,\n";
    out += "\"layer_count\":" + std::to_string(model.layers.size()) + ",\n";
    out += "\"layers\":[\n";
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (i) out += ",\n";
        const Layer& layer = model.layers[i];
        if (const auto* conv = std::get_if<Conv2d>(&layer)) {
            out += "{\"kind\":\"conv2d\",\"in_ch\":" + std::to_string(conv->in_ch) +
                   ",\"out_ch\":" + std::to_string(conv->out_ch) +
                   ",\"kernel\":" + std::to_string(conv->kernel) +
                   ",\"stride\":" + std::to_string(conv->stride) +
                   ",\"pad\":" + std::to_string(conv->pad) + ",\"weight\":";
            detail::emit_array(out, conv->weight);
            out += ",\"bias\":";
            detail::emit_array(out, conv->bias);
            out += '}';
        } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
            out += "{\"kind\":\"batchnorm\",\"channels\":" + std::to_string(bn->channels) +
                   ",\"momentum\":" + format_g17(bn->momentum) + ",\"eps\":" + format_g17(bn->eps) +
                   ",\"gamma\":";
            detail::emit_array(out, bn->gamma);
            out += ",\"beta\":";
            detail::emit_array(out, bn->beta);
            out += ",\"running_mean\":";
            detail::emit_array(out, bn->running_mean);
            out += ",\"running_var\":";
            detail::emit_array(out, bn->running_var);
            out += '}';
        } else if (std::holds_alternative<ReLU>(layer)) {
            out += "{\"kind\":\"relu\"}";
        } else if (const auto* pool = std::get_if<MaxPool>(&layer)) {
            out += "{\"kind\":\"maxpool\",\"kernel\":" + std::to_string(pool->kernel) +
                   ",\"stride\":" + std::to_string(pool->stride) + "}";
        } else if (std::holds_alternative<Flatten>(layer)) {
            out += "{\"kind\":\"flatten\"}";
        } else if (const auto* dense = std::get_if<Dense>(&layer)) {
            out += "{\"kind\":\"dense\",\"in\":" + std::to_string(dense->in) +
                   ",\"out\":" + std::to_string(dense->out) + ",\"weight\":";
            detail::emit_array(out, dense->weight);
            out += ",\"bias\":";
            detail::emit_array(out, dense->bias);
            out += '}';
        } else if (const auto* drop = std::get_if<Dropout>(&layer)) {
            out += "{\"kind\":\"dropout\",\"p\":" + format_g17(drop->p) + "}";
        }
    }
    out += "\n]\n}\n";
    return out;
}

namespace detail {

inline Tensor read_tensor(const nlohmann::json& j, const char* field, std::vector<std::size_t> shape) {
    if (!j.contains(field) || !j[field].is_array())
        throw DataError(std::string("aodcnn: missing array field '") + field + "'");
    std::vector<double> data;
    data.reserve(j[field].size());
    for (const auto& v : j[field]) {
        if (!v.is_number()) throw DataError(std::string("aodcnn: non-numeric entry in '") + field + "'");
        data.push_back(v.get<double>());
    }
    if (data.size() != Tensor::numel_of(shape))
        throw DataError(std::string("aodcnn: shape inconsistency in '") + field + "': expected " +
                        std::to_string(Tensor::numel_of(shape)) + " values, got " +
                        std::to_string(data.size()));
    return Tensor(std::move(shape), std::move(data));
}

template <typename T>
T read_uint(const nlohmann::json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_number_unsigned())
        throw DataError(std::string("aodcnn: missing or invalid field '") + field + "'");
    return j[field].get<T>();
}

} // namespace detail

inline Model deserialize_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("aodcnn: not valid JSON: ") + e.what());
    }
    if (!j.contains("format") || j["format"] != "aodcnn-v1")
        throw DataError("aodcnn: version mismatch, expected format \"aodcnn-v1\"");
    if (!j.contains("layers") || !j["layers"].is_array())
        throw DataError("aodcnn: missing layers array");
    if (j["layers"].empty()) throw DataError("aodcnn: invalid model (empty layer list)");
    const auto declared = detail::read_uint<std::size_t>(j, "layer_count");
    if (declared != j["layers"].size())
        throw DataError("aodcnn: layer_count " + std::to_string(declared) + " does not match " +
                        std::to_string(j["layers"].size()) + " layers");

    Model model;
    if (j.contains("scaler") && !j["scaler"].is_null()) {
        const auto& s = j["scaler"];
        if (!s.contains("min") || !s.contains("max"))
            throw DataError("aodcnn: scaler must carry min and max");
        model.scaler = ScalingParams{s["min"].get<double>(), s["max"].get<double>()};
    }

    for (const auto& lj : j["layers"]) {
        if (!lj.contains("kind")) throw DataError("aodcnn: layer without kind");
        const std::string kind = lj["kind"].get<std::string>();
        if (kind == "conv2d") {
            Conv2d conv;
            conv.in_ch = detail::read_uint<std::size_t>(lj, "in_ch");
            conv.out_ch = detail::read_uint<std::size_t>(lj, "out_ch");
            conv.kernel = detail::read_uint<std::size_t>(lj, "kernel");
            conv.stride = detail::read_uint<std::size_t>(lj, "stride");
            conv.pad = detail::read_uint<std::size_t>(lj, "pad");
            if (conv.kernel < 1 || conv.stride < 1 || conv.in_ch < 1 || conv.out_ch < 1)
                throw DataError("aodcnn: conv2d hyperparameters out of range");
            conv.weight = detail::read_tensor(lj, "weight", {conv.out_ch, conv.in_ch, conv.kernel, conv.kernel});
            conv.bias = detail::read_tensor(lj, "bias", {conv.out_ch});
            model.layers.push_back(std::move(conv));
        } else if (kind == "batchnorm") {
            BatchNorm bn;
            bn.channels = detail::read_uint<std::size_t>(lj, "channels");
            bn.momentum = lj.value("momentum", 0.9);
            bn.eps = lj.value("eps", 1e-5);
            bn.gamma = detail::read_tensor(lj, "gamma", {bn.channels});
            bn.beta = detail::read_tensor(lj, "beta", {bn.channels});
            bn.running_mean = detail::read_tensor(lj, "running_mean", {bn.channels});
            bn.running_var = detail::read_tensor(lj, "running_var", {bn.channels});
            model.layers.push_back(std::move(bn));
        } else if (kind == "relu") {
            model.layers.push_back(ReLU{});
        } else if (kind == "maxpool") {
            MaxPool pool;
            pool.kernel = detail::read_uint<std::size_t>(lj, "kernel");
            pool.stride = detail::read_uint<std::size_t>(lj, "stride");
            if (pool.kernel < 1 || pool.stride < 1) throw DataError("aodcnn: maxpool hyperparameters out of range");
            model.layers.push_back(pool);
        } else if (kind == "flatten") {
            model.layers.push_back(Flatten{});
        } else if (kind == "dense") {
            Dense dense;
            dense.in = detail::read_uint<std::size_t>(lj, "in");
            dense.out = detail::read_uint<std::size_t>(lj, "out");
            if (dense.in < 1 || dense.out < 1) throw DataError("aodcnn: dense dimensions out of range");
            dense.weight = detail::read_tensor(lj, "weight", {dense.out, dense.in});
            dense.bias = detail::read_tensor(lj, "bias", {dense.out});
            model.layers.push_back(std::move(dense));
        } else if (kind == "dropout") {
            Dropout drop;
            if (!lj.contains("p") || !lj["p"].is_number()) throw DataError("aodcnn: dropout without p");
            drop.p = lj["p"].get<double>();
            if (drop.p < 0.0 || drop.p >= 1.0) throw DataError("aodcnn: dropout p out of [0, 1)");
            model.layers.push_back(drop);
        } else {
            throw DataError("aodcnn: unknown layer kind '" + kind + "'");
        }
    }
    return model;
}

} // namespace aod::nn
