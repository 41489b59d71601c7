#include "dsebm/persistence.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "dsebm/errors.hpp"

namespace dsebm {

namespace {

constexpr const char kBanner[] = "DSEBM 1\n";
constexpr std::size_t kBannerLen = sizeof(kBanner) - 1;

using nlohmann::json;

json shape_json(const std::vector<std::size_t>& shape) {
    json arr = json::array();
    for (std::size_t s : shape) arr.push_back(s);
    return arr;
}

std::vector<std::size_t> shape_from_json(const json& arr, const char* what) {
    if (!arr.is_array() || arr.empty()) {
        throw DataError(std::string("model header: bad shape for ") + what);
    }
    std::vector<std::size_t> shape;
    for (const auto& v : arr) {
        if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
            throw DataError(std::string("model header: bad extent in ") + what);
        }
        shape.push_back(v.get<std::size_t>());
    }
    return shape;
}

json layout_json(const EnergyModel& model) {
    json layout;
    if (const auto* dense = std::get_if<DenseEnergyParams>(&model)) {
        layout["type"] = "dense";
        layout["input_dim"] = dense->input_dim();
        json hidden = json::array();
        for (std::size_t w : dense->hidden_dims()) hidden.push_back(w);
        layout["hidden"] = std::move(hidden);
    } else if (const auto* rec = std::get_if<RecurrentEnergyParams>(&model)) {
        layout["type"] = "recurrent";
        layout["step_dim"] = rec->step_dim();
        layout["ebm_dim"] = rec->ebm_dim();
        layout["rnn_dim"] = rec->rnn_dim();
    } else {
        const auto& conv = std::get<ConvEnergyParams>(model);
        layout["type"] = "conv";
        layout["input"] = shape_json(conv.input_shape());
        json stack = json::array();
        for (const auto& layer : conv.layers) {
            json entry;
            if (const auto* c = std::get_if<ConvFilterLayer>(&layer)) {
                entry["kind"] = "conv";
                entry["filters"] = shape_json(c->filters.shape);
            } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
                entry["kind"] = "pool";
                entry["window"] = p->window;
            } else {
                const auto& d = std::get<FlatDenseLayer>(layer);
                entry["kind"] = "dense";
                entry["weight"] = shape_json(d.weight.shape);
            }
            stack.push_back(std::move(entry));
        }
        layout["stack"] = std::move(stack);
    }
    return layout;
}

EnergyModel model_from_layout(const json& layout) {
    const std::string type = layout.at("type").get<std::string>();
    if (type == "dense") {
        DenseEnergyParams params;
        const std::size_t d = layout.at("input_dim").get<std::size_t>();
        params.prior_center = Tensor::zeros({d});
        std::size_t prev = d;
        for (const auto& w : layout.at("hidden")) {
            const std::size_t width = w.get<std::size_t>();
            params.layers.push_back({Tensor::zeros({prev, width}), Tensor::zeros({width})});
            prev = width;
        }
        if (params.layers.empty()) throw DataError("model header: dense layout has no layers");
        return params;
    }
    if (type == "recurrent") {
        const std::size_t d = layout.at("step_dim").get<std::size_t>();
        const std::size_t ke = layout.at("ebm_dim").get<std::size_t>();
        const std::size_t kr = layout.at("rnn_dim").get<std::size_t>();
        RecurrentEnergyParams params;
        params.step_weight = Tensor::zeros({d, ke});
        params.step_bias = Tensor::zeros({ke});
        params.prior_center = Tensor::zeros({d});
        params.hidden_hidden = Tensor::zeros({kr, kr});
        params.hidden_input = Tensor::zeros({kr, d});
        params.hidden_bias = Tensor::zeros({kr});
        params.bias_readout = Tensor::zeros({ke, kr});
        params.prior_readout = Tensor::zeros({d, kr});
        params.initial_hidden = Tensor::zeros({kr});
        return params;
    }
    if (type == "conv") {
        ConvEnergyParams params;
        params.prior_center = Tensor::zeros(shape_from_json(layout.at("input"), "conv input"));
        for (const auto& entry : layout.at("stack")) {
            const std::string kind = entry.at("kind").get<std::string>();
            if (kind == "conv") {
                auto shape = shape_from_json(entry.at("filters"), "conv filters");
                if (shape.size() != 4) throw DataError("model header: conv filters must be rank 4");
                params.layers.push_back(
                    ConvFilterLayer{Tensor::zeros(shape), Tensor::zeros({shape[0]})});
            } else if (kind == "pool") {
                params.layers.push_back(MaxPoolLayer{entry.at("window").get<std::size_t>()});
            } else if (kind == "dense") {
                auto shape = shape_from_json(entry.at("weight"), "dense weight");
                if (shape.size() != 2) throw DataError("model header: dense weight must be rank 2");
                params.layers.push_back(
                    FlatDenseLayer{Tensor::zeros(shape), Tensor::zeros({shape[1]})});
            } else {
                throw DataError("model header: unknown stack layer kind '" + kind + "'");
            }
        }
        return params;
    }
    throw DataError("model header: unknown architecture '" + type + "'");
}

void append_payload(std::vector<unsigned char>& payload, const Tensor& t) {
    for (double v : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            payload.push_back(static_cast<unsigned char>(bits >> (8 * i)));
        }
    }
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<const Tensor*> payload_tensors(const TrainedModel& model) {
    std::vector<const Tensor*> tensors;
    if (model.norm.enabled) {
        tensors.push_back(&model.norm.mean);
        tensors.push_back(&model.norm.stddev);
    }
    for (const Tensor* t : param_tensors(model.model)) tensors.push_back(t);
    return tensors;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
    std::vector<unsigned char> payload;
    for (const Tensor* t : payload_tensors(model)) append_payload(payload, *t);

    json header;
    header["architecture"] = architecture_name(model.model);
    header["layout"] = layout_json(model.model);
    header["normalization"]["enabled"] = model.norm.enabled;
    if (model.norm.enabled) {
        header["normalization"]["shape"] = shape_json(model.norm.mean.shape);
    }
    json config;
    for (const auto& [key, value] : model.config_echo) config[key] = value;
    header["config"] = std::move(config);
    header["payload_doubles"] = payload.size() / 8;
    header["checksum"] =
        hex64(checksum_bytes(payload.data(), payload.size(), 0xcbf29ce484222325ULL));

    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(kBanner, static_cast<std::streamsize>(kBannerLen));
    unsigned char len_le[8];
    const std::uint64_t header_len = header_text.size();
    for (int i = 0; i < 8; ++i) len_le[i] = static_cast<unsigned char>(header_len >> (8 * i));
    out.write(reinterpret_cast<const char*>(len_le), 8);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) throw DataError("write failure on '" + path + "'");
}

TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");

    char banner[kBannerLen];
    if (!in.read(banner, kBannerLen) || std::memcmp(banner, kBanner, 6) != 0) {
        throw DataError(path + ": not a model artifact (bad magic)");
    }
    if (std::memcmp(banner, kBanner, kBannerLen) != 0) {
        throw DataError(path + ": unsupported artifact version");
    }
    unsigned char len_le[8];
    if (!in.read(reinterpret_cast<char*>(len_le), 8)) {
        throw DataError(path + ": truncated artifact (header length)");
    }
    std::uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i) header_len |= static_cast<std::uint64_t>(len_le[i]) << (8 * i);
    if (header_len == 0 || header_len > (1u << 20)) {
        throw DataError(path + ": implausible header length");
    }
    std::string header_text(header_len, '\0');
    if (!in.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
        throw DataError(path + ": truncated artifact (header)");
    }
    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw DataError(path + ": bad artifact header: " + e.what());
    }

    TrainedModel model;
    model.model = model_from_layout(header.at("layout"));
    if (header.at("architecture").get<std::string>() != architecture_name(model.model)) {
        throw DataError(path + ": architecture tag disagrees with layout");
    }
    const auto& norm = header.at("normalization");
    model.norm.enabled = norm.at("enabled").get<bool>();
    if (model.norm.enabled) {
        auto shape = shape_from_json(norm.at("shape"), "normalization");
        model.norm.mean = Tensor::zeros(shape);
        model.norm.stddev = Tensor::zeros(shape);
    }
    for (const auto& [key, value] : header.at("config").items()) {
        model.config_echo.emplace_back(key, value.get<std::string>());
    }

    const std::uint64_t expected_doubles = header.at("payload_doubles").get<std::uint64_t>();
    std::vector<unsigned char> payload(expected_doubles * 8);
    if (!in.read(reinterpret_cast<char*>(payload.data()),
                 static_cast<std::streamsize>(payload.size()))) {
        throw DataError(path + ": truncated artifact (payload)");
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError(path + ": trailing bytes after payload");

    const std::string checksum =
        hex64(checksum_bytes(payload.data(), payload.size(), 0xcbf29ce484222325ULL));
    if (checksum != header.at("checksum").get<std::string>()) {
        throw DataError(path + ": payload checksum mismatch (corrupt artifact)");
    }

    std::vector<Tensor*> tensors;
    if (model.norm.enabled) {
        tensors.push_back(&model.norm.mean);
        tensors.push_back(&model.norm.stddev);
    }
    for (Tensor* t : param_tensors(model.model)) tensors.push_back(t);

    std::size_t total = 0;
    for (Tensor* t : tensors) total += t->numel();
    if (total != expected_doubles) {
        throw DataError(path + ": payload size disagrees with layout");
    }

    std::size_t offset = 0;
    for (Tensor* t : tensors) {
        for (double& v : t->data) {
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) {
                bits |= static_cast<std::uint64_t>(payload[offset + i]) << (8 * i);
            }
            std::memcpy(&v, &bits, sizeof v);
            offset += 8;
        }
    }
    return model;
}

}  // namespace dsebm
