#include "xattn/backbone.hpp"

#include "xattn/toy_denoiser.hpp"

namespace xattn::backbone {

guidance::NoisePrediction Denoiser::predict(const LatentGrid& latent, int t,
                                            const Conditioning& conditioning) const {
    return predict_with_plan(latent, t, conditioning, AttentionPlan{}).prediction;
}

const LayerInfo& Denoiser::find_layer(const std::string& id) const {
    for (const LayerInfo& info : layer_catalog())
        if (info.id == id)
            return info;
    throw PlanError("unknown layer id '" + id + "'");
}

void validate_plan(const Denoiser& denoiser, const AttentionPlan& plan) {
    for (const auto& [id, directive] : plan.directives) {
        const LayerInfo& info = denoiser.find_layer(id);
        if (directive.mode == attention::AttentionMode::SelfAttention)
            continue;
        if (directive.external_keys.rows != info.num_tokens ||
            directive.external_keys.cols != info.key_dim)
            throw InvalidShapeError("plan: external keys for layer '" + id + "' are [" +
                                    std::to_string(directive.external_keys.rows) + "x" +
                                    std::to_string(directive.external_keys.cols) +
                                    "], layer expects [" + std::to_string(info.num_tokens) +
                                    "x" + std::to_string(info.key_dim) + "]");
        if (directive.external_values.rows != info.num_tokens ||
            directive.external_values.cols != info.value_dim)
            throw InvalidShapeError("plan: external values for layer '" + id +
                                    "' have the wrong shape");
        if (directive.contrast_factor < 0.0f)
            throw PlanError("plan: contrast_factor must be >= 0 for layer '" + id + "'");
    }
    for (const std::string& id : plan.capture_layers)
        denoiser.find_layer(id);
}

CaptureSet capture_features(const Denoiser& denoiser, const LatentGrid& latent,
                            int t, const Conditioning& conditioning,
                            const std::vector<std::string>& layer_ids) {
    AttentionPlan plan;
    for (const std::string& id : layer_ids)
        plan.capture_layers.insert(id);
    return denoiser.predict_with_plan(latent, t, conditioning, plan).captures;
}

namespace {
AdapterFactory g_adapter_factory = nullptr;
}

void register_adapter_factory(AdapterFactory factory) {
    g_adapter_factory = factory;
}

Backbone make_backbone(const std::string& kind, const AdapterOptions& options) {
    if (kind == "toy") {
        Backbone b;
        b.denoiser = std::make_shared<ToyDenoiser>();
        b.codec = std::make_shared<ToyCodec>();
        return b;
    }
    if (kind == "adapter") {
        if (!g_adapter_factory)
            throw BackboneError("no pretrained-model adapter is registered in this "
                                "build; use --backbone toy or link an adapter");
        return g_adapter_factory(options);
    }
    throw ConfigError("unknown backbone kind '" + kind + "' (expected toy or adapter)");
}

} // namespace xattn::backbone
