#ifndef XATTN_BACKBONE_HPP
#define XATTN_BACKBONE_HPP

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "xattn/attention.hpp"
#include "xattn/guidance.hpp"
#include "xattn/tensor.hpp"

namespace xattn::backbone {

enum class LayerLocation { Encoder, Decoder };

/// One rewireable attention layer as advertised by a denoiser.
/// `resolution` is the routing label used to pick an injection window
/// (32 or 64 for real models); token/dim fields describe actual shapes.
struct LayerInfo {
    std::string id;
    int resolution = 0;
    LayerLocation location = LayerLocation::Decoder;
    int num_tokens = 0;
    int key_dim = 0;    // model dim of K (pre head split)
    int value_dim = 0;  // model dim of V
    int head_count = 1;
};

/// Per-layer rewiring instruction. For cross-image modes the external
/// keys/values must match the layer's key/value dims; contrast_factor is the
/// variance amplification applied to the softmaxed map before the value
/// product.
struct LayerDirective {
    attention::AttentionMode mode = attention::AttentionMode::SelfAttention;
    Matrix external_keys;
    Matrix external_values;
    float contrast_factor = 1.0f;
};

/// Q/K/V projections and pre-contrast per-head maps recorded at one layer.
struct LayerCapture {
    Matrix queries;  // [num_tokens x key_dim]
    Matrix keys;
    Matrix values;
    std::vector<attention::AttentionMap> head_maps;  // one per head
};

using CaptureSet = std::map<std::string, LayerCapture>;

/// Rewiring and capture directives for one forward pass. Directives may only
/// reference layer ids present in the denoiser's catalog.
struct AttentionPlan {
    std::map<std::string, LayerDirective> directives;
    std::set<std::string> capture_layers;

    bool empty() const { return directives.empty() && capture_layers.empty(); }
    bool has_substitutions() const { return !directives.empty(); }
};

/// Opaque conditioning passed through to the denoiser.
struct Conditioning {
    std::string prompt;
};

struct PredictResult {
    guidance::NoisePrediction prediction;
    CaptureSet captures;
};

/// Denoiser contract. Implementations must be deterministic given
/// (inputs, construction seed) and expose a stable layer catalog; captures
/// are returned, never stored, so one instance is safely shared across
/// threads.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual const std::vector<LayerInfo>& layer_catalog() const = 0;

    /// Forward pass with per-layer rewiring. Directed layers use the plan's
    /// external K/V and contrast factor; capture-flagged layers report their
    /// projections and pre-contrast maps. An empty plan is a plain pass.
    virtual PredictResult predict_with_plan(const LatentGrid& latent, int t,
                                            const Conditioning& conditioning,
                                            const AttentionPlan& plan) const = 0;

    /// Plain forward pass.
    guidance::NoisePrediction predict(const LatentGrid& latent, int t,
                                      const Conditioning& conditioning) const;

    const LayerInfo& find_layer(const std::string& id) const;
};

/// Validates plan references and feature shapes against the catalog.
void validate_plan(const Denoiser& denoiser, const AttentionPlan& plan);

/// Projections from a plain forward pass; the prediction is discarded.
CaptureSet capture_features(const Denoiser& denoiser, const LatentGrid& latent,
                            int t, const Conditioning& conditioning,
                            const std::vector<std::string>& layer_ids);

/// Pixel-space image bridge. Real adapters wrap a latent autoencoder; the
/// toy codec maps 8-bit RGB onto latent channels directly.
struct ImageRgb {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // interleaved RGB, row-major

    ImageRgb() = default;
    ImageRgb(int w, int h) : width(w), height(h),
        pixels(static_cast<size_t>(w) * h * 3, 0) {}
};

class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual LatentGrid encode(const ImageRgb& image) const = 0;
    virtual ImageRgb decode(const LatentGrid& latent) const = 0;
    virtual int latent_channels() const = 0;
};

/// Pass-through options for pretrained-model adapters. The toy backbone
/// ignores everything here.
struct AdapterOptions {
    std::string model_path;
    bool free_u = false;
    float text_guidance_scale = 0.0f;
};

struct Backbone {
    std::shared_ptr<const Denoiser> denoiser;
    std::shared_ptr<const LatentCodec> codec;
};

/// Factory hook for real-model adapters. A build that links an adapter
/// registers it here; otherwise requesting kind "adapter" fails with a
/// BackboneError.
using AdapterFactory = Backbone (*)(const AdapterOptions&);
void register_adapter_factory(AdapterFactory factory);

/// kind is "toy" or "adapter".
Backbone make_backbone(const std::string& kind, const AdapterOptions& options = {});

} // namespace xattn::backbone

#endif // XATTN_BACKBONE_HPP
