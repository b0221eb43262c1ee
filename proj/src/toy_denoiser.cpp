#include "xattn/toy_denoiser.hpp"

#include <cmath>

#include "xattn/rng.hpp"

namespace xattn::backbone {

namespace {

// Weight streams within the toy's seed space.
enum : uint64_t {
    kStreamEmbed = 1,
    kStreamQuery = 2,
    kStreamValue = 3,
    kStreamOutput = 4,
    kStreamHead = 5,
};

Matrix random_weights(const CounterRng& rng, uint64_t stream, int rows, int cols,
                      float scale) {
    Matrix w(rows, cols);
    for (size_t i = 0; i < w.data.size(); ++i)
        w.data[i] = scale * rng.normal(stream, i);
    return w;
}

float timestep_bias(int t) {
    return 0.1f * std::sin(0.05f * static_cast<float>(t) + 0.25f);
}

float conditioning_bias(const std::string& prompt) {
    const uint64_t h = fnv1a64(prompt.data(), prompt.size());
    return (static_cast<float>(h % 4096) / 4096.0f - 0.5f) * 0.05f;
}

} // namespace

ToyDenoiser::ToyDenoiser(const Params& params) : params_(params) {
    if (params_.model_dim % params_.head_count != 0)
        throw ConfigError("ToyDenoiser: model_dim must be divisible by head_count");

    const CounterRng rng(params_.weight_seed);
    const int c = params_.channels;
    const int d = params_.model_dim;
    w_embed_ = random_weights(rng, kStreamEmbed, c, d, 0.5f / std::sqrt((float)c));
    w_query_ = random_weights(rng, kStreamQuery, d, d, 2.0f / std::sqrt((float)d));
    w_value_ = random_weights(rng, kStreamValue, d, d, 0.4f / std::sqrt((float)d));
    w_output_ = random_weights(rng, kStreamOutput, d, d, 0.5f / std::sqrt((float)d));
    w_head_ = random_weights(rng, kStreamHead, d, c, 1.0f / std::sqrt((float)d));

    LayerInfo info;
    info.id = "dec0";
    info.resolution = 64;  // routing label; actual grid is params_.grid
    info.location = LayerLocation::Decoder;
    info.num_tokens = params_.grid * params_.grid;
    info.key_dim = d;
    info.value_dim = d;
    info.head_count = params_.head_count;
    catalog_.push_back(info);
}

PredictResult ToyDenoiser::predict_with_plan(const LatentGrid& latent, int t,
                                             const Conditioning& conditioning,
                                             const AttentionPlan& plan) const {
    if (latent.channels != params_.channels || latent.height != params_.grid ||
        latent.width != params_.grid)
        throw InvalidShapeError("ToyDenoiser: latent must be [" +
                                std::to_string(params_.channels) + "x" +
                                std::to_string(params_.grid) + "x" +
                                std::to_string(params_.grid) + "]");
    validate_plan(*this, plan);

    const LayerInfo& layer = catalog_.front();
    const int n = layer.num_tokens;
    const int d = params_.model_dim;
    const int heads = params_.head_count;
    const int d_head = d / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(d_head));

    // Token features with scalar timestep and conditioning biases.
    Matrix x = matmul(tokens_from_grid(latent), w_embed_);
    const float bias = timestep_bias(t) + conditioning_bias(conditioning.prompt);
    for (float& v : x.data)
        v += bias;

    // Tied projections: keys reuse the query weights.
    Matrix q = matmul(x, w_query_);
    Matrix k = q;
    Matrix v = matmul(x, w_value_);

    const LayerDirective* directive = nullptr;
    if (auto it = plan.directives.find(layer.id); it != plan.directives.end() &&
        it->second.mode != attention::AttentionMode::SelfAttention)
        directive = &it->second;
    const bool capture = plan.capture_layers.count(layer.id) > 0;

    PredictResult result;
    LayerCapture* cap = nullptr;
    if (capture) {
        cap = &result.captures[layer.id];
        cap->queries = q;
        cap->keys = k;    // own projections, pre-substitution
        cap->values = v;
    }

    Matrix x2 = x;
    if (!params_.ablate_attention) {
        const Matrix& k_used = directive ? directive->external_keys : k;
        const Matrix& v_used = directive ? directive->external_values : v;
        const float beta = directive ? directive->contrast_factor : 1.0f;

        // Per-head slices share the full matrices; contrast is applied per
        // head, per query row.
        Matrix attn_out(n, d);
        Matrix qh(n, d_head), kh(n, d_head), vh(n, d_head);
        for (int h = 0; h < heads; ++h) {
            const int off = h * d_head;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d_head; ++j) {
                    qh.at(i, j) = q.at(i, off + j);
                    kh.at(i, j) = k_used.at(i, off + j);
                    vh.at(i, j) = v_used.at(i, off + j);
                }
            attention::AttentionMap map = attention::compute_attention_map(qh, kh, scale);
            if (cap)
                cap->head_maps.push_back(map);
            map = attention::contrast_map(map, beta);
            const Matrix oh = attention::apply_attention(map, vh);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d_head; ++j)
                    attn_out.at(i, off + j) = oh.at(i, j);
        }
        const Matrix projected = matmul(attn_out, w_output_);
        for (size_t i = 0; i < x2.data.size(); ++i)
            x2.data[i] += params_.attn_gain * projected.data[i];
    }

    const Matrix eps_tokens = matmul(x2, w_head_);
    result.prediction.epsilon =
        grid_from_tokens(eps_tokens, params_.channels, params_.grid, params_.grid);
    result.prediction.epsilon.timestep_index = t;
    result.prediction.source_mode =
        directive ? directive->mode : attention::AttentionMode::SelfAttention;
    return result;
}

LatentGrid ToyCodec::encode(const ImageRgb& image) const {
    LatentGrid latent(4, image.height, image.width);
    const size_t pixels = static_cast<size_t>(image.width) * image.height;
    for (int c = 0; c < 3; ++c) {
        float* ch = latent.channel(c);
        for (size_t p = 0; p < pixels; ++p)
            ch[p] = static_cast<float>(image.pixels[p * 3 + c]) / 127.5f - 1.0f;
    }
    return latent;
}

ImageRgb ToyCodec::decode(const LatentGrid& latent) const {
    if (latent.channels < 3)
        throw InvalidShapeError("ToyCodec: latent must have at least 3 channels");
    ImageRgb image(latent.width, latent.height);
    const size_t pixels = static_cast<size_t>(latent.width) * latent.height;
    for (int c = 0; c < 3; ++c) {
        const float* ch = latent.channel(c);
        for (size_t p = 0; p < pixels; ++p) {
            const float v = (ch[p] + 1.0f) * 127.5f;
            const float clamped = v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v);
            image.pixels[p * 3 + c] = static_cast<uint8_t>(std::lround(clamped));
        }
    }
    return image;
}

} // namespace xattn::backbone
