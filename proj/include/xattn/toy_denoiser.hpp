#ifndef XATTN_TOY_DENOISER_HPP
#define XATTN_TOY_DENOISER_HPP

#include "xattn/backbone.hpp"

namespace xattn::backbone {

/// Deterministic two-layer test denoiser: a multi-head attention block over
/// an 8x8 spatial grid followed by a linear output head, all weights drawn
/// from a counter-based generator at a fixed seed. The attention block runs
/// through the shared attention kernels, so plan substitution, contrast, and
/// capture behave exactly as they do in a real backbone.
///
/// The key projection is tied to the query projection, which makes the
/// query-key similarity symmetric and self-attention maps peak near the
/// diagonal; correspondence extraction on toy captures is therefore
/// meaningful. The attention branch feeds the output head through a small
/// gain so that rewiring perturbations stay well inside the tolerances the
/// transfer oracles assert.
class ToyDenoiser final : public Denoiser {
public:
    struct Params {
        uint64_t weight_seed = 0;
        int grid = 8;          // spatial side; tokens = grid*grid
        int channels = 4;      // latent channels
        int model_dim = 8;     // attention width
        int head_count = 4;
        float attn_gain = 3e-4f;  // attention branch contribution to the head
        bool ablate_attention = false;  // identity attention, for plan-locality tests
    };

    ToyDenoiser() : ToyDenoiser(Params{}) {}
    explicit ToyDenoiser(const Params& params);

    const std::vector<LayerInfo>& layer_catalog() const override { return catalog_; }

    PredictResult predict_with_plan(const LatentGrid& latent, int t,
                                    const Conditioning& conditioning,
                                    const AttentionPlan& plan) const override;

    const Params& params() const { return params_; }

private:
    Params params_;
    std::vector<LayerInfo> catalog_;
    Matrix w_embed_;  // [channels x model_dim]
    Matrix w_query_;  // [model_dim x model_dim], also used for keys
    Matrix w_value_;  // [model_dim x model_dim]
    Matrix w_output_; // [model_dim x model_dim] attention out projection
    Matrix w_head_;   // [model_dim x channels]
};

/// Identity codec for toy runs: RGB bytes map linearly onto the first three
/// latent channels in [-1, 1]; the fourth channel is zero on encode and
/// ignored on decode.
class ToyCodec final : public LatentCodec {
public:
    LatentGrid encode(const ImageRgb& image) const override;
    ImageRgb decode(const LatentGrid& latent) const override;
    int latent_channels() const override { return 4; }
};

} // namespace xattn::backbone

#endif // XATTN_TOY_DENOISER_HPP
