#ifndef XATTN_PIPELINE_HPP
#define XATTN_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "xattn/backbone.hpp"
#include "xattn/latent_ops.hpp"
#include "xattn/schedule.hpp"
#include "xattn/tensor.hpp"

namespace xattn::pipeline {

/// Half-open step-index window [lo, hi). Indices count denoising iterations
/// from the start of the loop: iteration 0 is the first step at t = T.
struct StepWindow {
    int lo = 0;
    int hi = 0;
    bool contains(int step_index) const { return step_index >= lo && step_index < hi; }
    bool empty() const { return hi <= lo; }
};

/// Every transfer hyperparameter, defaulted to the reference values:
/// 100 steps, key/value injection between steps 10-70 at resolution 32 and
/// 10-90 at resolution 64, contrast 1.67, guidance 3.5, AdaIN between steps
/// 20-100, structure injection every 5 steps.
struct TransferConfig {
    int num_steps = 100;
    StepWindow injection_window_32{10, 70};
    StepWindow injection_window_64{10, 90};
    float contrast_beta = 1.67f;
    float guidance_alpha = 3.5f;
    StepWindow adain_window{20, 100};
    int structure_injection_period = 5;
    std::string domain_prompt = "A photo of a object";
    uint64_t seed = 0;
    bool use_masks = false;
    float eta = 1.0f;

    void validate() const;

    /// Injection window for a catalog resolution label, if one is configured.
    std::optional<StepWindow> window_for_resolution(int resolution) const;
};

enum class MaskStrategy { None, UserFile, AttentionDerived };

/// Source of the foreground masks that restrict AdaIN statistics.
/// UserFile masks are the reference path; AttentionDerived thresholds the
/// accumulated cross-image attention mass at its Otsu split as a stand-in
/// for an external segmenter.
struct MaskProvider {
    MaskStrategy strategy = MaskStrategy::None;
    std::optional<MaskGrid> output_mask;      // over the output/structure grid
    std::optional<MaskGrid> appearance_mask;  // over the appearance grid
};

/// The three synchronized latents of the dual-path loop plus the K/V
/// captures exchanged at the current step.
struct BranchState {
    LatentGrid z_out;
    LatentGrid z_app;
    LatentGrid z_struct;
    int step_index = 0;
    backbone::CaptureSet appearance_captures;
    backbone::CaptureSet structure_captures;
};

/// Deterministic map from a step index to per-layer directives. Outside all
/// windows the plan is empty and the pass is plain self-attention. Inside a
/// layer's window the directive is CrossImageAppearance, except every
/// structure_injection_period-th step which is CrossImageStructure. External
/// features are left empty; the transfer loop fills them from captures.
backbone::AttentionPlan step_plan(int step_index, const TransferConfig& config,
                                  const std::vector<backbone::LayerInfo>& catalog);

struct TransferOptions {
    /// Collect per-head cross-image maps (output queries vs appearance keys)
    /// at the midpoint step for correspondence extraction.
    bool capture_correspondence = false;
    /// When set, inversion records are stored here keyed by input content,
    /// schedule, prompt, and seed, and reused on later runs.
    std::string inversion_cache_dir;
};

struct TransferResult {
    LatentGrid output_latent;
    /// Final appearance-branch latent; must match the standalone
    /// reconstruction of the appearance input bitwise.
    LatentGrid appearance_latent;
    /// Reconstruction error of the appearance branch against its input.
    float appearance_drift_max = 0.0f;
    double appearance_drift_mean = 0.0;
    /// One summary line per step: index, t, directives.
    std::vector<std::string> step_log;
    /// Midpoint cross-image maps when requested (one per layer and head).
    std::vector<attention::AttentionMap> correspondence_maps;
    int correspondence_step = -1;
};

/// Full dual-path appearance transfer over already-encoded latents:
/// invert both inputs, initialize the output branch from the structure
/// terminal latent, then denoise with rewired attention, contrast, guidance,
/// and masked AdaIN per the configured windows.
TransferResult transfer_latents(const LatentGrid& z0_struct, const LatentGrid& z0_app,
                                const TransferConfig& config,
                                const backbone::Denoiser& denoiser,
                                const MaskProvider& masks = {},
                                const TransferOptions& options = {});

/// Invert then replay without any plan.
LatentGrid reconstruct_latent(const LatentGrid& z0, const TransferConfig& config,
                              const backbone::Denoiser& denoiser,
                              const std::string& inversion_cache_dir = {});

struct ImageTransferResult {
    backbone::ImageRgb image;
    TransferResult detail;
};

/// Image-level wrappers around the backbone codec.
ImageTransferResult transfer(const backbone::ImageRgb& image_struct,
                             const backbone::ImageRgb& image_app,
                             const TransferConfig& config,
                             const backbone::Backbone& backbone,
                             const MaskProvider& masks = {},
                             const TransferOptions& options = {});

backbone::ImageRgb reconstruct(const backbone::ImageRgb& image,
                               const TransferConfig& config,
                               const backbone::Backbone& backbone);

} // namespace xattn::pipeline

#endif // XATTN_PIPELINE_HPP
