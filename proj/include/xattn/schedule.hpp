#ifndef XATTN_SCHEDULE_HPP
#define XATTN_SCHEDULE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xattn/tensor.hpp"

namespace xattn::diffusion {

enum class BetaSpacing { Linear };

/// Noise schedule over T sampling steps. Timesteps are 1-based: t in [1, T],
/// alpha_bar(t) = prod_{s<=t}(1 - beta_s), strictly decreasing.
///
/// final_alpha_bar is the boundary value used in place of alpha_bar(0) by the
/// sampling step; it sits half a beta above alpha_bar(1) so the stochastic
/// variance stays strictly positive at every step, which the noise-map
/// inversion requires.
struct DiffusionSchedule {
    int num_steps = 0;
    std::vector<float> betas;       // betas[t-1], each in (0,1)
    std::vector<float> alpha_bars;  // alpha_bars[t-1], strictly decreasing
    float final_alpha_bar = 1.0f;

    float alpha_bar(int t) const {
        return t == 0 ? final_alpha_bar : alpha_bars[t - 1];
    }
    float beta(int t) const { return betas[t - 1]; }
    void validate() const;
};

/// Linear beta schedule from beta_start to beta_end over num_steps.
DiffusionSchedule make_schedule(int num_steps, float beta_start, float beta_end,
                                BetaSpacing spacing = BetaSpacing::Linear);

/// Builds a schedule directly from per-step betas.
DiffusionSchedule schedule_from_betas(std::vector<float> betas);

/// Inference schedule subsampled from a 1000-step linear training schedule
/// (beta 1e-4 .. 2e-2) by striding its cumulative alpha products.
DiffusionSchedule default_inference_schedule(int num_steps = 100);

/// x0 estimate: (x_t - sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_bar_t)
LatentGrid predict_x0(const LatentGrid& x_t, const LatentGrid& epsilon,
                      float alpha_bar_t);

/// Raw DDIM-style update with explicit coefficients:
///   x_prev = sqrt(ab_prev) * x0 + sqrt(1 - ab_prev - sigma^2) * eps + sigma * noise
/// noise may be null when sigma == 0.
LatentGrid ddim_update(const LatentGrid& x_t, const LatentGrid& epsilon,
                       float alpha_bar_t, float alpha_bar_prev, float sigma,
                       const LatentGrid* noise);

/// Stochastic step variance sqrt for timestep t at the given eta.
float step_sigma(const DiffusionSchedule& schedule, int t, float eta);

/// One sampling step t -> t-1. eta = 0 is deterministic DDIM; eta = 1 with a
/// recorded noise map replays the edit-friendly inversion path exactly.
LatentGrid sampling_step(const LatentGrid& x_t, const LatentGrid& epsilon, int t,
                         const DiffusionSchedule& schedule,
                         const LatentGrid* injected_noise, float eta);

/// Denoiser as seen by the schedule: predicted noise for (latent, t).
using DenoiseFn = std::function<LatentGrid(const LatentGrid&, int)>;

/// Terminal latent plus the per-step noise maps whose replay through
/// sampling_step reconstructs the source latent exactly.
struct InversionRecord {
    LatentGrid terminal_latent;           // x_T
    std::vector<LatentGrid> noise_maps;   // noise_maps[t-1] injected at step t
    std::string prompt;
    uint64_t seed = 0;

    const LatentGrid& noise_at(int t) const { return noise_maps[t - 1]; }
    int num_steps() const { return static_cast<int>(noise_maps.size()); }
};

/// Edit-friendly inversion: draws independent auxiliary latents
///   x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eta_t
/// then solves each sampling step for the injected noise that lands exactly
/// on the next auxiliary latent under the denoiser's own prediction.
InversionRecord invert(const LatentGrid& x0, const DiffusionSchedule& schedule,
                       const DenoiseFn& denoiser, const std::string& prompt,
                       uint64_t seed);

/// Replays an inversion record with plain (unmodified) predictions.
LatentGrid replay(const InversionRecord& record, const DiffusionSchedule& schedule,
                  const DenoiseFn& denoiser);

} // namespace xattn::diffusion

#endif // XATTN_SCHEDULE_HPP
