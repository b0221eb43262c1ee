#ifndef XATTN_GUIDANCE_HPP
#define XATTN_GUIDANCE_HPP

#include "xattn/attention.hpp"
#include "xattn/tensor.hpp"

namespace xattn::guidance {

/// A denoiser output, tagged with the attention mode that produced it.
struct NoisePrediction {
    LatentGrid epsilon;
    attention::AttentionMode source_mode = attention::AttentionMode::SelfAttention;
};

/// Appearance guidance: eps = eps_self + alpha * (eps_cross - eps_self).
/// alpha = 0 and alpha = 1 return the respective input exactly.
NoisePrediction combine(const NoisePrediction& eps_self,
                        const NoisePrediction& eps_cross, float alpha);

} // namespace xattn::guidance

#endif // XATTN_GUIDANCE_HPP
