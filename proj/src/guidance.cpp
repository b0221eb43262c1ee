#include "xattn/guidance.hpp"

namespace xattn::guidance {

NoisePrediction combine(const NoisePrediction& eps_self,
                        const NoisePrediction& eps_cross, float alpha) {
    eps_self.epsilon.require_same_shape(eps_cross.epsilon, "guidance combine");
    if (eps_self.source_mode != attention::AttentionMode::SelfAttention)
        throw ConfigError("guidance combine: first prediction must come from the "
                          "self-attention pass");
    if (eps_cross.source_mode == attention::AttentionMode::SelfAttention)
        throw ConfigError("guidance combine: second prediction must come from a "
                          "cross-image pass");

    if (alpha == 0.0f)
        return eps_self;
    if (alpha == 1.0f)
        return eps_cross;

    NoisePrediction out = eps_cross;
    for (size_t i = 0; i < out.epsilon.data.size(); ++i) {
        const float s = eps_self.epsilon.data[i];
        out.epsilon.data[i] = s + alpha * (eps_cross.epsilon.data[i] - s);
    }
    return out;
}

} // namespace xattn::guidance
