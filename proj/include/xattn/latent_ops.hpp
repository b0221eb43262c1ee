#ifndef XATTN_LATENT_OPS_HPP
#define XATTN_LATENT_OPS_HPP

#include <optional>
#include <vector>

#include "xattn/tensor.hpp"

namespace xattn::latent {

struct ChannelStats {
    std::vector<float> means;  // one per channel
    std::vector<float> stds;   // population standard deviation
};

/// Per-channel mean and population std over the selected pixels (all pixels
/// when no mask). A mask selecting fewer than two pixels is degenerate.
ChannelStats channel_statistics(const LatentGrid& latent,
                                const MaskGrid* mask = nullptr);

/// AdaIN: per channel c,
///   out = (target_c - mu_t,c) / (sigma_t,c + epsilon) * sigma_r,c + mu_r,c
/// Statistics are taken under each latent's own mask when given, and only
/// pixels inside the target mask are rewritten; the rest pass through
/// verbatim.
LatentGrid adain(const LatentGrid& target, const LatentGrid& reference,
                 const MaskGrid* target_mask = nullptr,
                 const MaskGrid* reference_mask = nullptr,
                 float epsilon = 1e-5f);

} // namespace xattn::latent

#endif // XATTN_LATENT_OPS_HPP
