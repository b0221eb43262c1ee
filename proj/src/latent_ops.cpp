#include "xattn/latent_ops.hpp"

#include <cmath>

namespace xattn::latent {

namespace {

void check_mask(const LatentGrid& latent, const MaskGrid& mask, const char* role) {
    if (mask.height != latent.height || mask.width != latent.width)
        throw InvalidShapeError(std::string("channel_statistics: ") + role +
                                " mask is " + std::to_string(mask.height) + "x" +
                                std::to_string(mask.width) + ", latent is " +
                                std::to_string(latent.height) + "x" +
                                std::to_string(latent.width));
    if (mask.count_selected() < 2)
        throw DegenerateMaskError(std::string(role) +
                                  " mask selects fewer than two pixels; "
                                  "statistics are undefined");
}

} // namespace

ChannelStats channel_statistics(const LatentGrid& latent, const MaskGrid* mask) {
    if (mask)
        check_mask(latent, *mask, "statistics");

    ChannelStats stats;
    stats.means.resize(latent.channels);
    stats.stds.resize(latent.channels);
    const int pixels = latent.pixels();

    for (int c = 0; c < latent.channels; ++c) {
        const float* ch = latent.channel(c);
        double sum = 0.0;
        int n = 0;
        for (int p = 0; p < pixels; ++p) {
            if (mask && !mask->data[p]) continue;
            sum += ch[p];
            ++n;
        }
        const double mean = sum / n;
        double sq = 0.0;
        for (int p = 0; p < pixels; ++p) {
            if (mask && !mask->data[p]) continue;
            const double d = ch[p] - mean;
            sq += d * d;
        }
        stats.means[c] = static_cast<float>(mean);
        stats.stds[c] = static_cast<float>(std::sqrt(sq / n));
    }
    return stats;
}

LatentGrid adain(const LatentGrid& target, const LatentGrid& reference,
                 const MaskGrid* target_mask, const MaskGrid* reference_mask,
                 float epsilon) {
    if (target.channels != reference.channels)
        throw InvalidShapeError("adain: channel counts disagree (" +
                                std::to_string(target.channels) + " vs " +
                                std::to_string(reference.channels) + ")");
    if (!(epsilon > 0.0f))
        throw ConfigError("adain: epsilon must be > 0");

    const ChannelStats ts = channel_statistics(target, target_mask);
    const ChannelStats rs = channel_statistics(reference, reference_mask);

    LatentGrid out = target;
    const int pixels = target.pixels();
    for (int c = 0; c < target.channels; ++c) {
        // double internals so the epsilon term is the only source of drift
        const double gain =
            static_cast<double>(rs.stds[c]) / (static_cast<double>(ts.stds[c]) + epsilon);
        const double mu_t = ts.means[c];
        const double mu_r = rs.means[c];
        float* och = out.channel(c);
        for (int p = 0; p < pixels; ++p) {
            if (target_mask && !target_mask->data[p]) continue;  // pass-through
            och[p] = static_cast<float>((och[p] - mu_t) * gain + mu_r);
        }
    }
    return out;
}

} // namespace xattn::latent
