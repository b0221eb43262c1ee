#ifndef XATTN_ANALYSIS_HPP
#define XATTN_ANALYSIS_HPP

#include <cstdint>
#include <vector>

#include "xattn/attention.hpp"
#include "xattn/backbone.hpp"
#include "xattn/tensor.hpp"

namespace xattn::analysis {

enum class Aggregation { SingleLayer, MeanOverSelected };

/// Per-pixel mapping from the structure grid into the appearance grid.
/// confidence holds the winning attention weight; entries at or below
/// 1/num_keys are flagged low-confidence by consumers.
struct CorrespondenceMap {
    int height = 0;          // structure grid
    int width = 0;
    int app_height = 0;      // appearance grid
    int app_width = 0;
    std::vector<int32_t> rows;  // matched appearance row per structure pixel
    std::vector<int32_t> cols;
    std::vector<float> confidence;

    int32_t flat_index(int p) const { return rows[p] * app_width + cols[p]; }
};

/// Argmax over keys of the aggregated cross-image map, per query pixel.
/// Ties break toward the lowest flat key index. Maps must share shape
/// [height*width x app_height*app_width].
CorrespondenceMap extract_correspondences(
    const std::vector<attention::AttentionMap>& maps, Aggregation aggregation,
    int height, int width, int app_height, int app_width);

/// Paints every structure pixel with the color of its matched appearance
/// pixel. When gray_low_confidence is set, pixels whose confidence does not
/// exceed uniform weight are drawn mid-gray.
backbone::ImageRgb render_correspondence(const CorrespondenceMap& map,
                                         const backbone::ImageRgb& appearance_colormap,
                                         bool gray_low_confidence = false);

/// Intersection over union; 1.0 when both masks are empty.
double structure_iou(const MaskGrid& mask_out, const MaskGrid& mask_struct);

/// Channel Gram matrix G = F . F^T / (C*H*W) of an unrolled [C x H*W]
/// feature map, accumulated in double.
struct GramMatrix {
    int channels = 0;
    std::vector<double> values;  // [channels x channels], symmetric

    double at(int i, int j) const { return values[static_cast<size_t>(i) * channels + j]; }
};

GramMatrix gram_matrix(const LatentGrid& features);

/// Frobenius distance between two same-shape Gram matrices.
double gram_frobenius_distance(const GramMatrix& a, const GramMatrix& b);

/// sum_l w_l * ||G_l(a) - G_l(b)||_F over matching feature stacks.
double gram_distance(const std::vector<LatentGrid>& features_a,
                     const std::vector<LatentGrid>& features_b,
                     const std::vector<double>& layer_weights);

/// Fixed-seed convolutional stack standing in for a pretrained feature
/// extractor: five 3x3 conv + ReLU blocks with average-pool downsampling
/// after the second and fourth. Deterministic given the seed; the metric
/// protocol (five intermediate layers, Gram distance) matches what a real
/// extractor adapter must provide.
class SeededConvExtractor {
public:
    explicit SeededConvExtractor(uint64_t seed = 0, int input_channels = 3);

    std::vector<LatentGrid> extract(const LatentGrid& input) const;
    std::vector<LatentGrid> extract(const backbone::ImageRgb& image) const;

    int num_layers() const { return static_cast<int>(kernels_.size()); }
    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    int input_channels_;
    // kernels_[l] is [out_c x in_c x 3 x 3] flattened
    std::vector<std::vector<float>> kernels_;
    std::vector<int> layer_channels_;
};

/// Threshold index maximizing between-class variance of a value histogram;
/// values are binned over [min, max]. Falls back to the midpoint when the
/// input is constant.
float otsu_threshold(const std::vector<float>& values);

} // namespace xattn::analysis

#endif // XATTN_ANALYSIS_HPP
