#include "xattn/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "xattn/rng.hpp"

namespace xattn::analysis {

CorrespondenceMap extract_correspondences(
    const std::vector<attention::AttentionMap>& maps, Aggregation aggregation,
    int height, int width, int app_height, int app_width) {
    if (maps.empty())
        throw ConfigError("extract_correspondences: no attention maps captured");
    const int num_queries = height * width;
    const int num_keys = app_height * app_width;
    for (const auto& m : maps)
        if (m.num_queries() != num_queries || m.num_keys() != num_keys)
            throw InvalidShapeError("extract_correspondences: map shape [" +
                                    std::to_string(m.num_queries()) + "x" +
                                    std::to_string(m.num_keys()) +
                                    "] does not match the stated grids");
    const size_t count =
        aggregation == Aggregation::SingleLayer ? 1 : maps.size();

    CorrespondenceMap out;
    out.height = height;
    out.width = width;
    out.app_height = app_height;
    out.app_width = app_width;
    out.rows.resize(num_queries);
    out.cols.resize(num_queries);
    out.confidence.resize(num_queries);

    std::vector<double> row(num_keys);
    for (int qidx = 0; qidx < num_queries; ++qidx) {
        std::fill(row.begin(), row.end(), 0.0);
        for (size_t m = 0; m < count; ++m) {
            const float* w = maps[m].weights.row(qidx);
            for (int j = 0; j < num_keys; ++j)
                row[j] += w[j];
        }
        int best = 0;
        for (int j = 1; j < num_keys; ++j)
            if (row[j] > row[best])  // strict: ties keep the lowest index
                best = j;
        out.rows[qidx] = best / app_width;
        out.cols[qidx] = best % app_width;
        out.confidence[qidx] = static_cast<float>(row[best] / count);
    }
    return out;
}

backbone::ImageRgb render_correspondence(const CorrespondenceMap& map,
                                         const backbone::ImageRgb& appearance_colormap,
                                         bool gray_low_confidence) {
    if (appearance_colormap.width != map.app_width ||
        appearance_colormap.height != map.app_height)
        throw InvalidShapeError("render_correspondence: colormap is " +
                                std::to_string(appearance_colormap.width) + "x" +
                                std::to_string(appearance_colormap.height) +
                                ", correspondence expects " +
                                std::to_string(map.app_width) + "x" +
                                std::to_string(map.app_height));
    backbone::ImageRgb out(map.width, map.height);
    const float uniform = 1.0f / static_cast<float>(map.app_width * map.app_height);
    for (int p = 0; p < map.width * map.height; ++p) {
        if (gray_low_confidence && map.confidence[p] <= uniform) {
            out.pixels[p * 3 + 0] = out.pixels[p * 3 + 1] = out.pixels[p * 3 + 2] = 128;
            continue;
        }
        const size_t src = static_cast<size_t>(map.flat_index(p)) * 3;
        out.pixels[p * 3 + 0] = appearance_colormap.pixels[src + 0];
        out.pixels[p * 3 + 1] = appearance_colormap.pixels[src + 1];
        out.pixels[p * 3 + 2] = appearance_colormap.pixels[src + 2];
    }
    return out;
}

double structure_iou(const MaskGrid& mask_out, const MaskGrid& mask_struct) {
    if (!mask_out.same_shape(mask_struct))
        throw InvalidShapeError("structure_iou: mask shapes disagree");
    long long inter = 0, uni = 0;
    for (size_t i = 0; i < mask_out.data.size(); ++i) {
        const bool a = mask_out.data[i] != 0;
        const bool b = mask_struct.data[i] != 0;
        inter += (a && b);
        uni += (a || b);
    }
    if (uni == 0)
        return 1.0;  // both empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

GramMatrix gram_matrix(const LatentGrid& features) {
    GramMatrix g;
    g.channels = features.channels;
    g.values.assign(static_cast<size_t>(g.channels) * g.channels, 0.0);
    const int hw = features.pixels();
    const double norm = 1.0 / (static_cast<double>(features.channels) * hw);
    for (int i = 0; i < g.channels; ++i) {
        const float* fi = features.channel(i);
        for (int j = i; j < g.channels; ++j) {
            const float* fj = features.channel(j);
            double acc = 0.0;
            for (int p = 0; p < hw; ++p)
                acc += static_cast<double>(fi[p]) * fj[p];
            acc *= norm;
            g.values[static_cast<size_t>(i) * g.channels + j] = acc;
            g.values[static_cast<size_t>(j) * g.channels + i] = acc;
        }
    }
    return g;
}

double gram_frobenius_distance(const GramMatrix& a, const GramMatrix& b) {
    if (a.channels != b.channels)
        throw InvalidShapeError("gram distance: channel counts disagree");
    double acc = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double gram_distance(const std::vector<LatentGrid>& features_a,
                     const std::vector<LatentGrid>& features_b,
                     const std::vector<double>& layer_weights) {
    if (features_a.size() != features_b.size() ||
        features_a.size() != layer_weights.size())
        throw InvalidShapeError("gram_distance: layer sets disagree");
    double total = 0.0;
    for (size_t l = 0; l < features_a.size(); ++l) {
        if (features_a[l].channels != features_b[l].channels)
            throw InvalidShapeError("gram_distance: channel mismatch at layer " +
                                    std::to_string(l));
        total += layer_weights[l] *
                 gram_frobenius_distance(gram_matrix(features_a[l]),
                                         gram_matrix(features_b[l]));
    }
    return total;
}

SeededConvExtractor::SeededConvExtractor(uint64_t seed, int input_channels)
    : seed_(seed), input_channels_(input_channels) {
    layer_channels_ = {8, 8, 16, 16, 32};
    const CounterRng rng(seed);
    int in_c = input_channels_;
    for (size_t l = 0; l < layer_channels_.size(); ++l) {
        const int out_c = layer_channels_[l];
        std::vector<float> k(static_cast<size_t>(out_c) * in_c * 9);
        const float scale = 1.0f / std::sqrt(static_cast<float>(in_c) * 9.0f);
        for (size_t i = 0; i < k.size(); ++i)
            k[i] = scale * rng.normal(0x9000 + l, i);
        kernels_.push_back(std::move(k));
        in_c = out_c;
    }
}

namespace {

LatentGrid conv3x3_relu(const LatentGrid& in, const std::vector<float>& kernel,
                        int out_channels) {
    LatentGrid out(out_channels, in.height, in.width);
    for (int oc = 0; oc < out_channels; ++oc) {
        float* dst = out.channel(oc);
        for (int y = 0; y < in.height; ++y) {
            for (int x = 0; x < in.width; ++x) {
                double acc = 0.0;
                for (int ic = 0; ic < in.channels; ++ic) {
                    const float* src = in.channel(ic);
                    const float* kk =
                        kernel.data() + (static_cast<size_t>(oc) * in.channels + ic) * 9;
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int yy = y + dy;
                        if (yy < 0 || yy >= in.height) continue;  // zero padding
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xx = x + dx;
                            if (xx < 0 || xx >= in.width) continue;
                            acc += static_cast<double>(kk[(dy + 1) * 3 + (dx + 1)]) *
                                   src[yy * in.width + xx];
                        }
                    }
                }
                dst[y * in.width + x] = acc > 0.0 ? static_cast<float>(acc) : 0.0f;
            }
        }
    }
    return out;
}

LatentGrid avg_pool2(const LatentGrid& in) {
    const int h = std::max(in.height / 2, 1);
    const int w = std::max(in.width / 2, 1);
    LatentGrid out(in.channels, h, w);
    for (int c = 0; c < in.channels; ++c) {
        const float* src = in.channel(c);
        float* dst = out.channel(c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int sy = std::min(2 * y, in.height - 1);
                const int sx = std::min(2 * x, in.width - 1);
                const int sy2 = std::min(sy + 1, in.height - 1);
                const int sx2 = std::min(sx + 1, in.width - 1);
                dst[y * w + x] = 0.25f * (src[sy * in.width + sx] +
                                          src[sy * in.width + sx2] +
                                          src[sy2 * in.width + sx] +
                                          src[sy2 * in.width + sx2]);
            }
    }
    return out;
}

} // namespace

std::vector<LatentGrid> SeededConvExtractor::extract(const LatentGrid& input) const {
    if (input.channels != input_channels_)
        throw InvalidShapeError("SeededConvExtractor: expected " +
                                std::to_string(input_channels_) + " input channels");
    std::vector<LatentGrid> features;
    LatentGrid current = input;
    for (size_t l = 0; l < kernels_.size(); ++l) {
        current = conv3x3_relu(current, kernels_[l], layer_channels_[l]);
        features.push_back(current);
        if (l == 1 || l == 3)
            current = avg_pool2(current);
    }
    return features;
}

std::vector<LatentGrid> SeededConvExtractor::extract(
    const backbone::ImageRgb& image) const {
    LatentGrid grid(3, image.height, image.width);
    const size_t pixels = static_cast<size_t>(image.width) * image.height;
    for (int c = 0; c < 3; ++c) {
        float* ch = grid.channel(c);
        for (size_t p = 0; p < pixels; ++p)
            ch[p] = static_cast<float>(image.pixels[p * 3 + c]) / 255.0f;
    }
    return extract(grid);
}

float otsu_threshold(const std::vector<float>& values) {
    if (values.empty())
        throw ConfigError("otsu_threshold: no values");
    float lo = values[0], hi = values[0];
    for (float v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo))
        return lo;  // constant input: midpoint degenerates to the value itself

    constexpr int kBins = 256;
    std::vector<int> hist(kBins, 0);
    const float scale = (kBins - 1) / (hi - lo);
    for (float v : values)
        ++hist[static_cast<int>((v - lo) * scale)];

    const double total = static_cast<double>(values.size());
    double sum_all = 0.0;
    for (int b = 0; b < kBins; ++b)
        sum_all += b * static_cast<double>(hist[b]);

    double best_var = -1.0;
    int best_bin = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int b = 0; b < kBins - 1; ++b) {
        w0 += hist[b];
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += b * static_cast<double>(hist[b]);
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best_var) {
            best_var = var;
            best_bin = b;
        }
    }
    return lo + (static_cast<float>(best_bin) + 0.5f) / scale;
}

} // namespace xattn::analysis
