#include "xattn/attention.hpp"

#include <cmath>

namespace xattn::attention {

std::string to_string(AttentionMode mode) {
    switch (mode) {
        case AttentionMode::SelfAttention: return "self";
        case AttentionMode::CrossImageAppearance: return "appearance";
        case AttentionMode::CrossImageStructure: return "structure";
    }
    return "unknown";
}

void AttentionContext::validate() const {
    if (queries.cols != keys.cols)
        throw InvalidShapeError("AttentionContext: queries and keys must share inner "
                                "dimension (" + std::to_string(queries.cols) + " vs " +
                                std::to_string(keys.cols) + ")");
    if (keys.rows != values.rows)
        throw InvalidShapeError("AttentionContext: keys and values must share "
                                "num_keys (" + std::to_string(keys.rows) + " vs " +
                                std::to_string(values.rows) + ")");
    if (head_count < 1)
        throw InvalidShapeError("AttentionContext: head_count must be positive");
    if (!(scale > 0.0f))
        throw InvalidShapeError("AttentionContext: scale must be > 0");
}

AttentionMap compute_attention_map(const Matrix& queries, const Matrix& keys,
                                   float scale) {
    if (queries.cols != keys.cols)
        throw InvalidShapeError("compute_attention_map: queries are [" +
                                std::to_string(queries.rows) + "x" +
                                std::to_string(queries.cols) + "], keys are [" +
                                std::to_string(keys.rows) + "x" +
                                std::to_string(keys.cols) + "]");
    AttentionMap map;
    map.weights = Matrix(queries.rows, keys.rows);
    for (int i = 0; i < queries.rows; ++i) {
        const float* q = queries.row(i);
        float* out = map.weights.row(i);
        // logits = q . k^T * scale, with row-max subtraction before exp
        double row_max = -1e300;
        for (int j = 0; j < keys.rows; ++j) {
            const float* k = keys.row(j);
            double dot = 0.0;
            for (int c = 0; c < queries.cols; ++c)
                dot += static_cast<double>(q[c]) * k[c];
            dot *= scale;
            out[j] = static_cast<float>(dot);
            if (dot > row_max) row_max = dot;
        }
        double denom = 0.0;
        for (int j = 0; j < keys.rows; ++j) {
            float e = std::exp(out[j] - static_cast<float>(row_max));
            out[j] = e;
            denom += e;
        }
        const float inv = static_cast<float>(1.0 / denom);
        for (int j = 0; j < keys.rows; ++j)
            out[j] *= inv;
    }
    return map;
}

Matrix apply_attention(const AttentionMap& map, const Matrix& values) {
    if (map.num_keys() != values.rows)
        throw InvalidShapeError("apply_attention: map has " +
                                std::to_string(map.num_keys()) + " keys, values have " +
                                std::to_string(values.rows) + " rows");
    return matmul(map.weights, values);
}

AttentionMap contrast_map(const AttentionMap& map, float beta) {
    if (beta < 0.0f)
        throw ConfigError("contrast_map: beta must be >= 0");
    AttentionMap out = map;
    for (int i = 0; i < out.weights.rows; ++i)
        contrast_row(out.weights.row(i), out.weights.cols, beta);
    return out;
}

Matrix cross_image_attention(const Matrix& q_out, const Matrix& k_src,
                             const Matrix& v_src, float scale,
                             float contrast_factor) {
    AttentionMap map = compute_attention_map(q_out, k_src, scale);
    map = contrast_map(map, contrast_factor);
    return apply_attention(map, v_src);
}

} // namespace xattn::attention
