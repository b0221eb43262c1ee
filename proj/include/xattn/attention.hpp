#ifndef XATTN_ATTENTION_HPP
#define XATTN_ATTENTION_HPP

#include <cstddef>
#include <string>

#include "xattn/tensor.hpp"

namespace xattn::attention {

/// Which branch supplies keys and values at a rewired layer.
enum class AttentionMode {
    SelfAttention,
    CrossImageAppearance,
    CrossImageStructure,
};

std::string to_string(AttentionMode mode);

/// Q/K/V projections at one attention layer (single head).
/// scale is the logit multiplier, 1/sqrt(d) for head dimension d.
struct AttentionContext {
    Matrix queries;  // [num_queries x d]
    Matrix keys;     // [num_keys x d]
    Matrix values;   // [num_keys x d_v]
    int head_count = 1;
    float scale = 1.0f;

    void validate() const;
};

/// Row-stochastic attention weights. Rows of a freshly computed map sum to 1
/// and are non-negative; after contrasting they still sum to 1 but entries
/// may be negative.
struct AttentionMap {
    Matrix weights;  // [num_queries x num_keys]

    int num_queries() const { return weights.rows; }
    int num_keys() const { return weights.cols; }
};

/// softmax(queries . keys^T * scale), row-wise with max subtraction.
AttentionMap compute_attention_map(const Matrix& queries, const Matrix& keys,
                                   float scale);

/// map . values
Matrix apply_attention(const AttentionMap& map, const Matrix& values);

/// Mean-preserving variance amplification of one weight row:
///   row <- (row - mean(row)) * beta + mean(row)
/// beta = 1 returns the input untouched so the identity is exact in floats.
template <typename T>
void contrast_row(T* row, int n, T beta) {
    if (n <= 0 || beta == T(1))
        return;
    double mean = 0.0;
    for (int i = 0; i < n; ++i)
        mean += static_cast<double>(row[i]);
    mean /= n;
    const T mu = static_cast<T>(mean);
    for (int i = 0; i < n; ++i)
        row[i] = (row[i] - mu) * beta + mu;
}

/// Contrast applied independently to every row of a map.
AttentionMap contrast_map(const AttentionMap& map, float beta);

/// One fused cross-image attention evaluation:
///   softmax(q_out . k_src^T * scale) -> contrast -> . v_src
/// With contrast_factor = 1 this equals compute_attention_map followed by
/// apply_attention on the same inputs.
Matrix cross_image_attention(const Matrix& q_out, const Matrix& k_src,
                             const Matrix& v_src, float scale,
                             float contrast_factor);

} // namespace xattn::attention

#endif // XATTN_ATTENTION_HPP
