#include "xattn/tensor.hpp"

#include <cmath>
#include <cstdlib>

namespace xattn {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw InvalidShapeError("matmul: inner dimensions disagree (" +
                                std::to_string(a.cols) + " vs " +
                                std::to_string(b.rows) + ")");
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const float* arow = a.row(i);
        float* orow = out.row(i);
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k)
                acc += static_cast<double>(arow[k]) * b.at(k, j);
            orow[j] = static_cast<float>(acc);
        }
    }
    return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b_t) {
    if (a.cols != b_t.cols)
        throw InvalidShapeError("matmul_transposed: inner dimensions disagree (" +
                                std::to_string(a.cols) + " vs " +
                                std::to_string(b_t.cols) + ")");
    Matrix out(a.rows, b_t.rows);
    for (int i = 0; i < a.rows; ++i) {
        const float* arow = a.row(i);
        float* orow = out.row(i);
        for (int j = 0; j < b_t.rows; ++j) {
            const float* brow = b_t.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k)
                acc += static_cast<double>(arow[k]) * brow[k];
            orow[j] = static_cast<float>(acc);
        }
    }
    return out;
}

void LatentGrid::require_same_shape(const LatentGrid& other,
                                    const std::string& what) const {
    if (!same_shape(other))
        throw InvalidShapeError(what + ": latent shapes disagree ([" +
                                std::to_string(channels) + "x" + std::to_string(height) +
                                "x" + std::to_string(width) + "] vs [" +
                                std::to_string(other.channels) + "x" +
                                std::to_string(other.height) + "x" +
                                std::to_string(other.width) + "])");
}

Matrix tokens_from_grid(const LatentGrid& grid) {
    Matrix tokens(grid.pixels(), grid.channels);
    for (int c = 0; c < grid.channels; ++c) {
        const float* ch = grid.channel(c);
        for (int p = 0; p < grid.pixels(); ++p)
            tokens.at(p, c) = ch[p];
    }
    return tokens;
}

LatentGrid grid_from_tokens(const Matrix& tokens, int channels, int height, int width) {
    if (tokens.rows != height * width || tokens.cols != channels)
        throw InvalidShapeError("grid_from_tokens: token matrix is " +
                                std::to_string(tokens.rows) + "x" +
                                std::to_string(tokens.cols) + ", expected " +
                                std::to_string(height * width) + "x" +
                                std::to_string(channels));
    LatentGrid grid(channels, height, width);
    for (int c = 0; c < channels; ++c) {
        float* ch = grid.channel(c);
        for (int p = 0; p < height * width; ++p)
            ch[p] = tokens.at(p, c);
    }
    return grid;
}

float max_abs_difference(const LatentGrid& a, const LatentGrid& b) {
    a.require_same_shape(b, "max_abs_difference");
    float worst = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

double mean_abs_difference(const LatentGrid& a, const LatentGrid& b) {
    a.require_same_shape(b, "mean_abs_difference");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
    return acc / static_cast<double>(a.data.size());
}

} // namespace xattn
