#ifndef XATTN_TENSOR_HPP
#define XATTN_TENSOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "xattn/errors.hpp"

namespace xattn {

/// Dense row-major matrix of 32-bit floats.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(int r, int c, float fill = 0.0f)
        : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0)
            throw InvalidShapeError("Matrix dimensions must be non-negative");
    }

    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    bool empty() const { return rows == 0 || cols == 0; }
    size_t size() const { return data.size(); }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

/// Product a * b. Accumulates in double.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Product a * b^T (avoids materializing the transpose).
Matrix matmul_transposed(const Matrix& a, const Matrix& b_t);

/// A noisy latent code: [channels x height x width], row-major per channel.
struct LatentGrid {
    int channels = 0;
    int height = 0;
    int width = 0;
    int timestep_index = 0;
    std::vector<float> data;

    LatentGrid() = default;
    LatentGrid(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {
        if (c < 1 || h < 1 || w < 1)
            throw InvalidShapeError("LatentGrid dimensions must be >= 1");
    }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    const float* channel(int c) const {
        return data.data() + static_cast<size_t>(c) * height * width;
    }
    float* channel(int c) {
        return data.data() + static_cast<size_t>(c) * height * width;
    }

    int pixels() const { return height * width; }
    size_t size() const { return data.size(); }

    bool same_shape(const LatentGrid& other) const {
        return channels == other.channels && height == other.height &&
               width == other.width;
    }
    void require_same_shape(const LatentGrid& other, const std::string& what) const;
};

/// Binary foreground mask, entries in {0,1}.
struct MaskGrid {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    MaskGrid() = default;
    MaskGrid(int h, int w, uint8_t fill = 0)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {
        if (h < 1 || w < 1)
            throw InvalidShapeError("MaskGrid dimensions must be >= 1");
    }

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    int count_selected() const {
        int n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }
    bool same_shape(const MaskGrid& other) const {
        return height == other.height && width == other.width;
    }
};

/// Tokens of a latent as a [height*width x channels] matrix (row per pixel,
/// scanline order). Inverse of grid_from_tokens.
Matrix tokens_from_grid(const LatentGrid& grid);
LatentGrid grid_from_tokens(const Matrix& tokens, int channels, int height, int width);

float max_abs_difference(const LatentGrid& a, const LatentGrid& b);
double mean_abs_difference(const LatentGrid& a, const LatentGrid& b);

} // namespace xattn

#endif // XATTN_TENSOR_HPP
