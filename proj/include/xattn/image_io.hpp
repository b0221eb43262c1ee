#ifndef XATTN_IMAGE_IO_HPP
#define XATTN_IMAGE_IO_HPP

#include <string>

#include "xattn/backbone.hpp"
#include "xattn/tensor.hpp"

namespace xattn::io {

backbone::ImageRgb read_png(const std::string& path);
void write_png(const std::string& path, const backbone::ImageRgb& image);

/// Loads a mask from an image file: pixel luminance >= 128 selects.
MaskGrid read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const MaskGrid& mask);

} // namespace xattn::io

#endif // XATTN_IMAGE_IO_HPP
