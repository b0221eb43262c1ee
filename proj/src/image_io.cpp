#include "xattn/image_io.hpp"

#include <png.h>

#include <cstring>

namespace xattn::io {

backbone::ImageRgb read_png(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw IoError("cannot read PNG '" + path + "': " + png.message);
    png.format = PNG_FORMAT_RGB;
    backbone::ImageRgb image(static_cast<int>(png.width), static_cast<int>(png.height));
    if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
        png_image_free(&png);
        throw IoError("cannot decode PNG '" + path + "': " + png.message);
    }
    return image;
}

void write_png(const std::string& path, const backbone::ImageRgb& image) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path + "': " + png.message);
}

MaskGrid read_mask_png(const std::string& path) {
    const backbone::ImageRgb image = read_png(path);
    MaskGrid mask(image.height, image.width);
    for (size_t p = 0; p < mask.data.size(); ++p) {
        // integer BT.601 luma
        const int r = image.pixels[p * 3 + 0];
        const int g = image.pixels[p * 3 + 1];
        const int b = image.pixels[p * 3 + 2];
        const int luma = (299 * r + 587 * g + 114 * b) / 1000;
        mask.data[p] = luma >= 128 ? 1 : 0;
    }
    return mask;
}

void write_mask_png(const std::string& path, const MaskGrid& mask) {
    backbone::ImageRgb image(mask.width, mask.height);
    for (size_t p = 0; p < mask.data.size(); ++p) {
        const uint8_t v = mask.data[p] ? 255 : 0;
        image.pixels[p * 3 + 0] = v;
        image.pixels[p * 3 + 1] = v;
        image.pixels[p * 3 + 2] = v;
    }
    write_png(path, image);
}

} // namespace xattn::io
