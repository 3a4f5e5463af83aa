#ifndef INKSTRIP_IMAGE_HPP
#define INKSTRIP_IMAGE_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "inkstrip/errors.hpp"

namespace inkstrip {

/// 8-bit single-channel raster, row-major. 0 = black ink, 255 = white background.
///
/// Coordinates are (row, col) with origin at the top-left corner; positive dy
/// moves downward. This convention holds everywhere in the library.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // row-major, data[r * width + c]

    GrayImage() = default;

    GrayImage(int h, int w, std::uint8_t fill = 255)
        : width(w), height(h), data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {
        if (h < 1 || w < 1)
            throw DimensionError("GrayImage: dimensions must be >= 1");
    }

    std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
    std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }

    bool same_dims(const GrayImage& o) const { return width == o.width && height == o.height; }
    std::size_t pixel_count() const { return data.size(); }

    bool operator==(const GrayImage& o) const {
        return width == o.width && height == o.height && data == o.data;
    }
};

/// Binary segmentation mask sharing the GrayImage raster layout.
/// Pixel 0 = artifact, pixel 255 = not-artifact.
struct SegMask : GrayImage {
    SegMask() = default;
    SegMask(int h, int w, std::uint8_t fill = 255) : GrayImage(h, w, fill) {}
    explicit SegMask(GrayImage img) : GrayImage(std::move(img)) {}
};

inline bool is_binary(const GrayImage& img) {
    return std::all_of(img.data.begin(), img.data.end(),
                       [](std::uint8_t p) { return p == 0 || p == 255; });
}

/// Threshold to pure black/white: pixel < threshold -> 0, else 255.
inline GrayImage binarize(const GrayImage& img, int threshold = 128) {
    GrayImage out(img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = img.data[i] < threshold ? 0 : 255;
    return out;
}

/// Pixelwise minimum; black wins wherever the two overlap.
inline GrayImage superimpose(const GrayImage& clean, const GrayImage& artifact) {
    if (!clean.same_dims(artifact))
        throw DimensionError("superimpose: dimension mismatch");
    GrayImage out(clean.height, clean.width);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::min(clean.data[i], artifact.data[i]);
    return out;
}

/// Shift by (dy, dx) onto a target_h x target_w canvas, filling exposed
/// pixels with 255. Any offset is legal; fully off-canvas gives all-white.
inline GrayImage translate_and_crop(const GrayImage& artifact, int dy, int dx,
                                    int target_h, int target_w) {
    if (target_h < 1 || target_w < 1)
        throw DimensionError("translate_and_crop: target dimensions must be >= 1");
    GrayImage out(target_h, target_w, 255);
    for (int r = 0; r < target_h; ++r) {
        const int sr = r - dy;
        if (sr < 0 || sr >= artifact.height) continue;
        for (int c = 0; c < target_w; ++c) {
            const int sc = c - dx;
            if (sc < 0 || sc >= artifact.width) continue;
            out.at(r, c) = artifact.at(sr, sc);
        }
    }
    return out;
}

/// Segmentation mask s = x_art + (255 - max(x, x_art)) on binary rasters.
/// Black pixels of the result are exactly A - A∩B, where A is the ink of the
/// (already translated) artifact and B the ink of the clean image; artifact
/// ink that overlaps clean ink is protected as text.
inline SegMask derive_mask(const GrayImage& clean, const GrayImage& artifact) {
    if (!clean.same_dims(artifact))
        throw DimensionError("derive_mask: dimension mismatch");
    if (!is_binary(clean) || !is_binary(artifact))
        throw DataError("derive_mask: inputs must be binary");
    SegMask out(clean.height, clean.width);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const int x = clean.data[i];
        const int a = artifact.data[i];
        out.data[i] = static_cast<std::uint8_t>(a + (255 - std::max(x, a)));
    }
    return out;
}

/// Whiten every pixel the mask marks as artifact; all others pass through.
inline GrayImage erase_with_mask(const GrayImage& dirty, const SegMask& mask) {
    if (!dirty.same_dims(mask))
        throw DimensionError("erase_with_mask: dimension mismatch");
    GrayImage out = dirty;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (mask.data[i] == 0) out.data[i] = 255;
    return out;
}

/// Nearest-neighbor resample. Binary inputs stay binary.
inline GrayImage resize_nn(const GrayImage& img, int new_h, int new_w) {
    if (new_h < 1 || new_w < 1)
        throw DimensionError("resize_nn: target dimensions must be >= 1");
    GrayImage out(new_h, new_w);
    for (int r = 0; r < new_h; ++r) {
        const int sr = static_cast<int>(static_cast<std::int64_t>(r) * img.height / new_h);
        for (int c = 0; c < new_w; ++c) {
            const int sc = static_cast<int>(static_cast<std::int64_t>(c) * img.width / new_w);
            out.at(r, c) = img.at(sr, sc);
        }
    }
    return out;
}

/// Copy img onto a white canvas at offset (dy, dx). The image must fit.
inline GrayImage place_on_canvas(const GrayImage& img, int dy, int dx,
                                 int canvas_h = 32, int canvas_w = 128) {
    if (img.height > canvas_h || img.width > canvas_w)
        throw DimensionError("place_on_canvas: image larger than canvas");
    if (dy < 0 || dx < 0 || dy > canvas_h - img.height || dx > canvas_w - img.width)
        throw DimensionError("place_on_canvas: offset out of range");
    GrayImage out(canvas_h, canvas_w, 255);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            out.at(r + dy, c + dx) = img.at(r, c);
    return out;
}

/// Number of black (ink) pixels.
inline std::size_t count_black(const GrayImage& img) {
    return static_cast<std::size_t>(
        std::count(img.data.begin(), img.data.end(), std::uint8_t{0}));
}

}  // namespace inkstrip

#endif
