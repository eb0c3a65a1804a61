#pragma once

#include <cstdint>
#include <vector>

#include "sslvit/rng.hpp"
#include "sslvit/tensor.hpp"

namespace sslvit {

/// 3-channel image, planar channel-major layout, values in [0,1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pix;  // 3 * height * width

    Image() = default;
    Image(std::size_t h, std::size_t w, float fill = 0.0f)
        : height(h), width(w), pix(3 * h * w, fill) {}

    float& at(std::size_t c, std::size_t y, std::size_t x) {
        return pix[(c * height + y) * width + x];
    }
    float at(std::size_t c, std::size_t y, std::size_t x) const {
        return pix[(c * height + y) * width + x];
    }
};

Tensor image_to_tensor(const Image& img);                       // [3,H,W]
Tensor images_to_tensor(const std::vector<Image>& imgs);        // [B,3,H,W]
Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w);

struct JitterStrengths {
    float brightness = 0.4f;
    float contrast = 0.4f;
    float saturation = 0.2f;
    float hue = 0.1f;  // fraction of a half-turn
};

struct AugmentConfig {
    std::size_t global_size = 64;
    std::size_t local_size = 24;
    float global_scale_lo = 0.4f, global_scale_hi = 1.0f;
    float local_scale_lo = 0.05f, local_scale_hi = 0.4f;
    JitterStrengths jitter;
    float jitter_prob = 0.8f;
    float blur_sigma_lo = 0.1f, blur_sigma_hi = 2.0f;
    // Per-slot application: blur always on the first global-resolution view,
    // blur/solarize probabilities on the second, blur 0.5 on locals.
    float global2_blur_prob = 0.1f;
    float solarize_prob = 0.2f;
    float solarize_threshold = 0.5f;
    float local_blur_prob = 0.5f;

    // Local resolution is global * 3/7 rounded to a patch multiple so local
    // token grids tile evenly.
    static AugmentConfig for_resolution(std::size_t global_size, std::size_t patch_size);
};

/// Per-image view set: 2 views at global resolution for the correlation
/// branch, 2 global + 6 local views for the distillation branch. Regenerating
/// with identical (seed, epoch, image_index) is bit-identical.
struct MultiCropViews {
    std::vector<Image> bt_views;
    std::vector<Image> global_views;
    std::vector<Image> local_views;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::size_t image_index = 0;
};

Image random_resized_crop(const Image& img, std::size_t out_size, float scale_lo,
                          float scale_hi, Rng& rng, float aspect_lo = 0.75f,
                          float aspect_hi = 4.0f / 3.0f);

// Deterministic colour adjustments composed by color_jitter. Factor 1 (or
// angle 0) is an exact identity; results are clamped to [0,1].
Image adjust_brightness(const Image& img, float factor);
Image adjust_contrast(const Image& img, float factor);
Image adjust_saturation(const Image& img, float factor);
Image rotate_hue(const Image& img, float radians);

Image color_jitter(const Image& img, const JitterStrengths& strengths, Rng& rng);
Image gaussian_blur(const Image& img, float sigma);
Image solarize(const Image& img, float threshold);

MultiCropViews make_multicrop(const Image& img, const AugmentConfig& cfg,
                              std::uint64_t seed, std::size_t epoch,
                              std::size_t image_index);

}  // namespace sslvit
