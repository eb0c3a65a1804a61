#include "sslvit/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sslvit/error.hpp"

namespace sslvit {

namespace {

float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

// View stream ids: 0,1 correlation views; 2,3 globals; 4..9 locals.
constexpr std::uint64_t kViewStreamSalt = 0x76696577ULL;  // "view"

}  // namespace

Tensor image_to_tensor(const Image& img) {
    return Tensor::from_data({3, img.height, img.width}, img.pix);
}

Tensor images_to_tensor(const std::vector<Image>& imgs) {
    if (imgs.empty()) throw ParamError("images_to_tensor: empty batch");
    std::size_t h = imgs[0].height, w = imgs[0].width;
    std::vector<float> data;
    data.reserve(imgs.size() * 3 * h * w);
    for (const Image& im : imgs) {
        if (im.height != h || im.width != w) {
            throw ShapeError("images_to_tensor: mixed resolutions in batch");
        }
        data.insert(data.end(), im.pix.begin(), im.pix.end());
    }
    return Tensor::from_data({imgs.size(), 3, h, w}, std::move(data));
}

Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) throw ParamError("resize_bilinear: zero output size");
    if (out_h == img.height && out_w == img.width) return img;
    Image out(out_h, out_w);
    float sy = float(img.height) / float(out_h);
    float sx = float(img.width) / float(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        float fy = (float(y) + 0.5f) * sy - 0.5f;
        float y0f = std::floor(fy);
        float wy = fy - y0f;
        long y0 = std::clamp<long>(long(y0f), 0, long(img.height) - 1);
        long y1 = std::clamp<long>(y0 + 1, 0, long(img.height) - 1);
        for (std::size_t x = 0; x < out_w; ++x) {
            float fx = (float(x) + 0.5f) * sx - 0.5f;
            float x0f = std::floor(fx);
            float wx = fx - x0f;
            long x0 = std::clamp<long>(long(x0f), 0, long(img.width) - 1);
            long x1 = std::clamp<long>(x0 + 1, 0, long(img.width) - 1);
            for (std::size_t c = 0; c < 3; ++c) {
                float v00 = img.at(c, y0, x0), v01 = img.at(c, y0, x1);
                float v10 = img.at(c, y1, x0), v11 = img.at(c, y1, x1);
                float top = v00 + (v01 - v00) * wx;
                float bot = v10 + (v11 - v10) * wx;
                out.at(c, y, x) = clamp01(top + (bot - top) * wy);
            }
        }
    }
    return out;
}

AugmentConfig AugmentConfig::for_resolution(std::size_t global_size, std::size_t patch_size) {
    AugmentConfig cfg;
    cfg.global_size = global_size;
    std::size_t raw = (global_size * 3 + 3) / 7;  // round(global * 3/7)
    std::size_t local = (raw + patch_size / 2) / patch_size * patch_size;
    cfg.local_size = std::max(local, patch_size);
    return cfg;
}

Image random_resized_crop(const Image& img, std::size_t out_size, float scale_lo,
                          float scale_hi, Rng& rng, float aspect_lo, float aspect_hi) {
    if (!(scale_lo > 0.0f) || scale_lo > scale_hi || scale_hi > 1.0f) {
        throw ParamError("random_resized_crop: scale range must satisfy 0 < lo <= hi <= 1");
    }
    std::size_t H = img.height, W = img.width;
    double area = double(H) * double(W);

    std::size_t cw = 0, ch = 0, cx = 0, cy = 0;
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
        double target = area * rng.uniform(scale_lo, scale_hi);
        double log_ratio = rng.uniform(std::log(aspect_lo), std::log(aspect_hi));
        double ratio = std::exp(log_ratio);
        auto w = std::size_t(std::lround(std::sqrt(target * ratio)));
        auto h = std::size_t(std::lround(std::sqrt(target / ratio)));
        if (w >= 1 && h >= 1 && w <= W && h <= H) {
            cw = w;
            ch = h;
            cx = rng.uniform_index(W - w + 1);
            cy = rng.uniform_index(H - h + 1);
            found = true;
        }
    }
    if (!found) {
        // fallback: centered square of the short side
        std::size_t s = std::min(H, W);
        cw = ch = s;
        cx = (W - s) / 2;
        cy = (H - s) / 2;
    }

    Image crop(ch, cw);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < ch; ++y)
            for (std::size_t x = 0; x < cw; ++x) crop.at(c, y, x) = img.at(c, cy + y, cx + x);
    return resize_bilinear(crop, out_size, out_size);
}

Image adjust_brightness(const Image& img, float factor) {
    if (factor == 1.0f) return img;
    Image out = img;
    for (float& v : out.pix) v = clamp01(v * factor);
    return out;
}

Image adjust_contrast(const Image& img, float factor) {
    if (factor == 1.0f) return img;
    Image out = img;
    std::size_t n = img.height * img.width;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        mean += luma(img.pix[i], img.pix[n + i], img.pix[2 * n + i]);
    float m = float(mean / double(n));
    for (float& v : out.pix) v = clamp01((v - m) * factor + m);
    return out;
}

Image adjust_saturation(const Image& img, float factor) {
    if (factor == 1.0f) return img;
    Image out = img;
    std::size_t n = img.height * img.width;
    for (std::size_t i = 0; i < n; ++i) {
        float g = luma(img.pix[i], img.pix[n + i], img.pix[2 * n + i]);
        out.pix[i] = clamp01((img.pix[i] - g) * factor + g);
        out.pix[n + i] = clamp01((img.pix[n + i] - g) * factor + g);
        out.pix[2 * n + i] = clamp01((img.pix[2 * n + i] - g) * factor + g);
    }
    return out;
}

Image rotate_hue(const Image& img, float radians) {
    if (radians == 0.0f) return img;
    // rotation in YIQ space; the I/Q rows vanish on gray pixels
    Image out = img;
    std::size_t n = img.height * img.width;
    float ct = std::cos(radians), st = std::sin(radians);
    for (std::size_t i = 0; i < n; ++i) {
        float r = img.pix[i], g = img.pix[n + i], b = img.pix[2 * n + i];
        float yy = luma(r, g, b);
        float ii = 0.595716f * r - 0.274453f * g - 0.321263f * b;
        float qq = 0.211456f * r - 0.522591f * g + 0.311135f * b;
        float ir = ii * ct - qq * st;
        float qr = ii * st + qq * ct;
        out.pix[i] = clamp01(yy + 0.9563f * ir + 0.6210f * qr);
        out.pix[n + i] = clamp01(yy - 0.2721f * ir - 0.6474f * qr);
        out.pix[2 * n + i] = clamp01(yy - 1.1070f * ir + 1.7046f * qr);
    }
    return out;
}

Image color_jitter(const Image& img, const JitterStrengths& s, Rng& rng) {
    if (s.brightness < 0 || s.contrast < 0 || s.saturation < 0 || s.hue < 0) {
        throw ParamError("color_jitter: strengths must be nonnegative");
    }
    float fb = rng.uniform_float(std::max(0.0f, 1.0f - s.brightness), 1.0f + s.brightness);
    float fc = rng.uniform_float(std::max(0.0f, 1.0f - s.contrast), 1.0f + s.contrast);
    float fs = rng.uniform_float(std::max(0.0f, 1.0f - s.saturation), 1.0f + s.saturation);
    float theta = rng.uniform_float(-s.hue, s.hue) * 3.14159265358979f;
    Image out = adjust_brightness(img, fb);
    out = adjust_contrast(out, fc);
    out = adjust_saturation(out, fs);
    return rotate_hue(out, theta);
}

Image gaussian_blur(const Image& img, float sigma) {
    if (!(sigma > 0.0f)) throw ParamError("gaussian_blur: sigma must be positive");
    long radius = long(std::ceil(3.0f * sigma));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * double(i) * double(i) / (double(sigma) * double(sigma)));
        kernel[i + radius] = float(w);
        sum += w;
    }
    for (float& w : kernel) w = float(double(w) / sum);

    long H = long(img.height), W = long(img.width);
    Image tmp(img.height, img.width);
    // horizontal pass, replicate edges
    for (std::size_t c = 0; c < 3; ++c)
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                double acc = 0.0;
                for (long i = -radius; i <= radius; ++i) {
                    long xx = std::clamp(x + i, 0L, W - 1);
                    acc += double(kernel[i + radius]) * double(img.at(c, y, xx));
                }
                tmp.at(c, y, x) = float(acc);
            }
    Image out(img.height, img.width);
    for (std::size_t c = 0; c < 3; ++c)
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                double acc = 0.0;
                for (long i = -radius; i <= radius; ++i) {
                    long yy = std::clamp(y + i, 0L, H - 1);
                    acc += double(kernel[i + radius]) * double(tmp.at(c, yy, x));
                }
                out.at(c, y, x) = clamp01(float(acc));
            }
    return out;
}

Image solarize(const Image& img, float threshold) {
    if (threshold < 0.0f || threshold > 1.0f) {
        throw ParamError("solarize: threshold must lie in [0,1]");
    }
    Image out = img;
    for (float& v : out.pix) {
        if (v >= threshold) v = 1.0f - v;
    }
    return out;
}

namespace {

struct ViewRecipe {
    std::size_t out_size;
    float scale_lo, scale_hi;
    float blur_prob;      // 1.0 means always
    float solarize_prob;  // 0.0 means never
};

Image make_view(const Image& img, const AugmentConfig& cfg, const ViewRecipe& recipe,
                Rng rng) {
    Image v = random_resized_crop(img, recipe.out_size, recipe.scale_lo, recipe.scale_hi, rng);
    if (rng.uniform() < cfg.jitter_prob) {
        v = color_jitter(v, cfg.jitter, rng);
    }
    if (rng.uniform() < recipe.blur_prob) {
        float sigma = rng.uniform_float(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
        v = gaussian_blur(v, sigma);
    }
    if (recipe.solarize_prob > 0.0f && rng.uniform() < recipe.solarize_prob) {
        v = solarize(v, cfg.solarize_threshold);
    }
    return v;
}

}  // namespace

MultiCropViews make_multicrop(const Image& img, const AugmentConfig& cfg,
                              std::uint64_t seed, std::size_t epoch,
                              std::size_t image_index) {
    MultiCropViews views;
    views.seed = seed;
    views.epoch = epoch;
    views.image_index = image_index;

    auto stream = [&](std::size_t view_index) {
        return Rng::derive({kViewStreamSalt, seed, epoch, image_index, view_index});
    };

    ViewRecipe global1{cfg.global_size, cfg.global_scale_lo, cfg.global_scale_hi, 1.0f, 0.0f};
    ViewRecipe global2{cfg.global_size, cfg.global_scale_lo, cfg.global_scale_hi,
                       cfg.global2_blur_prob, cfg.solarize_prob};
    ViewRecipe local{cfg.local_size, cfg.local_scale_lo, cfg.local_scale_hi,
                     cfg.local_blur_prob, 0.0f};

    // correlation views follow the two global recipes
    views.bt_views.push_back(make_view(img, cfg, global1, stream(0)));
    views.bt_views.push_back(make_view(img, cfg, global2, stream(1)));
    views.global_views.push_back(make_view(img, cfg, global1, stream(2)));
    views.global_views.push_back(make_view(img, cfg, global2, stream(3)));
    for (std::size_t i = 0; i < 6; ++i) {
        views.local_views.push_back(make_view(img, cfg, local, stream(4 + i)));
    }
    return views;
}

}  // namespace sslvit
