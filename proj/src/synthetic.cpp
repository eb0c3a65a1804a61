#include "sslvit/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sslvit/data_io.hpp"
#include "sslvit/error.hpp"
#include "sslvit/rng.hpp"

namespace sslvit {

namespace {

constexpr std::uint64_t kShapeSalt = 0x73686170ULL;  // "shap"

struct Palette {
    float r, g, b;
};

// one base color per class
constexpr Palette kPalette[10] = {
    {0.90f, 0.20f, 0.20f}, {0.20f, 0.75f, 0.25f}, {0.25f, 0.35f, 0.95f},
    {0.95f, 0.80f, 0.15f}, {0.80f, 0.25f, 0.85f}, {0.15f, 0.80f, 0.80f},
    {0.95f, 0.55f, 0.15f}, {0.55f, 0.95f, 0.55f}, {0.90f, 0.90f, 0.90f},
    {0.55f, 0.35f, 0.15f},
};

bool inside_shape(int cls, float dx, float dy, float radius) {
    float ax = std::abs(dx), ay = std::abs(dy);
    float r = std::sqrt(dx * dx + dy * dy);
    switch (cls) {
        case 0: return r <= radius;                                       // disc
        case 1: return ax <= radius && ay <= radius;                      // square
        case 2: return dy >= -radius && dy <= radius &&                   // triangle
                       ax <= (dy + radius) * 0.5f;
        case 3: return r <= radius && r >= 0.55f * radius;                // ring
        case 4: return (ax <= 0.35f * radius && ay <= radius) ||          // cross
                       (ay <= 0.35f * radius && ax <= radius);
        case 5: return ay <= 0.35f * radius && ax <= radius;              // horizontal bar
        case 6: return ax <= 0.35f * radius && ay <= radius;              // vertical bar
        case 7: return ax + ay <= radius;                                 // diamond
        case 8: {                                                         // checker
            if (ax > radius || ay > radius) return false;
            int ix = int(std::floor((dx + radius) / (radius * 0.5f)));
            int iy = int(std::floor((dy + radius) / (radius * 0.5f)));
            return (ix + iy) % 2 == 0;
        }
        default: {                                                        // dot grid
            float gx = std::fmod(ax, radius * 0.66f) - radius * 0.33f;
            float gy = std::fmod(ay, radius * 0.66f) - radius * 0.33f;
            return ax <= radius && ay <= radius &&
                   gx * gx + gy * gy <= 0.04f * radius * radius;
        }
    }
}

}  // namespace

std::vector<Image> make_shape_corpus(std::size_t count, std::size_t size, std::uint64_t seed,
                                     std::vector<int>* labels) {
    std::vector<Image> images;
    images.reserve(count);
    if (labels) labels->clear();
    for (std::size_t i = 0; i < count; ++i) {
        int cls = int(i % 10);
        Rng rng = Rng::derive({kShapeSalt, seed, i});
        Image img(size, size);
        for (float& v : img.pix) v = rng.uniform_float(0.05f, 0.45f);

        float cx = float(size) * rng.uniform_float(0.35f, 0.65f);
        float cy = float(size) * rng.uniform_float(0.35f, 0.65f);
        float radius = float(size) * rng.uniform_float(0.18f, 0.32f);
        Palette base = kPalette[cls];
        float jr = rng.uniform_float(-0.08f, 0.08f);
        float jg = rng.uniform_float(-0.08f, 0.08f);
        float jb = rng.uniform_float(-0.08f, 0.08f);

        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                if (inside_shape(cls, float(x) - cx, float(y) - cy, radius)) {
                    img.at(0, y, x) = std::clamp(base.r + jr, 0.0f, 1.0f);
                    img.at(1, y, x) = std::clamp(base.g + jg, 0.0f, 1.0f);
                    img.at(2, y, x) = std::clamp(base.b + jb, 0.0f, 1.0f);
                }
            }
        images.push_back(std::move(img));
        if (labels) labels->push_back(cls);
    }
    return images;
}

std::vector<Image> make_bw_corpus(std::size_t count, std::size_t size,
                                  std::vector<int>* labels) {
    std::vector<Image> images;
    images.reserve(count);
    if (labels) labels->clear();
    for (std::size_t i = 0; i < count; ++i) {
        int cls = int(i % 2);
        images.emplace_back(size, size, cls == 0 ? 0.0f : 1.0f);
        if (labels) labels->push_back(cls);
    }
    return images;
}

void write_corpus(const std::string& dir, const std::vector<Image>& images,
                  const std::vector<int>* labels) {
    std::filesystem::create_directories(dir);
    char name[32];
    std::string csv;
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::snprintf(name, sizeof(name), "%04zu.ppm", i);
        save_ppm(images[i], (std::filesystem::path(dir) / name).string());
        if (labels) csv += std::string(name) + "," + std::to_string((*labels)[i]) + "\n";
    }
    if (labels) {
        std::ofstream f(std::filesystem::path(dir) / "labels.csv", std::ios::trunc);
        if (!f) throw Error("cannot write labels.csv under " + dir);
        f << csv;
    }
}

}  // namespace sslvit
