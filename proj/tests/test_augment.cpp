#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sslvit/augment.hpp"
#include "sslvit/error.hpp"
#include "sslvit/rng.hpp"

using namespace sslvit;

namespace {

Image noise_image(std::size_t h, std::size_t w, std::uint64_t key) {
    Image img(h, w);
    Rng rng = Rng::derive({0x1111, key});
    for (float& v : img.pix) v = rng.uniform_float(0.0f, 1.0f);
    return img;
}

double total_variation(const Image& img) {
    double tv = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x + 1 < img.width; ++x)
                tv += std::abs(img.at(c, y, x + 1) - img.at(c, y, x));
        for (std::size_t y = 0; y + 1 < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                tv += std::abs(img.at(c, y + 1, x) - img.at(c, y, x));
    }
    return tv;
}

double mean_pixel(const Image& img) {
    double s = 0.0;
    for (float v : img.pix) s += v;
    return s / double(img.pix.size());
}

}  // namespace

TEST_CASE("random_resized_crop full-scale square is identity") {
    Image img = noise_image(32, 32, 1);
    Rng rng = Rng::derive({1});
    Image out = random_resized_crop(img, 32, 1.0f, 1.0f, rng, 1.0f, 1.0f);
    CHECK(out.pix == img.pix);
}

TEST_CASE("random_resized_crop output contract") {
    Image img = noise_image(48, 40, 2);
    for (int i = 0; i < 10; ++i) {
        Rng rng = Rng::derive({2, std::uint64_t(i)});
        Image out = random_resized_crop(img, 24, 0.05f, 1.0f, rng);
        CHECK(out.height == 24);
        CHECK(out.width == 24);
        for (float v : out.pix) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    CHECK_THROWS_AS({
        Rng rng = Rng::derive({3});
        random_resized_crop(img, 24, 0.0f, 1.0f, rng);
    }, ParamError);
}

TEST_CASE("random_resized_crop is a pure function of the rng stream") {
    Image img = noise_image(40, 40, 3);
    Rng a = Rng::derive({77, 5});
    Rng b = Rng::derive({77, 5});
    Image va = random_resized_crop(img, 16, 0.3f, 0.9f, a);
    Image vb = random_resized_crop(img, 16, 0.3f, 0.9f, b);
    CHECK(va.pix == vb.pix);
}

TEST_CASE("color adjustments") {
    Image img = noise_image(8, 8, 4);

    SUBCASE("all strengths zero is the identity") {
        Rng rng = Rng::derive({4});
        JitterStrengths none{0, 0, 0, 0};
        Image out = color_jitter(img, none, rng);
        CHECK(out.pix == img.pix);
    }

    SUBCASE("brightness clamps at 1") {
        Image px(1, 1);
        px.at(0, 0, 0) = 0.6f;
        px.at(1, 0, 0) = 0.6f;
        px.at(2, 0, 0) = 0.6f;
        Image out = adjust_brightness(px, 2.0f);
        CHECK(out.at(0, 0, 0) == 1.0f);
    }

    SUBCASE("gray image is a fixed point of saturation") {
        Image gray(6, 6);
        for (std::size_t y = 0; y < 6; ++y)
            for (std::size_t x = 0; x < 6; ++x)
                for (std::size_t c = 0; c < 3; ++c) gray.at(c, y, x) = 0.31f + 0.01f * float(y);
        Image out = adjust_saturation(gray, 1.7f);
        for (std::size_t i = 0; i < gray.pix.size(); ++i)
            CHECK(out.pix[i] == doctest::Approx(gray.pix[i]).epsilon(1e-6));
        Image hue = rotate_hue(gray, 0.8f);
        for (std::size_t i = 0; i < gray.pix.size(); ++i)
            CHECK(hue.pix[i] == doctest::Approx(gray.pix[i]).epsilon(1e-6));
    }

    SUBCASE("output stays in range under heavy strengths") {
        Rng rng = Rng::derive({5});
        JitterStrengths heavy{1.5f, 1.5f, 1.5f, 0.5f};
        for (int i = 0; i < 5; ++i) {
            Image out = color_jitter(img, heavy, rng);
            for (float v : out.pix) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
    }
}

TEST_CASE("gaussian_blur properties") {
    SUBCASE("constant image unchanged") {
        Image c(16, 16, 0.42f);
        Image out = gaussian_blur(c, 1.3f);
        for (float v : out.pix) CHECK(v == doctest::Approx(0.42f).epsilon(1e-6));
    }
    SUBCASE("mean preserved and total variation reduced on noise") {
        Image img = noise_image(64, 64, 6);
        Image out = gaussian_blur(img, 1.0f);
        CHECK(mean_pixel(out) == doctest::Approx(mean_pixel(img)).epsilon(1e-3));
        CHECK(total_variation(out) <= total_variation(img));
    }
    SUBCASE("sigma must be positive") {
        Image img = noise_image(4, 4, 7);
        CHECK_THROWS_AS(gaussian_blur(img, 0.0f), ParamError);
    }
}

TEST_CASE("solarize") {
    Image px(1, 2);
    px.at(0, 0, 0) = 0.6f;
    px.at(0, 0, 1) = 0.4f;
    Image out = solarize(px, 0.5f);
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.4f));
    CHECK(out.at(0, 0, 1) == 0.4f);

    Image ones(1, 1, 1.0f);
    ones.at(0, 0, 0) = 1.0f;
    Image flipped = solarize(ones, 1.0f);
    CHECK(flipped.at(0, 0, 0) == 0.0f);

    Image below(2, 2, 0.2f);
    Image twice = solarize(solarize(below, 0.5f), 0.5f);
    CHECK(twice.pix == below.pix);

    CHECK_THROWS_AS(solarize(px, 1.5f), ParamError);
}

TEST_CASE("make_multicrop emits 2/2/6 views at the configured resolutions") {
    Image img = noise_image(64, 64, 8);
    AugmentConfig cfg = AugmentConfig::for_resolution(64, 8);
    CHECK(cfg.local_size == 24);
    MultiCropViews views = make_multicrop(img, cfg, 9, 0, 0);
    CHECK(views.bt_views.size() == 2);
    CHECK(views.global_views.size() == 2);
    CHECK(views.local_views.size() == 6);
    for (const Image& v : views.bt_views) CHECK(v.height == 64);
    for (const Image& v : views.global_views) CHECK(v.height == 64);
    for (const Image& v : views.local_views) {
        CHECK(v.height == 24);
        CHECK(v.width == 24);
    }
    for (const Image& v : views.local_views)
        for (float p : v.pix) {
            CHECK(p >= 0.0f);
            CHECK(p <= 1.0f);
        }
}

TEST_CASE("make_multicrop provenance determinism") {
    Image img = noise_image(64, 64, 10);
    AugmentConfig cfg = AugmentConfig::for_resolution(64, 8);
    MultiCropViews a = make_multicrop(img, cfg, 42, 3, 17);
    MultiCropViews b = make_multicrop(img, cfg, 42, 3, 17);
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.bt_views[i].pix == b.bt_views[i].pix);
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.global_views[i].pix == b.global_views[i].pix);
    for (std::size_t i = 0; i < 6; ++i) CHECK(a.local_views[i].pix == b.local_views[i].pix);

    MultiCropViews other_epoch = make_multicrop(img, cfg, 42, 4, 17);
    CHECK(a.bt_views[0].pix != other_epoch.bt_views[0].pix);
}

TEST_CASE("correlation views differ from each other on natural images") {
    AugmentConfig cfg = AugmentConfig::for_resolution(32, 8);
    std::size_t identical = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        Image img = noise_image(48, 48, 1000 + i);
        MultiCropViews v = make_multicrop(img, cfg, 7, 0, i);
        if (v.bt_views[0].pix == v.bt_views[1].pix) ++identical;
    }
    CHECK(identical == 0);
}

TEST_CASE("resize targets the patch grid for the 224 configuration") {
    AugmentConfig cfg224 = AugmentConfig::for_resolution(224, 16);
    CHECK(cfg224.global_size == 224);
    CHECK(cfg224.local_size % 16 == 0);
    CHECK(cfg224.local_size == 96);
}

TEST_CASE("image tensor bridging") {
    Image img = noise_image(5, 7, 11);
    Tensor t = image_to_tensor(img);
    CHECK(t.shape() == Shape{3, 5, 7});
    CHECK(t.data() == img.pix);
    Tensor batch = images_to_tensor({img, img});
    CHECK(batch.shape() == Shape{2, 3, 5, 7});
    CHECK_THROWS_AS(images_to_tensor({}), ParamError);
}
