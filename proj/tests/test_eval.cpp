#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sslvit/error.hpp"
#include "sslvit/eval.hpp"
#include "sslvit/rng.hpp"
#include "sslvit/synthetic.hpp"

using namespace sslvit;

namespace {

ViTParams small_backbone(std::uint64_t seed) {
    ViTConfig cfg;
    cfg.image_size = 16;
    cfg.patch_size = 8;
    cfg.depth = 1;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.mlp_ratio = 2.0f;
    return ViTParams::init(cfg, seed, /*requires_grad=*/false);
}

// linearly separable 2-class blobs with a wide margin
FeatureSet separable_features(std::size_t per_class, std::size_t dim, std::uint64_t seed) {
    Rng rng = Rng::derive({0xFEA7, seed});
    std::vector<float> data;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        int cls = int(i % 2);
        for (std::size_t j = 0; j < dim; ++j) {
            float center = (j == 0) ? (cls == 0 ? -4.0f : 4.0f) : 0.0f;
            data.push_back(center + rng.normal_float(0.25f));
        }
        labels.push_back(cls);
    }
    FeatureSet fs;
    fs.features = Tensor::from_data({2 * per_class, dim}, std::move(data));
    fs.labels = std::move(labels);
    return fs;
}

}  // namespace

TEST_CASE("extract_features basics") {
    ViTParams backbone = small_backbone(1);
    std::vector<int> labels;
    std::vector<Image> images = make_shape_corpus(6, 16, 2, &labels);

    FeatureSet fs = extract_features(backbone, images, labels);
    CHECK(fs.features.shape() == Shape{6, 16});
    CHECK(fs.num_classes() == 6);  // labels 0..5 from the cycling corpus
    CHECK_FALSE(fs.features.requires_grad());

    // identical images produce identical rows
    FeatureSet twice = extract_features(backbone, {images[0], images[0]}, {0, 0});
    for (std::size_t j = 0; j < 16; ++j)
        CHECK(twice.features.at({0, j}) == twice.features.at({1, j}));

    // off-resolution input is resized, not rejected
    FeatureSet resized = extract_features(backbone, make_shape_corpus(2, 24, 3), {1, 0});
    CHECK(resized.features.shape() == Shape{2, 16});
}

TEST_CASE("stratified_subsample") {
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) labels.push_back(i % 10);

    auto picked = stratified_subsample(labels, 0.1f, 7);
    CHECK(picked.size() == 10);  // ceil(0.1 * 10) per class
    std::vector<int> per_class(10, 0);
    for (std::size_t i : picked) ++per_class[labels[i]];
    for (int c : per_class) CHECK(c == 1);

    CHECK(stratified_subsample(labels, 1.0f, 7).size() == 100);
    CHECK_THROWS_AS(stratified_subsample(labels, 0.0f, 7), ParamError);
    CHECK_THROWS_AS(stratified_subsample(labels, 1.5f, 7), ParamError);

    std::vector<int> missing = {0, 0, 2, 2};  // class 1 absent
    CHECK_THROWS_AS(stratified_subsample(missing, 0.5f, 7), ParamError);

    // determinism
    CHECK(stratified_subsample(labels, 0.3f, 9) == stratified_subsample(labels, 0.3f, 9));
}

TEST_CASE("probe separates wide-margin classes perfectly") {
    FeatureSet fs = separable_features(20, 8, 1);
    LinearHead head = train_probe(fs, 1.0f, 100, 0.01f, 1);
    ProbeResult res = evaluate_probe(head, fs);
    CHECK(res.acc1 == 1.0f);
    CHECK(res.acc5 == 1.0f);
    CHECK(res.loss < 0.7f);
}

TEST_CASE("probe on label-shuffled features stays near chance") {
    std::size_t n = 1000, dim = 16, classes = 10;
    Rng rng = Rng::derive({0xC0FFEE});
    std::vector<float> data(n * dim);
    for (float& v : data) v = rng.normal_float(1.0f);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = int(rng.uniform_index(classes));

    FeatureSet fs;
    fs.features = Tensor::from_data({n, dim}, std::move(data));
    fs.labels = std::move(labels);
    LinearHead head = train_probe(fs, 1.0f, 100, 0.01f, 2);
    ProbeResult res = evaluate_probe(head, fs);
    CHECK(std::abs(res.acc1 - 0.1f) < 0.1f);
}

TEST_CASE("probe determinism and frozen features") {
    FeatureSet fs = separable_features(10, 6, 4);
    std::vector<float> before = fs.features.data();
    LinearHead a = train_probe(fs, 0.5f, 50, 0.01f, 3);
    LinearHead b = train_probe(fs, 0.5f, 50, 0.01f, 3);
    CHECK(a.w.data() == b.w.data());
    CHECK(a.b.data() == b.b.data());
    CHECK(fs.features.data() == before);

    ProbeResult ra = evaluate_probe(a, fs);
    ProbeResult rb = evaluate_probe(b, fs);
    CHECK(ra.acc1 == rb.acc1);
    CHECK(ra.loss == rb.loss);
}

TEST_CASE("topk_accuracy") {
    // logits one-hot at the label
    Tensor onehot = Tensor::from_data({2, 4}, {0, 0, 1, 0, 1, 0, 0, 0});
    CHECK(topk_accuracy(onehot, {2, 0}, 1) == 1.0f);
    CHECK(topk_accuracy(onehot, {2, 0}, 4) == 1.0f);

    // 3 rows, exactly 2 with the label in the top-1
    Tensor logits = Tensor::from_data({3, 3}, {5, 1, 0,   // label 0, hit
                                               0, 3, 9,   // label 2, hit
                                               7, 2, 4}); // label 1, miss
    CHECK(topk_accuracy(logits, {0, 2, 1}, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(topk_accuracy(logits, {0, 2, 1}, 3) == 1.0f);

    // ties break toward the lower class index
    Tensor tie = Tensor::from_data({1, 3}, {0.5f, 0.5f, 0.5f});
    CHECK(topk_accuracy(tie, {0}, 1) == 1.0f);
    CHECK(topk_accuracy(tie, {2}, 1) == 0.0f);

    CHECK_THROWS_AS(topk_accuracy(tie, {0}, 0), ParamError);
    CHECK_THROWS_AS(topk_accuracy(tie, {0}, 4), ParamError);
}

TEST_CASE("random_projection_2d") {
    Rng rng = Rng::derive({0xAB});
    std::vector<float> data(100 * 16);
    for (float& v : data) v = rng.normal_float(1.0f);
    Tensor feats = Tensor::from_data({100, 16}, data);

    Tensor p1 = random_projection_2d(feats, 5);
    Tensor p2 = random_projection_2d(feats, 5);
    CHECK(p1.data() == p2.data());
    CHECK(p1.shape() == Shape{100, 2});

    Tensor zeros = random_projection_2d(Tensor::zeros({4, 16}), 5);
    for (float v : zeros.data()) CHECK(v == 0.0f);

    // pairwise distance correlation against the brute-force original
    auto dist = [](const Tensor& t, std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t c = 0; c < t.dim(1); ++c) {
            double d = double(t.at({i, c})) - double(t.at({j, c}));
            s += d * d;
        }
        return std::sqrt(s);
    };
    std::vector<double> orig, proj;
    for (std::size_t i = 0; i < 100; ++i)
        for (std::size_t j = i + 1; j < 100; ++j) {
            orig.push_back(dist(feats, i, j));
            proj.push_back(dist(p1, i, j));
        }
    double mo = 0, mp = 0;
    for (std::size_t i = 0; i < orig.size(); ++i) {
        mo += orig[i];
        mp += proj[i];
    }
    mo /= double(orig.size());
    mp /= double(proj.size());
    double cov = 0, vo = 0, vp = 0;
    for (std::size_t i = 0; i < orig.size(); ++i) {
        cov += (orig[i] - mo) * (proj[i] - mp);
        vo += (orig[i] - mo) * (orig[i] - mo);
        vp += (proj[i] - mp) * (proj[i] - mp);
    }
    double corr = cov / std::sqrt(vo * vp);
    CHECK(corr > 0.3);
}

TEST_CASE("probe separates black from white through a random backbone") {
    ViTParams backbone = small_backbone(9);
    std::vector<int> labels;
    std::vector<Image> images = make_bw_corpus(20, 16, &labels);
    FeatureSet fs = extract_features(backbone, images, labels);
    LinearHead head = train_probe(fs, 1.0f, 100, 0.01f, 1);
    CHECK(evaluate_probe(head, fs).acc1 == 1.0f);
}
