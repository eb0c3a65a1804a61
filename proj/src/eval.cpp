#include "sslvit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sslvit/error.hpp"
#include "sslvit/rng.hpp"

namespace sslvit {

std::size_t FeatureSet::num_classes() const {
    std::set<int> seen(labels.begin(), labels.end());
    if (seen.empty()) return 0;
    if (*seen.begin() < 0) throw ParamError("negative class label");
    return std::size_t(*seen.rbegin()) + 1;
}

Tensor LinearHead::logits(const Tensor& features) const {
    return add_rowvec(matmul(features, w), b);
}

FeatureSet extract_features(const ViTParams& backbone, const std::vector<Image>& images,
                            const std::vector<int>& labels) {
    if (!labels.empty() && labels.size() != images.size()) {
        throw ParamError("extract_features: label count does not match image count");
    }
    std::size_t res = backbone.cfg.image_size;
    std::vector<Image> batch;
    batch.reserve(images.size());
    for (const Image& img : images) {
        batch.push_back((img.height == res && img.width == res) ? img
                                                                : resize_bilinear(img, res, res));
    }
    FeatureSet out;
    out.features = vit_forward(backbone, images_to_tensor(batch)).cls.detach();
    out.labels = labels.empty() ? std::vector<int>(images.size(), 0) : labels;
    return out;
}

std::vector<std::size_t> stratified_subsample(const std::vector<int>& labels, float fraction,
                                              std::uint64_t seed) {
    if (!(fraction > 0.0f) || fraction > 1.0f) {
        throw ParamError("fraction must lie in (0, 1]");
    }
    int max_label = 0;
    for (int l : labels) max_label = std::max(max_label, l);
    std::vector<std::vector<std::size_t>> per_class(std::size_t(max_label) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) per_class[std::size_t(labels[i])].push_back(i);

    std::vector<std::size_t> picked;
    Rng rng = Rng::derive({0x73747261ULL, seed});  // "stra"
    for (std::size_t cls = 0; cls < per_class.size(); ++cls) {
        auto& pool = per_class[cls];
        if (pool.empty()) {
            throw ParamError("class " + std::to_string(cls) + " absent before subsampling");
        }
        // ceil with a relative guard so float fractions like 0.1 hit their
        // mathematical boundary instead of rounding up past it
        double want = double(fraction) * double(pool.size());
        std::size_t take = std::size_t(std::ceil(want - std::max(1e-9, want * 1e-6)));
        take = std::min(std::max<std::size_t>(take, 1), pool.size());
        if (take == 0) {
            throw ParamError("class " + std::to_string(cls) + " absent after subsampling");
        }
        for (std::size_t i = pool.size(); i > 1; --i) {
            std::size_t j = rng.uniform_index(i);
            std::swap(pool[i - 1], pool[j]);
        }
        picked.insert(picked.end(), pool.begin(), pool.begin() + take);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

LinearHead train_probe(const FeatureSet& train, float fraction, std::size_t epochs, float lr,
                       std::uint64_t seed) {
    if (train.count() == 0) throw ParamError("train_probe: empty feature set");
    std::vector<std::size_t> subset = stratified_subsample(train.labels, fraction, seed);
    std::size_t dim = train.features.dim(1);
    std::size_t classes = train.num_classes();
    if (classes < 2) throw ParamError("train_probe: needs at least two classes");

    Tensor x = gather_rows(train.features, subset).detach();
    std::vector<float> onehot(subset.size() * classes, 0.0f);
    for (std::size_t i = 0; i < subset.size(); ++i) {
        onehot[i * classes + std::size_t(train.labels[subset[i]])] = 1.0f;
    }
    Tensor y = Tensor::from_data({subset.size(), classes}, std::move(onehot));

    LinearHead head;
    head.w = Tensor::zeros({dim, classes}, true);
    head.b = Tensor::zeros({classes}, true);

    // full-batch gradient descent with momentum on the softmax cross-entropy
    const float momentum = 0.9f;
    std::vector<float> vw(head.w.size(), 0.0f);
    std::vector<float> vb(head.b.size(), 0.0f);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        Tensor p = softmax_temp(head.logits(x), 1.0f);
        Tensor loss = mul_scalar(mean_all(sum_axis(mul(y, log(p)), 1)), -1.0f);
        backward(loss);
        auto apply = [&](Tensor& t, std::vector<float>& vel) {
            const auto& g = t.grad();
            auto& d = t.data();
            for (std::size_t i = 0; i < d.size(); ++i) {
                vel[i] = momentum * vel[i] + g[i];
                d[i] -= lr * vel[i];
            }
            t.zero_grad();
        };
        apply(head.w, vw);
        apply(head.b, vb);
    }
    return head;
}

ProbeResult evaluate_probe(const LinearHead& head, const FeatureSet& data) {
    Tensor logits = head.logits(data.features).detach();
    Tensor p = softmax_temp(logits, 1.0f);
    std::size_t classes = logits.dim(1);

    double nll = 0.0;
    for (std::size_t i = 0; i < data.count(); ++i) {
        nll -= std::log(std::max(double(p.at({i, std::size_t(data.labels[i])})), 1e-12));
    }
    ProbeResult res;
    res.loss = float(nll / double(data.count()));
    res.acc1 = topk_accuracy(logits, data.labels, 1);
    res.acc5 = topk_accuracy(logits, data.labels, std::min<std::size_t>(5, classes));
    if (res.acc1 > res.acc5) throw NumericError("acc@1 exceeded acc@5");
    return res;
}

float topk_accuracy(const Tensor& logits, const std::vector<int>& labels, std::size_t k) {
    if (logits.rank() != 2) throw ShapeError("topk_accuracy: logits must be [M, classes]");
    std::size_t m = logits.dim(0), classes = logits.dim(1);
    if (labels.size() != m) throw ShapeError("topk_accuracy: label count mismatch");
    if (k == 0 || k > classes) {
        throw ParamError("topk_accuracy: k must lie in [1, num_classes]");
    }
    std::size_t hits = 0;
    std::vector<std::size_t> idx(classes);
    for (std::size_t i = 0; i < m; ++i) {
        std::iota(idx.begin(), idx.end(), 0);
        const float* row = logits.data().data() + i * classes;
        std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(k), idx.end(),
                          [&](std::size_t a, std::size_t b) {
                              if (row[a] != row[b]) return row[a] > row[b];
                              return a < b;
                          });
        for (std::size_t j = 0; j < k; ++j) {
            if (int(idx[j]) == labels[i]) {
                ++hits;
                break;
            }
        }
    }
    return float(double(hits) / double(m));
}

Tensor random_projection_2d(const Tensor& features, std::uint64_t seed) {
    if (features.rank() != 2 || features.dim(1) < 2) {
        throw ShapeError("random_projection_2d: features must be [M, dim>=2]");
    }
    std::size_t dim = features.dim(1);
    Rng rng = Rng::derive({0x70726f6aULL, seed});  // "proj"
    std::vector<float> g(dim * 2);
    float scale = 1.0f / std::sqrt(float(dim));
    for (float& v : g) v = rng.normal_float(scale);
    return matmul(features, Tensor::from_data({dim, 2}, std::move(g))).detach();
}

}  // namespace sslvit
