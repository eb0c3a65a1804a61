#pragma once

#include <cstdint>
#include <vector>

#include "sslvit/augment.hpp"
#include "sslvit/tensor.hpp"
#include "sslvit/vit.hpp"

namespace sslvit {

struct FeatureSet {
    Tensor features;          // [M, dim], plain data
    std::vector<int> labels;  // class ids in [0, num_classes)

    std::size_t count() const { return labels.size(); }
    std::size_t num_classes() const;
};

struct ProbeResult {
    float loss = 0.0f;
    float acc1 = 0.0f;
    float acc5 = 0.0f;
};

struct LinearHead {
    Tensor w;  // [dim, num_classes]
    Tensor b;  // [num_classes]

    Tensor logits(const Tensor& features) const;
};

/// Frozen-backbone [CLS] features. Images not matching the configured
/// resolution are bilinearly resized to it first.
FeatureSet extract_features(const ViTParams& backbone, const std::vector<Image>& images,
                            const std::vector<int>& labels);

/// Class-stratified index subsample: ceil(fraction * n_c) per class.
std::vector<std::size_t> stratified_subsample(const std::vector<int>& labels, float fraction,
                                              std::uint64_t seed);

/// Softmax-regression probe on frozen features, plain gradient descent with
/// momentum. The feature tensor is never modified.
LinearHead train_probe(const FeatureSet& train, float fraction, std::size_t epochs, float lr,
                       std::uint64_t seed);

ProbeResult evaluate_probe(const LinearHead& head, const FeatureSet& data);

/// Fraction of rows whose label ranks among the k largest logits; ties break
/// toward the lower class index.
float topk_accuracy(const Tensor& logits, const std::vector<int>& labels, std::size_t k);

/// features x G, G[dim,2] Gaussian from the seed, scaled by 1/sqrt(dim).
Tensor random_projection_2d(const Tensor& features, std::uint64_t seed);

}  // namespace sslvit
