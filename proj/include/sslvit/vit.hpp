#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sslvit/rng.hpp"
#include "sslvit/tensor.hpp"

namespace sslvit {

struct ViTConfig {
    std::size_t image_size = 64;
    std::size_t patch_size = 8;
    std::size_t depth = 4;
    std::size_t dim = 64;
    std::size_t heads = 4;
    float mlp_ratio = 4.0f;

    void validate() const;
    std::size_t grid() const { return image_size / patch_size; }
    std::size_t token_count() const { return grid() * grid() + 1; }
    std::size_t head_dim() const { return dim / heads; }
    std::size_t mlp_hidden() const { return std::size_t(mlp_ratio * float(dim)); }
};

struct ViTBlockParams {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;
};

/// Transformer encoder parameters. Positional embeddings are sized for the
/// configured image; smaller or larger token grids are reached by bilinear
/// interpolation over the patch-grid rows.
struct ViTParams {
    ViTConfig cfg;
    Tensor patch_w, patch_b;  // [3p^2, dim], [dim]
    Tensor pos;               // [token_count, dim]
    Tensor cls;               // [1, dim]
    std::vector<ViTBlockParams> blocks;
    Tensor norm_g, norm_b;

    static ViTParams init(const ViTConfig& cfg, std::uint64_t seed, bool requires_grad = true);

    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    std::vector<std::pair<std::string, Tensor*>> named_tensors(const std::string& prefix);

    /// Deep copy; the copy's tensors never require gradients.
    ViTParams clone_detached() const;

    std::size_t parameter_count() const;
};

/// Closed form:
///   patch: (3 p^2 + 1) d
///   pos + cls: (T + 1) d                     with T = (image/p)^2 + 1
///   per block: 4 d^2 + 4d (attention) + 2 d h + d + h (mlp) + 4d (norms)
///   final norm: 2d
std::size_t vit_parameter_count(const ViTConfig& cfg);

/// Splits a [3,H,W] image into flattened patches, raster order, channel-major
/// within each patch. Differentiable.
Tensor patchify(const Tensor& image, std::size_t patch_size);

struct ViTOutput {
    Tensor cls;   // [B, dim], on the graph when params require grad
    Tensor attn;  // [B, heads, T, T] final-block post-softmax attention, detached
};

ViTOutput vit_forward(const ViTParams& params, const Tensor& images);  // [B,3,H,W]

/// [CLS]-query attention row per head, the [CLS]->[CLS] entry dropped,
/// renormalized to sum 1 and reshaped onto the patch grid.
Tensor cls_attention_map(const Tensor& attn, std::size_t grid_h, std::size_t grid_w);

}  // namespace sslvit
