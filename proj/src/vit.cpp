#include "sslvit/vit.hpp"

#include <cmath>

#include "sslvit/error.hpp"

namespace sslvit {

void ViTConfig::validate() const {
    if (image_size == 0 || patch_size == 0 || depth == 0 || dim == 0 || heads == 0) {
        throw ConfigError("vit config fields must be positive");
    }
    if (image_size % patch_size != 0) {
        throw ConfigError("image_size " + std::to_string(image_size) +
                          " not divisible by patch_size " + std::to_string(patch_size));
    }
    if (dim % heads != 0) {
        throw ConfigError("dim " + std::to_string(dim) + " not divisible by heads " +
                          std::to_string(heads));
    }
    if (!(mlp_ratio > 0.0f)) throw ConfigError("mlp_ratio must be positive");
}

namespace {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng rng, bool requires_grad) {
    float bound = 1.0f / std::sqrt(float(fan_in));
    std::vector<float> d(numel(shape));
    for (float& v : d) v = rng.uniform_float(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

Tensor init_gaussian(Shape shape, float sigma, Rng rng, bool requires_grad) {
    std::vector<float> d(numel(shape));
    for (float& v : d) v = rng.normal_float(sigma);
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

constexpr std::uint64_t kInitSalt = 0x696e6974ULL;  // "init"

}  // namespace

ViTParams ViTParams::init(const ViTConfig& cfg, std::uint64_t seed, bool requires_grad) {
    cfg.validate();
    ViTParams p;
    p.cfg = cfg;
    std::size_t d = cfg.dim;
    std::size_t hdim = cfg.mlp_hidden();
    std::size_t patch_in = 3 * cfg.patch_size * cfg.patch_size;
    std::uint64_t ordinal = 0;
    auto stream = [&] { return Rng::derive({kInitSalt, seed, ordinal++}); };

    p.patch_w = init_uniform({patch_in, d}, patch_in, stream(), requires_grad);
    p.patch_b = Tensor::zeros({d}, requires_grad);
    p.pos = init_gaussian({cfg.token_count(), d}, 0.02f, stream(), requires_grad);
    p.cls = init_gaussian({1, d}, 0.02f, stream(), requires_grad);
    for (std::size_t i = 0; i < cfg.depth; ++i) {
        ViTBlockParams b;
        b.ln1_g = Tensor::full({d}, 1.0f, requires_grad);
        b.ln1_b = Tensor::zeros({d}, requires_grad);
        b.wq = init_uniform({d, d}, d, stream(), requires_grad);
        b.bq = Tensor::zeros({d}, requires_grad);
        b.wk = init_uniform({d, d}, d, stream(), requires_grad);
        b.bk = Tensor::zeros({d}, requires_grad);
        b.wv = init_uniform({d, d}, d, stream(), requires_grad);
        b.bv = Tensor::zeros({d}, requires_grad);
        b.wo = init_uniform({d, d}, d, stream(), requires_grad);
        b.bo = Tensor::zeros({d}, requires_grad);
        b.ln2_g = Tensor::full({d}, 1.0f, requires_grad);
        b.ln2_b = Tensor::zeros({d}, requires_grad);
        b.fc1_w = init_uniform({d, hdim}, d, stream(), requires_grad);
        b.fc1_b = Tensor::zeros({hdim}, requires_grad);
        b.fc2_w = init_uniform({hdim, d}, hdim, stream(), requires_grad);
        b.fc2_b = Tensor::zeros({d}, requires_grad);
        p.blocks.push_back(std::move(b));
    }
    p.norm_g = Tensor::full({d}, 1.0f, requires_grad);
    p.norm_b = Tensor::zeros({d}, requires_grad);
    return p;
}

std::vector<Tensor*> ViTParams::tensors() {
    std::vector<Tensor*> out = {&patch_w, &patch_b, &pos, &cls};
    for (ViTBlockParams& b : blocks) {
        for (Tensor* t : {&b.ln1_g, &b.ln1_b, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv,
                          &b.wo, &b.bo, &b.ln2_g, &b.ln2_b, &b.fc1_w, &b.fc1_b, &b.fc2_w,
                          &b.fc2_b}) {
            out.push_back(t);
        }
    }
    out.push_back(&norm_g);
    out.push_back(&norm_b);
    return out;
}

std::vector<const Tensor*> ViTParams::tensors() const {
    auto mutable_list = const_cast<ViTParams*>(this)->tensors();
    return {mutable_list.begin(), mutable_list.end()};
}

std::vector<std::pair<std::string, Tensor*>> ViTParams::named_tensors(const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor*>> out = {
        {prefix + ".patch_w", &patch_w},
        {prefix + ".patch_b", &patch_b},
        {prefix + ".pos", &pos},
        {prefix + ".cls", &cls},
    };
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        ViTBlockParams& b = blocks[i];
        std::string bp = prefix + ".block" + std::to_string(i);
        out.emplace_back(bp + ".ln1_g", &b.ln1_g);
        out.emplace_back(bp + ".ln1_b", &b.ln1_b);
        out.emplace_back(bp + ".wq", &b.wq);
        out.emplace_back(bp + ".bq", &b.bq);
        out.emplace_back(bp + ".wk", &b.wk);
        out.emplace_back(bp + ".bk", &b.bk);
        out.emplace_back(bp + ".wv", &b.wv);
        out.emplace_back(bp + ".bv", &b.bv);
        out.emplace_back(bp + ".wo", &b.wo);
        out.emplace_back(bp + ".bo", &b.bo);
        out.emplace_back(bp + ".ln2_g", &b.ln2_g);
        out.emplace_back(bp + ".ln2_b", &b.ln2_b);
        out.emplace_back(bp + ".fc1_w", &b.fc1_w);
        out.emplace_back(bp + ".fc1_b", &b.fc1_b);
        out.emplace_back(bp + ".fc2_w", &b.fc2_w);
        out.emplace_back(bp + ".fc2_b", &b.fc2_b);
    }
    out.emplace_back(prefix + ".norm_g", &norm_g);
    out.emplace_back(prefix + ".norm_b", &norm_b);
    return out;
}

ViTParams ViTParams::clone_detached() const {
    ViTParams copy;
    copy.cfg = cfg;
    copy.blocks.resize(blocks.size());
    auto src = const_cast<ViTParams*>(this)->tensors();
    auto dst = copy.tensors();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->detach();
    return copy;
}

std::size_t ViTParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : tensors()) n += t->size();
    return n;
}

std::size_t vit_parameter_count(const ViTConfig& cfg) {
    std::size_t d = cfg.dim;
    std::size_t h = cfg.mlp_hidden();
    std::size_t patch = (3 * cfg.patch_size * cfg.patch_size + 1) * d;
    std::size_t embed = (cfg.token_count() + 1) * d;
    std::size_t block = 4 * d * d + 4 * d + 2 * d * h + d + h + 4 * d;
    return patch + embed + cfg.depth * block + 2 * d;
}

Tensor patchify(const Tensor& image, std::size_t patch_size) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("patchify: expected [3,H,W], got " + shape_str(image.shape()));
    }
    std::size_t h = image.dim(1), w = image.dim(2);
    if (patch_size == 0 || h % patch_size != 0 || w % patch_size != 0) {
        throw ShapeError("patchify: " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by patch size " + std::to_string(patch_size));
    }
    std::size_t gh = h / patch_size, gw = w / patch_size;
    std::size_t p = patch_size;
    std::size_t cols = 3 * p * p;
    std::vector<std::size_t> map(gh * gw * cols);
    std::size_t out = 0;
    for (std::size_t py = 0; py < gh; ++py)
        for (std::size_t px = 0; px < gw; ++px)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t dy = 0; dy < p; ++dy)
                    for (std::size_t dx = 0; dx < p; ++dx)
                        map[out++] = (c * h + py * p + dy) * w + px * p + dx;
    return gather_flat(image, {gh * gw, cols}, std::move(map));
}

namespace {

// Bilinear interpolation matrix from a g0 x g0 patch grid onto gh x gw,
// applied to the positional rows by matmul so gradients reach them.
Tensor pos_interp_matrix(std::size_t g0, std::size_t gh, std::size_t gw) {
    std::vector<float> m(gh * gw * g0 * g0, 0.0f);
    for (std::size_t ty = 0; ty < gh; ++ty) {
        float fy = (float(ty) + 0.5f) * float(g0) / float(gh) - 0.5f;
        long y0 = long(std::floor(fy));
        float wy = fy - float(y0);
        long y0c = std::clamp(y0, 0L, long(g0) - 1);
        long y1c = std::clamp(y0 + 1, 0L, long(g0) - 1);
        for (std::size_t tx = 0; tx < gw; ++tx) {
            float fx = (float(tx) + 0.5f) * float(g0) / float(gw) - 0.5f;
            long x0 = long(std::floor(fx));
            float wx = fx - float(x0);
            long x0c = std::clamp(x0, 0L, long(g0) - 1);
            long x1c = std::clamp(x0 + 1, 0L, long(g0) - 1);
            float* row = m.data() + (ty * gw + tx) * g0 * g0;
            row[std::size_t(y0c) * g0 + std::size_t(x0c)] += (1 - wy) * (1 - wx);
            row[std::size_t(y0c) * g0 + std::size_t(x1c)] += (1 - wy) * wx;
            row[std::size_t(y1c) * g0 + std::size_t(x0c)] += wy * (1 - wx);
            row[std::size_t(y1c) * g0 + std::size_t(x1c)] += wy * wx;
        }
    }
    return Tensor::from_data({gh * gw, g0 * g0}, std::move(m));
}

Tensor positional_for_grid(const ViTParams& params, std::size_t gh, std::size_t gw) {
    std::size_t g0 = params.cfg.grid();
    if (gh == g0 && gw == g0) return params.pos;
    Tensor cls_row = slice_rows(params.pos, 0, 1);
    Tensor patch_rows = slice_rows(params.pos, 1, params.cfg.token_count());
    Tensor interp = matmul(pos_interp_matrix(g0, gh, gw), patch_rows);
    return concat_rows({cls_row, interp});
}

struct TokenForward {
    Tensor cls;                      // [1, dim]
    std::vector<Tensor> last_attn;   // per head [T, T]
};

TokenForward forward_tokens(const ViTParams& params, const Tensor& image) {
    const ViTConfig& cfg = params.cfg;
    std::size_t gh = image.dim(1) / cfg.patch_size;
    std::size_t gw = image.dim(2) / cfg.patch_size;

    Tensor x = matmul(patchify(image, cfg.patch_size), params.patch_w);
    x = add_rowvec(x, params.patch_b);
    x = concat_rows({params.cls, x});
    x = add(x, positional_for_grid(params, gh, gw));

    float scale = 1.0f / std::sqrt(float(cfg.head_dim()));
    TokenForward out;
    for (std::size_t bi = 0; bi < params.blocks.size(); ++bi) {
        const ViTBlockParams& b = params.blocks[bi];
        Tensor h = layer_norm(x, b.ln1_g, b.ln1_b);
        Tensor q = add_rowvec(matmul(h, b.wq), b.bq);
        Tensor k = add_rowvec(matmul(h, b.wk), b.bk);
        Tensor v = add_rowvec(matmul(h, b.wv), b.bv);

        std::vector<Tensor> head_out;
        std::vector<Tensor> head_attn;
        for (std::size_t hi = 0; hi < cfg.heads; ++hi) {
            std::size_t c0 = hi * cfg.head_dim(), c1 = c0 + cfg.head_dim();
            Tensor qh = slice_cols(q, c0, c1);
            Tensor kh = slice_cols(k, c0, c1);
            Tensor vh = slice_cols(v, c0, c1);
            Tensor attn = softmax_temp(mul_scalar(matmul(qh, transpose(kh)), scale), 1.0f);
            head_attn.push_back(attn);
            head_out.push_back(matmul(attn, vh));
        }
        Tensor o = add_rowvec(matmul(concat_cols(head_out), b.wo), b.bo);
        x = add(x, o);

        Tensor h2 = layer_norm(x, b.ln2_g, b.ln2_b);
        Tensor mlp = add_rowvec(matmul(gelu(add_rowvec(matmul(h2, b.fc1_w), b.fc1_b)), b.fc2_w),
                                b.fc2_b);
        x = add(x, mlp);

        if (bi + 1 == params.blocks.size()) out.last_attn = std::move(head_attn);
    }
    Tensor final = layer_norm(x, params.norm_g, params.norm_b);
    out.cls = slice_rows(final, 0, 1);
    return out;
}

}  // namespace

ViTOutput vit_forward(const ViTParams& params, const Tensor& images) {
    if (images.rank() != 4 || images.dim(1) != 3) {
        throw ShapeError("vit_forward: expected [B,3,H,W], got " + shape_str(images.shape()));
    }
    std::size_t batch = images.dim(0), h = images.dim(2), w = images.dim(3);
    if (h % params.cfg.patch_size != 0 || w % params.cfg.patch_size != 0) {
        throw ConfigError("vit_forward: resolution " + std::to_string(h) + "x" +
                          std::to_string(w) + " is not a multiple of patch size " +
                          std::to_string(params.cfg.patch_size));
    }
    std::size_t tokens = (h / params.cfg.patch_size) * (w / params.cfg.patch_size) + 1;
    std::size_t heads = params.cfg.heads;

    Tensor flat = reshape(images, {batch, 3 * h * w});
    std::vector<Tensor> cls_rows;
    std::vector<float> attn_data(batch * heads * tokens * tokens);
    for (std::size_t b = 0; b < batch; ++b) {
        Tensor image = reshape(slice_rows(flat, b, b + 1), {3, h, w});
        TokenForward tf = forward_tokens(params, image);
        cls_rows.push_back(tf.cls);
        for (std::size_t hi = 0; hi < heads; ++hi) {
            const auto& a = tf.last_attn[hi].data();
            std::copy(a.begin(), a.end(),
                      attn_data.begin() + ((b * heads + hi) * tokens * tokens));
        }
    }
    ViTOutput out;
    out.cls = concat_rows(cls_rows);
    out.attn = Tensor::from_data({batch, heads, tokens, tokens}, std::move(attn_data));
    return out;
}

Tensor cls_attention_map(const Tensor& attn, std::size_t grid_h, std::size_t grid_w) {
    if (attn.rank() != 4) {
        throw ShapeError("cls_attention_map: expected [B,heads,T,T], got " +
                         shape_str(attn.shape()));
    }
    std::size_t batch = attn.dim(0), heads = attn.dim(1), tokens = attn.dim(2);
    if (attn.dim(3) != tokens || tokens != grid_h * grid_w + 1) {
        throw ShapeError("cls_attention_map: token count " + std::to_string(tokens) +
                         " does not match grid " + std::to_string(grid_h) + "x" +
                         std::to_string(grid_w));
    }
    std::vector<float> out(batch * heads * grid_h * grid_w);
    const auto& a = attn.data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t hi = 0; hi < heads; ++hi) {
            const float* row = a.data() + ((b * heads + hi) * tokens) * tokens;  // CLS query row
            double sum = 0.0;
            for (std::size_t t = 1; t < tokens; ++t) sum += row[t];
            float inv = sum > 0.0 ? float(1.0 / sum) : 0.0f;
            float* dst = out.data() + (b * heads + hi) * grid_h * grid_w;
            for (std::size_t t = 1; t < tokens; ++t) dst[t - 1] = row[t] * inv;
        }
    return Tensor::from_data({batch, heads, grid_h, grid_w}, std::move(out));
}

}  // namespace sslvit
