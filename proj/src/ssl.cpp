#include "sslvit/ssl.hpp"

#include <cmath>

#include "sslvit/error.hpp"
#include "sslvit/rng.hpp"

namespace sslvit {

void LossConfig::validate() const {
    if (lambda_bt < 0.0f) throw ConfigError("lambda_bt must be >= 0");
    if (alpha < 0.0f) throw ConfigError("alpha must be >= 0");
    if (!(bt_scale > 0.0f)) throw ConfigError("bt_scale must be positive");
    if (!(tau_s > 0.0f) || !(tau_t > 0.0f)) throw ConfigError("temperatures must be positive");
    if (tau_t > tau_s) throw ConfigError("tau_t must not exceed tau_s");
    if (ema_momentum < 0.0f || ema_momentum > 1.0f) throw ConfigError("ema_momentum in [0,1]");
    if (center_momentum < 0.0f || center_momentum > 1.0f) {
        throw ConfigError("center_momentum in [0,1]");
    }
    if (dino_out_dim == 0 || bt_embed_dim == 0) throw ConfigError("head dims must be positive");
}

namespace {

Tensor linear_init(Shape shape, std::size_t fan_in, Rng rng, bool requires_grad) {
    float bound = 1.0f / std::sqrt(float(fan_in));
    std::vector<float> d(numel(shape));
    for (float& v : d) v = rng.uniform_float(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(d), requires_grad);
}

constexpr std::uint64_t kBtHeadSalt = 0x62746864ULL;    // "bthd"
constexpr std::uint64_t kDinoHeadSalt = 0x646e6864ULL;  // "dnhd"

}  // namespace

BtHeadParams BtHeadParams::init(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
                                bool requires_grad) {
    std::size_t hidden = 4 * out_dim;
    BtHeadParams p;
    p.fc1_w = linear_init({in_dim, hidden}, in_dim, Rng::derive({kBtHeadSalt, seed, 0}),
                          requires_grad);
    p.fc1_b = Tensor::zeros({hidden}, requires_grad);
    p.fc2_w = linear_init({hidden, out_dim}, hidden, Rng::derive({kBtHeadSalt, seed, 1}),
                          requires_grad);
    p.fc2_b = Tensor::zeros({out_dim}, requires_grad);
    return p;
}

Tensor BtHeadParams::forward(const Tensor& x) const {
    // hidden activations are batch-normalized before the nonlinearity, which
    // spreads variance across features and gives the off-diagonal penalty
    // something to work with
    Tensor h = gelu(batch_norm_columns(add_rowvec(matmul(x, fc1_w), fc1_b)));
    return add_rowvec(matmul(h, fc2_w), fc2_b);
}

std::vector<Tensor*> BtHeadParams::tensors() { return {&fc1_w, &fc1_b, &fc2_w, &fc2_b}; }

std::vector<std::pair<std::string, Tensor*>> BtHeadParams::named_tensors(
    const std::string& prefix) {
    return {{prefix + ".fc1_w", &fc1_w},
            {prefix + ".fc1_b", &fc1_b},
            {prefix + ".fc2_w", &fc2_w},
            {prefix + ".fc2_b", &fc2_b}};
}

BtHeadParams BtHeadParams::clone_detached() const {
    BtHeadParams copy;
    copy.fc1_w = fc1_w.detach();
    copy.fc1_b = fc1_b.detach();
    copy.fc2_w = fc2_w.detach();
    copy.fc2_b = fc2_b.detach();
    return copy;
}

DinoHeadParams DinoHeadParams::init(std::size_t in_dim, std::size_t out_dim,
                                    std::uint64_t seed, bool requires_grad) {
    DinoHeadParams p;
    p.fc1_w = linear_init({in_dim, kHidden}, in_dim, Rng::derive({kDinoHeadSalt, seed, 0}),
                          requires_grad);
    p.fc1_b = Tensor::zeros({kHidden}, requires_grad);
    p.fc2_w = linear_init({kHidden, kHidden}, kHidden, Rng::derive({kDinoHeadSalt, seed, 1}),
                          requires_grad);
    p.fc2_b = Tensor::zeros({kHidden}, requires_grad);
    p.fc3_w = linear_init({kHidden, kBottleneck}, kHidden,
                          Rng::derive({kDinoHeadSalt, seed, 2}), requires_grad);
    p.fc3_b = Tensor::zeros({kBottleneck}, requires_grad);
    p.out_w = linear_init({kBottleneck, out_dim}, kBottleneck,
                          Rng::derive({kDinoHeadSalt, seed, 3}), requires_grad);
    return p;
}

Tensor DinoHeadParams::forward(const Tensor& x) const {
    Tensor h = gelu(add_rowvec(matmul(x, fc1_w), fc1_b));
    h = gelu(add_rowvec(matmul(h, fc2_w), fc2_b));
    Tensor bottleneck = l2_normalize_rows(add_rowvec(matmul(h, fc3_w), fc3_b));
    // prototype columns kept at unit norm, so logits are cosine similarities
    // and weight decay cannot drive the output scale (and the student's
    // distribution) toward uniform
    Tensor prototypes = transpose(l2_normalize_rows(transpose(out_w)));
    return matmul(bottleneck, prototypes);
}

std::vector<Tensor*> DinoHeadParams::tensors() {
    return {&fc1_w, &fc1_b, &fc2_w, &fc2_b, &fc3_w, &fc3_b, &out_w};
}

std::vector<std::pair<std::string, Tensor*>> DinoHeadParams::named_tensors(
    const std::string& prefix) {
    return {{prefix + ".fc1_w", &fc1_w}, {prefix + ".fc1_b", &fc1_b},
            {prefix + ".fc2_w", &fc2_w}, {prefix + ".fc2_b", &fc2_b},
            {prefix + ".fc3_w", &fc3_w}, {prefix + ".fc3_b", &fc3_b},
            {prefix + ".out_w", &out_w}};
}

DinoHeadParams DinoHeadParams::clone_detached() const {
    DinoHeadParams copy;
    copy.fc1_w = fc1_w.detach();
    copy.fc1_b = fc1_b.detach();
    copy.fc2_w = fc2_w.detach();
    copy.fc2_b = fc2_b.detach();
    copy.fc3_w = fc3_w.detach();
    copy.fc3_b = fc3_b.detach();
    copy.out_w = out_w.detach();
    return copy;
}

Tensor cross_correlation(const Tensor& z_a, const Tensor& z_b) {
    if (z_a.rank() != 2 || z_b.rank() != 2 || z_a.shape() != z_b.shape()) {
        throw ShapeError("cross_correlation: embeddings must share an [N,D] shape, got " +
                         shape_str(z_a.shape()) + " vs " + shape_str(z_b.shape()));
    }
    std::size_t n = z_a.dim(0);
    if (n < 2) throw ParamError("cross_correlation: needs at least 2 rows");
    return mul_scalar(matmul(transpose(z_a), z_b), 1.0f / float(n));
}

Tensor barlow_twins_loss(const Tensor& c, float lambda_off) {
    if (c.rank() != 2 || c.dim(0) != c.dim(1)) {
        throw ShapeError("barlow_twins_loss: expected a square matrix, got " +
                         shape_str(c.shape()));
    }
    std::size_t d = c.dim(0);
    Tensor eye = Tensor::identity(d);
    Tensor off_mask = Tensor::from_data({d, d}, [&] {
        std::vector<float> m(d * d, 1.0f);
        for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 0.0f;
        return m;
    }());
    Tensor diag_err = mul(sub(eye, c), eye);          // (1 - C_ii) on the diagonal
    Tensor invariance = sum_all(mul(diag_err, diag_err));
    Tensor redundancy = sum_all(mul(mul(c, c), off_mask));
    return add(invariance, mul_scalar(redundancy, lambda_off));
}

DinoDistributions dino_distributions(const Tensor& student_logits,
                                     const Tensor& teacher_logits, const Tensor& center,
                                     float tau_s, float tau_t) {
    if (!(tau_s > 0.0f) || !(tau_t > 0.0f)) {
        throw ParamError("dino_distributions: temperatures must be positive");
    }
    if (center.rank() != 1 || teacher_logits.rank() != 2 ||
        teacher_logits.dim(1) != center.dim(0)) {
        throw ShapeError("dino_distributions: center width must match teacher logits");
    }
    DinoDistributions out;
    out.p_s = softmax_temp(student_logits, tau_s);
    Tensor centered = add_rowvec(teacher_logits.detach(), mul_scalar(center, -1.0f).detach());
    out.p_t = softmax_temp(centered, tau_t).detach();
    return out;
}

Tensor dino_loss(const std::vector<Tensor>& p_s_views, const std::vector<Tensor>& p_t_views) {
    if (p_t_views.empty() || p_s_views.size() < 2) {
        throw ParamError("dino_loss: needs at least one teacher and two student views");
    }
    std::vector<Tensor> pair_terms;
    for (std::size_t t = 0; t < p_t_views.size(); ++t) {
        for (std::size_t s = 0; s < p_s_views.size(); ++s) {
            if (s == t) continue;  // student view of the same crop
            // batch-mean cross-entropy for this (teacher, student) pair
            Tensor ce_rows = mul_scalar(sum_axis(mul(p_t_views[t], log(p_s_views[s])), 1), -1.0f);
            pair_terms.push_back(mean_all(reshape(ce_rows, {ce_rows.size(), 1})));
        }
    }
    Tensor total = pair_terms[0];
    for (std::size_t i = 1; i < pair_terms.size(); ++i) total = add(total, pair_terms[i]);
    return mul_scalar(total, 1.0f / float(pair_terms.size()));
}

Tensor hybrid_loss(const Tensor& l_bt, const Tensor& l_dino, const LossConfig& cfg) {
    if (!std::isfinite(l_bt.item()) || !std::isfinite(l_dino.item())) {
        throw NumericError("hybrid_loss: non-finite component");
    }
    return add(mul_scalar(l_bt, cfg.bt_scale), mul_scalar(l_dino, cfg.alpha));
}

float hybrid_loss(float l_bt, float l_dino, const LossConfig& cfg) {
    if (!std::isfinite(l_bt) || !std::isfinite(l_dino)) {
        throw NumericError("hybrid_loss: non-finite component");
    }
    return cfg.bt_scale * l_bt + cfg.alpha * l_dino;
}

void ema_update(TeacherStudentPair& pair, float momentum) {
    if (momentum < 0.0f || momentum > 1.0f) {
        throw ParamError("ema_update: momentum must lie in [0,1]");
    }
    if (pair.student.size() != pair.teacher.size()) {
        throw ShapeError("ema_update: teacher/student tensor lists differ in length");
    }
    for (std::size_t i = 0; i < pair.student.size(); ++i) {
        Tensor* s = pair.student[i];
        Tensor* t = pair.teacher[i];
        if (s->shape() != t->shape()) {
            throw ShapeError("ema_update: shape mismatch at tensor " + std::to_string(i) +
                             ": " + shape_str(s->shape()) + " vs " + shape_str(t->shape()));
        }
        auto& td = t->data();
        const auto& sd = s->data();
        for (std::size_t j = 0; j < td.size(); ++j) {
            td[j] = momentum * td[j] + (1.0f - momentum) * sd[j];
        }
    }
}

Tensor update_center(const Tensor& center, const Tensor& teacher_logits_batch,
                     float center_momentum) {
    if (center_momentum < 0.0f || center_momentum > 1.0f) {
        throw ParamError("update_center: momentum must lie in [0,1]");
    }
    if (teacher_logits_batch.rank() != 2 || teacher_logits_batch.dim(1) != center.dim(0)) {
        throw ShapeError("update_center: logit width must match center");
    }
    std::size_t rows = teacher_logits_batch.dim(0), k = center.dim(0);
    const auto& logits = teacher_logits_batch.data();
    std::vector<float> next(k);
    for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += logits[i * k + j];
        float mean = float(acc / double(rows));
        next[j] = center_momentum * center.data()[j] + (1.0f - center_momentum) * mean;
    }
    return Tensor::from_data({k}, std::move(next));
}

}  // namespace sslvit
