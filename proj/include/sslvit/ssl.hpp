#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sslvit/tensor.hpp"
#include "sslvit/vit.hpp"

namespace sslvit {

struct LossConfig {
    float lambda_bt = 0.005f;      // off-diagonal weight
    float alpha = 1.0f;            // distillation weight in the hybrid sum
    float bt_scale = 0.01f;        // correlation-loss scale in the hybrid sum
    float tau_s = 0.1f;            // student temperature
    float tau_t = 0.04f;           // teacher temperature (sharper)
    float ema_momentum = 0.996f;   // teacher momentum at the start of training
    float center_momentum = 0.9f;
    std::size_t dino_out_dim = 128;   // K
    std::size_t bt_embed_dim = 128;   // D

    void validate() const;
};

/// 2-layer head mapping backbone embeddings to the correlation space.
struct BtHeadParams {
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;

    static BtHeadParams init(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
                             bool requires_grad = true);
    Tensor forward(const Tensor& x) const;  // [N,in] -> [N,out]
    std::vector<Tensor*> tensors();
    std::vector<std::pair<std::string, Tensor*>> named_tensors(const std::string& prefix);
    BtHeadParams clone_detached() const;
};

/// 3-layer head with an L2-normalized bottleneck feeding the prototype
/// logits; the final projection carries no bias.
struct DinoHeadParams {
    Tensor fc1_w, fc1_b, fc2_w, fc2_b, fc3_w, fc3_b, out_w;

    static DinoHeadParams init(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
                               bool requires_grad = true);
    Tensor forward(const Tensor& x) const;  // [N,in] -> [N,K]
    std::vector<Tensor*> tensors();
    std::vector<std::pair<std::string, Tensor*>> named_tensors(const std::string& prefix);
    DinoHeadParams clone_detached() const;

    static constexpr std::size_t kHidden = 256;
    static constexpr std::size_t kBottleneck = 64;
};

/// C[i][j] = (1/N) sum_n za[n,i] * zb[n,j]; inputs are expected to be
/// column-normalized already.
Tensor cross_correlation(const Tensor& z_a, const Tensor& z_b);

/// sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2
Tensor barlow_twins_loss(const Tensor& c, float lambda_off);

struct DinoDistributions {
    Tensor p_s;  // on the student's graph
    Tensor p_t;  // detached
};

/// p_s = softmax(student/tau_s); p_t = softmax((teacher - center)/tau_t),
/// never part of the gradient graph.
DinoDistributions dino_distributions(const Tensor& student_logits,
                                     const Tensor& teacher_logits, const Tensor& center,
                                     float tau_s, float tau_t);

/// Mean over (teacher view, student view) pairs of the batch-mean
/// cross-entropy -sum_k p_t log p_s. Student views are ordered with the
/// global views first; the pair where the student view is the teacher's own
/// crop is skipped.
Tensor dino_loss(const std::vector<Tensor>& p_s_views, const std::vector<Tensor>& p_t_views);

Tensor hybrid_loss(const Tensor& l_bt, const Tensor& l_dino, const LossConfig& cfg);
float hybrid_loss(float l_bt, float l_dino, const LossConfig& cfg);

/// Teacher/student parameter pairing for the momentum update. Views into the
/// owning model structures; center is the running teacher-logit mean.
struct TeacherStudentPair {
    std::vector<Tensor*> student;
    std::vector<Tensor*> teacher;
    Tensor center;  // [K]
};

/// teacher <- m * teacher + (1 - m) * student, elementwise, in place.
void ema_update(TeacherStudentPair& pair, float momentum);

/// center <- m_c * center + (1 - m_c) * rowmean(teacher_logits)
Tensor update_center(const Tensor& center, const Tensor& teacher_logits_batch,
                     float center_momentum);

}  // namespace sslvit
