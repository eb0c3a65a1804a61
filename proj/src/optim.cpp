#include "sslvit/optim.hpp"

#include <cmath>

#include "sslvit/error.hpp"

namespace sslvit {

AdamW::AdamW(std::vector<Tensor*> params, float beta1, float beta2, float eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor* p : params_) {
        decay_.push_back(p->rank() >= 2);
        m_.emplace_back(p->size(), 0.0f);
        v_.emplace_back(p->size(), 0.0f);
    }
}

void AdamW::step(float lr, float weight_decay) {
    for (Tensor* p : params_) {
        if (!p->has_grad()) {
            throw StateError("optimizer step with a missing gradient");
        }
    }
    ++steps_;
    float bc1 = 1.0f - std::pow(beta1_, float(steps_));
    float bc2 = 1.0f - std::pow(beta2_, float(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& data = params_[i]->data();
        const auto& grad = params_[i]->grad();
        auto& m = m_[i];
        auto& v = v_[i];
        float wd = decay_[i] ? weight_decay : 0.0f;
        for (std::size_t j = 0; j < data.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0f - beta1_) * grad[j];
            v[j] = beta2_ * v[j] + (1.0f - beta2_) * grad[j] * grad[j];
            float mhat = m[j] / bc1;
            float vhat = v[j] / bc2;
            data[j] -= lr * (mhat / (std::sqrt(vhat) + eps_) + wd * data[j]);
        }
        params_[i]->zero_grad();
    }
}

float lr_schedule(float base_lr, std::size_t step, std::size_t total_steps) {
    std::size_t warmup = (total_steps + 9) / 10;
    if (warmup > 0 && step < warmup) {
        return base_lr * float(step + 1) / float(warmup);
    }
    if (total_steps <= warmup) return base_lr;
    float progress = float(step - warmup) / float(total_steps - warmup);
    return base_lr * 0.5f * (1.0f + std::cos(3.14159265358979f * progress));
}

float ema_momentum_schedule(float base_momentum, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) return base_momentum;
    float progress = float(step) / float(total_steps);
    return 1.0f - (1.0f - base_momentum) * 0.5f * (1.0f + std::cos(3.14159265358979f * progress));
}

float teacher_temp_schedule(float target, std::size_t epoch, std::size_t total_epochs) {
    const float start = 0.04f;
    std::size_t warm = (total_epochs + 9) / 10;
    if (warm == 0 || epoch >= warm) return target;
    return start + (target - start) * float(epoch) / float(warm);
}

}  // namespace sslvit
