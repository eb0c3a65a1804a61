#pragma once

#include <cstdint>
#include <vector>

#include "sslvit/tensor.hpp"

namespace sslvit {

/// Adaptive-moment optimizer with decoupled weight decay. Gradients are
/// consumed (zeroed) by each step. Decay applies only to matrix-shaped
/// parameters; biases, norm scales and other vectors are exempt.
class AdamW {
public:
    explicit AdamW(std::vector<Tensor*> params, float beta1 = 0.9f, float beta2 = 0.999f,
                   float eps = 1e-8f);

    /// One update. Every parameter must carry a populated gradient.
    void step(float lr, float weight_decay);

    std::size_t steps_taken() const { return steps_; }

private:
    std::vector<Tensor*> params_;
    std::vector<bool> decay_;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
    float beta1_, beta2_, eps_;
    std::size_t steps_ = 0;
};

// Training-policy schedules.

/// Linear warmup over the first tenth of training, cosine decay to zero after.
float lr_schedule(float base_lr, std::size_t step, std::size_t total_steps);

/// Cosine ramp of the teacher momentum from its configured base to 1.
float ema_momentum_schedule(float base_momentum, std::size_t step, std::size_t total_steps);

/// Teacher temperature warmed linearly from 0.04 to its configured value
/// across the first tenth of the epochs.
float teacher_temp_schedule(float target, std::size_t epoch, std::size_t total_epochs);

}  // namespace sslvit
