#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sslvit/augment.hpp"
#include "sslvit/config.hpp"
#include "sslvit/model.hpp"
#include "sslvit/optim.hpp"

namespace sslvit {

struct LossRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;  // global step index
    float loss_total = 0.0f;
    std::optional<float> loss_bt;
    std::optional<float> loss_dino;
    std::int64_t ms = 0;
};

/// One batch: the per-image multi-crop view sets.
using MultiCropBatch = std::vector<MultiCropViews>;

class Trainer {
public:
    Trainer(const TrainConfig& cfg, std::vector<Image> dataset);

    /// One optimizer update (plus teacher/center updates for distillation
    /// methods). Aborts with NumericError when the loss goes non-finite.
    LossRecord train_step(const MultiCropBatch& batch);

    /// Full run: epochs * ceil(n / batch_size) steps.
    std::vector<LossRecord> run();

    /// View batch for one epoch position, regenerated deterministically.
    MultiCropBatch make_batch(std::size_t epoch, const std::vector<std::size_t>& indices) const;

    /// Deterministic epoch ordering of dataset indices.
    std::vector<std::size_t> epoch_order(std::size_t epoch) const;

    Checkpoint checkpoint();

    const TrainConfig& config() const { return cfg_; }
    Model& student() { return student_; }
    const std::optional<TeacherState>& teacher() const { return teacher_; }
    std::optional<TeacherState>& teacher() { return teacher_; }
    std::size_t steps_done() const { return step_; }
    std::size_t total_steps() const { return total_steps_; }

    // Schedule values as used at a given global step / epoch.
    float lr_at(std::size_t step) const;
    float ema_momentum_at(std::size_t step) const;
    float teacher_temp_at(std::size_t epoch) const;

    /// Teacher prototype logits for a view batch, as used for distribution
    /// sharpening and the center update.
    Tensor teacher_logits(const std::vector<Image>& views) const;

private:
    TrainConfig cfg_;
    std::vector<Image> dataset_;
    AugmentConfig aug_;
    Model student_;
    std::optional<TeacherState> teacher_;
    AdamW opt_;
    std::size_t step_ = 0;
    std::size_t total_steps_ = 0;
    std::size_t steps_per_epoch_ = 0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<LossRecord> log;
};

/// Loads the dataset named by the config, trains, and returns the final
/// checkpoint plus the per-step loss log.
TrainResult train(const TrainConfig& cfg);

void write_loss_csv(const std::vector<LossRecord>& records, const std::string& path);

}  // namespace sslvit
