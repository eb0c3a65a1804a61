#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sslvit/config.hpp"
#include "sslvit/data_io.hpp"
#include "sslvit/ssl.hpp"
#include "sslvit/vit.hpp"

namespace sslvit {

/// Student-side parameters: the backbone plus whichever heads the method
/// needs. Barlow-only runs never allocate a distillation head (or teacher).
struct Model {
    ViTParams backbone;
    std::optional<BtHeadParams> bt_head;
    std::optional<DinoHeadParams> dino_head;

    static Model init(const TrainConfig& cfg);
    std::vector<Tensor*> trainable();
    std::vector<std::pair<std::string, Tensor*>> named_tensors();  // "student.*"
};

/// Momentum copy of the student's distillation path plus the running logit
/// center. None of its tensors ever require gradients.
struct TeacherState {
    ViTParams backbone;
    DinoHeadParams dino_head;
    Tensor center;  // [K]

    static TeacherState from_student(const Model& student, std::size_t dino_out_dim);
    std::vector<Tensor*> ema_targets();
    std::vector<std::pair<std::string, Tensor*>> named_tensors();  // "teacher.*"
};

/// Assembles the on-disk checkpoint: config snapshot plus every named tensor.
Checkpoint make_checkpoint(const TrainConfig& cfg, Model& student, TeacherState* teacher);

/// Rebuilds model structures from a checkpoint, validating shapes.
struct RestoredState {
    TrainConfig cfg;
    Model student;
    std::optional<TeacherState> teacher;
};
RestoredState restore_state(const Checkpoint& ckpt);

/// Backbone-only restore for evaluation and attention rendering.
std::pair<TrainConfig, ViTParams> restore_backbone(const Checkpoint& ckpt);

}  // namespace sslvit
