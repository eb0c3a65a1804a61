#include "sslvit/model.hpp"

#include "sslvit/error.hpp"
#include "sslvit/rng.hpp"

namespace sslvit {

namespace {

constexpr std::uint64_t kBtSeedSalt = 1;
constexpr std::uint64_t kDinoSeedSalt = 2;

void load_into(const Checkpoint& ckpt, std::vector<std::pair<std::string, Tensor*>> named) {
    for (auto& [name, tensor] : named) {
        const NamedTensorData& rec = ckpt.require(name);
        if (rec.shape != tensor->shape()) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "tensor " + name + " has shape " + shape_str(rec.shape) +
                                      ", expected " + shape_str(tensor->shape()));
        }
        tensor->data() = rec.values;
    }
}

}  // namespace

Model Model::init(const TrainConfig& cfg) {
    cfg.validate();
    Model m;
    m.backbone = ViTParams::init(cfg.vit, cfg.seed);
    if (cfg.method == "barlow" || cfg.method == "hybrid") {
        m.bt_head = BtHeadParams::init(cfg.vit.dim, cfg.loss.bt_embed_dim,
                                       Rng::mix(cfg.seed, kBtSeedSalt));
    }
    if (cfg.method == "dino" || cfg.method == "hybrid") {
        m.dino_head = DinoHeadParams::init(cfg.vit.dim, cfg.loss.dino_out_dim,
                                           Rng::mix(cfg.seed, kDinoSeedSalt));
    }
    return m;
}

std::vector<Tensor*> Model::trainable() {
    std::vector<Tensor*> out = backbone.tensors();
    if (bt_head) {
        auto t = bt_head->tensors();
        out.insert(out.end(), t.begin(), t.end());
    }
    if (dino_head) {
        auto t = dino_head->tensors();
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_tensors() {
    auto out = backbone.named_tensors("student.backbone");
    if (bt_head) {
        auto t = bt_head->named_tensors("student.bt_head");
        out.insert(out.end(), t.begin(), t.end());
    }
    if (dino_head) {
        auto t = dino_head->named_tensors("student.dino_head");
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

TeacherState TeacherState::from_student(const Model& student, std::size_t dino_out_dim) {
    if (!student.dino_head) {
        throw StateError("teacher requires a student with a distillation head");
    }
    TeacherState t;
    t.backbone = student.backbone.clone_detached();
    t.dino_head = student.dino_head->clone_detached();
    t.center = Tensor::zeros({dino_out_dim});
    return t;
}

std::vector<Tensor*> TeacherState::ema_targets() {
    std::vector<Tensor*> out = backbone.tensors();
    auto t = dino_head.tensors();
    out.insert(out.end(), t.begin(), t.end());
    return out;
}

std::vector<std::pair<std::string, Tensor*>> TeacherState::named_tensors() {
    auto out = backbone.named_tensors("teacher.backbone");
    auto t = dino_head.named_tensors("teacher.dino_head");
    out.insert(out.end(), t.begin(), t.end());
    out.emplace_back("teacher.center", &center);
    return out;
}

Checkpoint make_checkpoint(const TrainConfig& cfg, Model& student, TeacherState* teacher) {
    Checkpoint ckpt;
    ckpt.method = cfg.method;
    ckpt.config_text = config_to_text(cfg);
    for (auto& [name, tensor] : student.named_tensors()) {
        ckpt.tensors.push_back({name, tensor->shape(), tensor->data()});
    }
    if (teacher) {
        for (auto& [name, tensor] : teacher->named_tensors()) {
            ckpt.tensors.push_back({name, tensor->shape(), tensor->data()});
        }
    }
    return ckpt;
}

RestoredState restore_state(const Checkpoint& ckpt) {
    RestoredState state{parse_config_text(ckpt.config_text), {}, std::nullopt};
    if (state.cfg.method != ckpt.method) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "method tag disagrees with the config snapshot");
    }
    state.student = Model::init(state.cfg);
    load_into(ckpt, state.student.named_tensors());
    if (ckpt.find("teacher.center")) {
        state.teacher = TeacherState::from_student(state.student, state.cfg.loss.dino_out_dim);
        load_into(ckpt, state.teacher->named_tensors());
    }
    return state;
}

std::pair<TrainConfig, ViTParams> restore_backbone(const Checkpoint& ckpt) {
    TrainConfig cfg = parse_config_text(ckpt.config_text);
    ViTParams backbone = ViTParams::init(cfg.vit, cfg.seed, /*requires_grad=*/false);
    std::vector<std::pair<std::string, Tensor*>> named =
        backbone.named_tensors("student.backbone");
    load_into(ckpt, named);
    return {cfg, std::move(backbone)};
}

}  // namespace sslvit
