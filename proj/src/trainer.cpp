#include "sslvit/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sslvit/error.hpp"
#include "sslvit/rng.hpp"

namespace sslvit {

namespace {

constexpr std::uint64_t kOrderSalt = 0x6f726472ULL;  // "ordr"

Tensor cls_of(const ViTParams& backbone, const std::vector<Image>& views) {
    return vit_forward(backbone, images_to_tensor(views)).cls;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, std::vector<Image> dataset)
    : cfg_(cfg),
      dataset_(std::move(dataset)),
      aug_(AugmentConfig::for_resolution(cfg.vit.image_size, cfg.vit.patch_size)),
      student_(Model::init(cfg)),
      opt_([this] {
          if (dataset_.empty()) throw ConfigError("trainer: dataset is empty");
          return AdamW(student_.trainable());
      }()) {
    if (cfg_.method == "dino" || cfg_.method == "hybrid") {
        teacher_ = TeacherState::from_student(student_, cfg_.loss.dino_out_dim);
    }
    steps_per_epoch_ = (dataset_.size() + cfg_.batch_size - 1) / cfg_.batch_size;
    total_steps_ = steps_per_epoch_ * cfg_.epochs;
}

float Trainer::lr_at(std::size_t step) const {
    return lr_schedule(cfg_.learning_rate, step, total_steps_);
}

float Trainer::ema_momentum_at(std::size_t step) const {
    return ema_momentum_schedule(cfg_.loss.ema_momentum, step, total_steps_);
}

float Trainer::teacher_temp_at(std::size_t epoch) const {
    return teacher_temp_schedule(cfg_.loss.tau_t, epoch, cfg_.epochs);
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t epoch) const {
    std::vector<std::size_t> order(dataset_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::derive({kOrderSalt, cfg_.seed, epoch});
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = rng.uniform_index(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

MultiCropBatch Trainer::make_batch(std::size_t epoch,
                                   const std::vector<std::size_t>& indices) const {
    MultiCropBatch batch;
    batch.reserve(indices.size());
    for (std::size_t idx : indices) {
        batch.push_back(make_multicrop(dataset_[idx], aug_, cfg_.seed, epoch, idx));
    }
    return batch;
}

Tensor Trainer::teacher_logits(const std::vector<Image>& views) const {
    if (!teacher_) throw StateError("no teacher allocated for this method");
    Tensor cls = cls_of(teacher_->backbone, views);
    return teacher_->dino_head.forward(cls);
}

LossRecord Trainer::train_step(const MultiCropBatch& batch) {
    if (batch.empty()) throw ParamError("train_step: empty batch");
    auto t0 = std::chrono::steady_clock::now();

    std::size_t epoch = step_ / steps_per_epoch_;
    bool wants_bt = cfg_.method == "barlow" || cfg_.method == "hybrid";
    bool wants_dino = cfg_.method == "dino" || cfg_.method == "hybrid";

    std::optional<Tensor> l_bt;
    std::optional<Tensor> l_dino;
    std::optional<Tensor> teacher_rows;  // all teacher logits, for the center

    if (wants_bt) {
        std::vector<Image> view_a, view_b;
        for (const MultiCropViews& v : batch) {
            view_a.push_back(v.bt_views[0]);
            view_b.push_back(v.bt_views[1]);
        }
        Tensor z_a = student_.bt_head->forward(cls_of(student_.backbone, view_a));
        Tensor z_b = student_.bt_head->forward(cls_of(student_.backbone, view_b));
        Tensor c = cross_correlation(batch_norm_columns(z_a), batch_norm_columns(z_b));
        l_bt = barlow_twins_loss(c, cfg_.loss.lambda_bt);
    }

    if (wants_dino) {
        // student processes every distillation view, globals first; the
        // teacher sees only the two global crops
        std::vector<std::vector<Image>> student_views(8);
        for (const MultiCropViews& v : batch) {
            student_views[0].push_back(v.global_views[0]);
            student_views[1].push_back(v.global_views[1]);
            for (std::size_t i = 0; i < 6; ++i) student_views[2 + i].push_back(v.local_views[i]);
        }
        std::vector<Tensor> s_logit_views;
        for (const auto& views : student_views) {
            s_logit_views.push_back(
                student_.dino_head->forward(cls_of(student_.backbone, views)));
        }
        std::vector<Tensor> t_logit_views;
        for (std::size_t g = 0; g < 2; ++g) {
            t_logit_views.push_back(teacher_logits(student_views[g]));
        }
        DinoDistributions dd =
            dino_distributions(concat_rows(s_logit_views), concat_rows(t_logit_views),
                               teacher_->center, cfg_.loss.tau_s, teacher_temp_at(epoch));
        std::size_t n = batch.size();
        std::vector<Tensor> p_s, p_t;
        for (std::size_t v = 0; v < 8; ++v) p_s.push_back(slice_rows(dd.p_s, v * n, (v + 1) * n));
        for (std::size_t g = 0; g < 2; ++g) p_t.push_back(slice_rows(dd.p_t, g * n, (g + 1) * n));
        teacher_rows = concat_rows(t_logit_views);
        l_dino = dino_loss(p_s, p_t);
    }

    Tensor total;
    if (cfg_.method == "barlow") total = *l_bt;
    else if (cfg_.method == "dino") total = *l_dino;
    else total = hybrid_loss(*l_bt, *l_dino, cfg_.loss);

    if (!std::isfinite(total.item())) {
        char msg[256];
        std::snprintf(msg, sizeof(msg),
                      "non-finite loss at step %zu (epoch %zu): total=%g bt=%g dino=%g",
                      step_, epoch, double(total.item()),
                      l_bt ? double(l_bt->item()) : 0.0,
                      l_dino ? double(l_dino->item()) : 0.0);
        throw NumericError(msg);
    }

    backward(total);
    opt_.step(lr_at(step_), cfg_.weight_decay);

    if (teacher_) {
        TeacherStudentPair pair;
        pair.student = student_.backbone.tensors();
        auto head = student_.dino_head->tensors();
        pair.student.insert(pair.student.end(), head.begin(), head.end());
        pair.teacher = teacher_->ema_targets();
        ema_update(pair, ema_momentum_at(step_));
        teacher_->center =
            update_center(teacher_->center, *teacher_rows, cfg_.loss.center_momentum);
    }

    LossRecord rec;
    rec.epoch = epoch;
    rec.step = step_;
    rec.loss_total = total.item();
    if (l_bt) rec.loss_bt = l_bt->item();
    if (l_dino) rec.loss_dino = l_dino->item();
    rec.ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::steady_clock::now() - t0)
                 .count();
    ++step_;
    return rec;
}

std::vector<LossRecord> Trainer::run() {
    std::vector<LossRecord> log;
    log.reserve(total_steps_);
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::vector<std::size_t> order = epoch_order(epoch);
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg_.batch_size);
            std::vector<std::size_t> indices(order.begin() + start, order.begin() + end);
            log.push_back(train_step(make_batch(epoch, indices)));
        }
    }
    return log;
}

Checkpoint Trainer::checkpoint() {
    return make_checkpoint(cfg_, student_, teacher_ ? &*teacher_ : nullptr);
}

TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    DatasetManifest manifest = build_manifest(cfg.dataset);
    if (manifest.entries.empty()) {
        throw ConfigError("dataset " + cfg.dataset + " contains no images");
    }
    Trainer trainer(cfg, load_corpus(manifest));
    TrainResult result;
    result.log = trainer.run();
    result.checkpoint = trainer.checkpoint();
    return result;
}

void write_loss_csv(const std::vector<LossRecord>& records, const std::string& path) {
    std::string out = "epoch,step,loss_total,loss_bt,loss_dino,ms\n";
    char buf[64];
    for (const LossRecord& r : records) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.step) + ",";
        std::snprintf(buf, sizeof(buf), "%.9g", double(r.loss_total));
        out += buf;
        out += ",";
        if (r.loss_bt) {
            std::snprintf(buf, sizeof(buf), "%.9g", double(*r.loss_bt));
            out += buf;
        }
        out += ",";
        if (r.loss_dino) {
            std::snprintf(buf, sizeof(buf), "%.9g", double(*r.loss_dino));
            out += buf;
        }
        out += "," + std::to_string(r.ms) + "\n";
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write " + path);
    f << out;
}

}  // namespace sslvit
