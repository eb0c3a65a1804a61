#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sslvit/config.hpp"
#include "sslvit/data_io.hpp"
#include "sslvit/error.hpp"
#include "sslvit/eval.hpp"
#include "sslvit/model.hpp"
#include "sslvit/plot.hpp"
#include "sslvit/trainer.hpp"
#include "sslvit/vit.hpp"

namespace {

using namespace sslvit;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct PretrainArgs {
    std::string config_path;
    std::string method;
    std::string data;
    std::string out;
    std::string loss_out;
    std::vector<std::string> overrides;
};

int run_pretrain(const PretrainArgs& args) {
    TrainConfig cfg = args.config_path.empty() ? TrainConfig{} : load_config_file(args.config_path);
    if (!args.method.empty()) cfg.method = args.method;
    if (!args.data.empty()) cfg.dataset = args.data;
    for (const std::string& kv : args.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
            return kExitUsage;
        }
        apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (cfg.method != "barlow" && cfg.method != "dino" && cfg.method != "hybrid") {
        std::cerr << "error: method must be barlow|dino|hybrid, got '" << cfg.method << "'\n";
        return kExitUsage;
    }
    cfg.validate();

    std::cout << "resolved config:\n" << config_to_text(cfg);
    TrainResult result = train(cfg);
    save_checkpoint(result.checkpoint, args.out);
    std::string csv = args.loss_out.empty() ? args.out + ".loss.csv" : args.loss_out;
    write_loss_csv(result.log, csv);

    double first = 0.0, last = 0.0;
    std::size_t nf = 0, nl = 0;
    for (const LossRecord& r : result.log) {
        if (r.epoch == 0) {
            first += r.loss_total;
            ++nf;
        }
        if (r.epoch == cfg.epochs - 1) {
            last += r.loss_total;
            ++nl;
        }
    }
    std::printf("done: %zu steps, first-epoch mean loss %.6g, final-epoch mean loss %.6g\n",
                result.log.size(), first / double(nf), last / double(nl));
    std::printf("checkpoint: %s\nloss log: %s\n", args.out.c_str(), csv.c_str());
    return 0;
}

struct ProbeArgs {
    std::string ckpt;
    std::string data;
    std::string labels;
    double fraction = 1.0;
    std::size_t epochs = 100;
    double lr = 0.01;
    std::uint64_t seed = 1;
    std::string out;
};

int run_probe(const ProbeArgs& args) {
    if (!(args.fraction > 0.0) || args.fraction > 1.0) {
        std::cerr << "error: --fraction must lie in (0,1]\n";
        return kExitUsage;
    }
    std::cout << "probe: ckpt=" << args.ckpt << " data=" << args.data
              << " fraction=" << args.fraction << " epochs=" << args.epochs
              << " lr=" << args.lr << " seed=" << args.seed << "\n";

    Checkpoint ckpt = load_checkpoint(args.ckpt);
    auto [cfg, backbone] = restore_backbone(ckpt);

    std::string labels_csv = args.labels;
    if (labels_csv.empty()) {
        auto candidate = std::filesystem::path(args.data) / "labels.csv";
        if (std::filesystem::exists(candidate)) labels_csv = candidate.string();
    }
    if (labels_csv.empty()) {
        throw ConfigError("probe requires labeled data; no labels csv found");
    }
    DatasetManifest manifest = build_manifest(args.data, labels_csv);
    if (!manifest.labeled()) {
        throw ConfigError("probe requires a label for every image");
    }
    std::vector<Image> images = load_corpus(manifest);
    std::vector<int> labels;
    for (const auto& e : manifest.entries) labels.push_back(*e.label);

    FeatureSet features = extract_features(backbone, images, labels);
    LinearHead head = train_probe(features, float(args.fraction), args.epochs,
                                  float(args.lr), args.seed);
    ProbeResult res = evaluate_probe(head, features);

    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g\n", ckpt.method.c_str(),
                  double(res.loss), double(res.acc1), double(res.acc5));
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw Error("cannot write " + args.out);
    out << "method,loss,acc1,acc5\n" << buf;
    std::printf("method=%s loss=%.6g acc1=%.6g acc5=%.6g -> %s\n", ckpt.method.c_str(),
                double(res.loss), double(res.acc1), double(res.acc5), args.out.c_str());
    return 0;
}

struct AttendArgs {
    std::string ckpt;
    std::string image;
    std::string out_prefix;
};

int run_attend(const AttendArgs& args) {
    std::cout << "attend: ckpt=" << args.ckpt << " image=" << args.image
              << " out-prefix=" << args.out_prefix << "\n";
    Checkpoint ckpt = load_checkpoint(args.ckpt);
    auto [cfg, backbone] = restore_backbone(ckpt);

    Image img = load_ppm(args.image);
    std::size_t res = cfg.vit.image_size;
    if (img.height % cfg.vit.patch_size != 0 || img.width % cfg.vit.patch_size != 0 ||
        img.height != img.width) {
        img = resize_bilinear(img, res, res);
    }
    std::size_t grid_h = img.height / cfg.vit.patch_size;
    std::size_t grid_w = img.width / cfg.vit.patch_size;

    ViTOutput out = vit_forward(backbone, images_to_tensor({img}));
    Tensor maps = cls_attention_map(out.attn, grid_h, grid_w);

    std::size_t heads = cfg.vit.heads;
    std::size_t cells = grid_h * grid_w;
    std::vector<float> mean_map(cells, 0.0f);
    for (std::size_t h = 0; h < heads; ++h) {
        std::vector<float> head_map(cells);
        for (std::size_t i = 0; i < cells; ++i) {
            head_map[i] = maps.data()[h * cells + i];
            mean_map[i] += head_map[i] / float(heads);
        }
        save_pgm(head_map, grid_h, grid_w,
                 args.out_prefix + "_head" + std::to_string(h) + ".pgm", true);
    }
    save_pgm(mean_map, grid_h, grid_w, args.out_prefix + "_mean.pgm", true);
    std::printf("wrote %zu head maps plus the mean map (%zux%zu)\n", heads, grid_h, grid_w);
    return 0;
}

struct PlotArgs {
    std::vector<std::string> loss_csvs;
    std::string out;
};

int run_plot(const PlotArgs& args) {
    std::cout << "plot: inputs=" << args.loss_csvs.size() << " out=" << args.out << "\n";
    std::vector<LossSeries> series;
    for (const std::string& path : args.loss_csvs) {
        series.push_back(parse_loss_csv(path));
    }
    std::string svg = render_loss_svg(series);
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw Error("cannot write " + args.out);
    out << svg;
    std::printf("wrote %s with %zu series\n", args.out.c_str(), series.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-supervised vision-transformer training and evaluation"};
    app.require_subcommand(1);

    PretrainArgs pre;
    CLI::App* pretrain = app.add_subcommand("pretrain", "train a model on an image directory");
    pretrain->add_option("--config", pre.config_path, "key=value config file");
    pretrain->add_option("--method", pre.method, "barlow|dino|hybrid");
    pretrain->add_option("--data", pre.data, "dataset directory of .ppm images");
    pretrain->add_option("--out", pre.out, "checkpoint output path")->required();
    pretrain->add_option("--loss-out", pre.loss_out, "loss csv path (default <out>.loss.csv)");
    pretrain->add_option("--set", pre.overrides, "override any config key, key=value");

    ProbeArgs probe;
    CLI::App* probe_cmd = app.add_subcommand("probe", "linear probe on frozen features");
    probe_cmd->add_option("--ckpt", probe.ckpt, "checkpoint path")->required();
    probe_cmd->add_option("--data", probe.data, "labeled dataset directory")->required();
    probe_cmd->add_option("--labels", probe.labels, "labels csv (default <data>/labels.csv)");
    probe_cmd->add_option("--fraction", probe.fraction, "labeled fraction in (0,1]");
    probe_cmd->add_option("--epochs", probe.epochs, "probe epochs");
    probe_cmd->add_option("--lr", probe.lr, "probe learning rate");
    probe_cmd->add_option("--seed", probe.seed, "subsampling seed");
    probe_cmd->add_option("--out", probe.out, "result csv path")->required();

    AttendArgs attend;
    CLI::App* attend_cmd = app.add_subcommand("attend", "render [CLS] attention maps");
    attend_cmd->add_option("--ckpt", attend.ckpt, "checkpoint path")->required();
    attend_cmd->add_option("--image", attend.image, "input ppm image")->required();
    attend_cmd->add_option("--out-prefix", attend.out_prefix, "output path prefix")->required();

    PlotArgs plot;
    CLI::App* plot_cmd = app.add_subcommand("plot", "render loss curves as svg");
    plot_cmd->add_option("--loss-csv", plot.loss_csvs, "loss csv inputs")->required();
    plot_cmd->add_option("--out", plot.out, "svg output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*pretrain) return run_pretrain(pre);
        if (*probe_cmd) return run_probe(probe);
        if (*attend_cmd) return run_attend(attend);
        if (*plot_cmd) return run_plot(plot);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
