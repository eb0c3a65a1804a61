#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "sslvit/config.hpp"
#include "sslvit/error.hpp"

using namespace sslvit;

TEST_CASE("defaults validate") {
    TrainConfig cfg;
    cfg.validate();
    CHECK(cfg.method == "hybrid");
    CHECK(cfg.vit.image_size == 64);
    CHECK(cfg.loss.tau_s == 0.1f);
}

TEST_CASE("parse and override") {
    TrainConfig cfg = parse_config_text(
        "# comment line\n"
        "method=dino\n"
        "epochs=7\n"
        "learning_rate=0.001\n"
        "\n"
        "tau_t = 0.05\n"
        "dataset=/data/corpus\n");
    CHECK(cfg.method == "dino");
    CHECK(cfg.epochs == 7);
    CHECK(cfg.learning_rate == doctest::Approx(0.001));
    CHECK(cfg.loss.tau_t == doctest::Approx(0.05));
    CHECK(cfg.dataset == "/data/corpus");

    apply_config_override(cfg, "heads", "8");
    CHECK(cfg.vit.heads == 8);

    CHECK_THROWS_AS(apply_config_override(cfg, "nope", "1"), ConfigError);
    CHECK_THROWS_AS(apply_config_override(cfg, "epochs", "three"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("method dino\n"), ConfigError);
}

TEST_CASE("snapshot round trip is exact") {
    TrainConfig cfg;
    cfg.method = "barlow";
    cfg.epochs = 33;
    cfg.batch_size = 4;
    cfg.learning_rate = 3.14159e-4f;
    cfg.weight_decay = 0.017f;
    cfg.seed = 987654321;
    cfg.dataset = "some/dir";
    cfg.vit.image_size = 224;
    cfg.vit.patch_size = 16;
    cfg.vit.mlp_ratio = 3.5f;
    cfg.loss.lambda_bt = 0.0051f;
    cfg.loss.tau_t = 0.07f;
    cfg.loss.dino_out_dim = 256;

    TrainConfig back = parse_config_text(config_to_text(cfg));
    CHECK(back.method == cfg.method);
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.learning_rate == cfg.learning_rate);  // bitwise via %.9g
    CHECK(back.weight_decay == cfg.weight_decay);
    CHECK(back.seed == cfg.seed);
    CHECK(back.dataset == cfg.dataset);
    CHECK(back.vit.image_size == cfg.vit.image_size);
    CHECK(back.vit.mlp_ratio == cfg.vit.mlp_ratio);
    CHECK(back.loss.lambda_bt == cfg.loss.lambda_bt);
    CHECK(back.loss.tau_t == cfg.loss.tau_t);
    CHECK(back.loss.dino_out_dim == cfg.loss.dino_out_dim);
    CHECK(config_to_text(back) == config_to_text(cfg));
}

TEST_CASE("validation rejects bad combinations") {
    TrainConfig cfg;
    cfg.method = "sgd";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = TrainConfig{};
    cfg.batch_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = TrainConfig{};
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = TrainConfig{};
    cfg.vit.patch_size = 7;  // does not divide 64
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
