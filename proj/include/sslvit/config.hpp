#pragma once

#include <cstdint>
#include <string>

#include "sslvit/ssl.hpp"
#include "sslvit/vit.hpp"

namespace sslvit {

struct TrainConfig {
    std::string method = "hybrid";  // barlow | dino | hybrid
    std::size_t epochs = 20;
    std::size_t batch_size = 8;
    float learning_rate = 5e-4f;
    float weight_decay = 0.04f;
    std::uint64_t seed = 1;
    std::string dataset;
    ViTConfig vit;
    LossConfig loss;

    void validate() const;
};

/// Flat key=value text, one pair per line; '#' starts a comment. Keys match
/// the config field names exactly; unknown keys are rejected.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config_file(const std::string& path);
void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Canonical snapshot; parsing it back reproduces the config exactly.
std::string config_to_text(const TrainConfig& cfg);

}  // namespace sslvit
