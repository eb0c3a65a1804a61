#include "sslvit/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sslvit/error.hpp"

namespace sslvit {

void TrainConfig::validate() const {
    if (method != "barlow" && method != "dino" && method != "hybrid") {
        throw ConfigError("method must be one of barlow|dino|hybrid, got '" + method + "'");
    }
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (!(learning_rate > 0.0f)) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0.0f) throw ConfigError("weight_decay must be nonnegative");
    vit.validate();
    loss.validate();
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

float parse_float(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        float f = std::stof(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return f;
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": '" + v + "' is not a number");
    }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        unsigned long long u = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": '" + v + "' is not a nonnegative integer");
    }
}

std::string fmt_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", double(v));
    return buf;
}

}  // namespace

void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "method") cfg.method = value;
    else if (key == "epochs") cfg.epochs = parse_uint(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_uint(key, value);
    else if (key == "learning_rate") cfg.learning_rate = parse_float(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_float(key, value);
    else if (key == "seed") cfg.seed = parse_uint(key, value);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "image_size") cfg.vit.image_size = parse_uint(key, value);
    else if (key == "patch_size") cfg.vit.patch_size = parse_uint(key, value);
    else if (key == "depth") cfg.vit.depth = parse_uint(key, value);
    else if (key == "dim") cfg.vit.dim = parse_uint(key, value);
    else if (key == "heads") cfg.vit.heads = parse_uint(key, value);
    else if (key == "mlp_ratio") cfg.vit.mlp_ratio = parse_float(key, value);
    else if (key == "lambda_bt") cfg.loss.lambda_bt = parse_float(key, value);
    else if (key == "alpha") cfg.loss.alpha = parse_float(key, value);
    else if (key == "bt_scale") cfg.loss.bt_scale = parse_float(key, value);
    else if (key == "tau_s") cfg.loss.tau_s = parse_float(key, value);
    else if (key == "tau_t") cfg.loss.tau_t = parse_float(key, value);
    else if (key == "ema_momentum") cfg.loss.ema_momentum = parse_float(key, value);
    else if (key == "center_momentum") cfg.loss.center_momentum = parse_float(key, value);
    else if (key == "dino_out_dim") cfg.loss.dino_out_dim = parse_uint(key, value);
    else if (key == "bt_embed_dim") cfg.loss.bt_embed_dim = parse_uint(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value");
        }
        apply_config_override(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

TrainConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    out += "method=" + cfg.method + "\n";
    out += "epochs=" + std::to_string(cfg.epochs) + "\n";
    out += "batch_size=" + std::to_string(cfg.batch_size) + "\n";
    out += "learning_rate=" + fmt_float(cfg.learning_rate) + "\n";
    out += "weight_decay=" + fmt_float(cfg.weight_decay) + "\n";
    out += "seed=" + std::to_string(cfg.seed) + "\n";
    out += "dataset=" + cfg.dataset + "\n";
    out += "image_size=" + std::to_string(cfg.vit.image_size) + "\n";
    out += "patch_size=" + std::to_string(cfg.vit.patch_size) + "\n";
    out += "depth=" + std::to_string(cfg.vit.depth) + "\n";
    out += "dim=" + std::to_string(cfg.vit.dim) + "\n";
    out += "heads=" + std::to_string(cfg.vit.heads) + "\n";
    out += "mlp_ratio=" + fmt_float(cfg.vit.mlp_ratio) + "\n";
    out += "lambda_bt=" + fmt_float(cfg.loss.lambda_bt) + "\n";
    out += "alpha=" + fmt_float(cfg.loss.alpha) + "\n";
    out += "bt_scale=" + fmt_float(cfg.loss.bt_scale) + "\n";
    out += "tau_s=" + fmt_float(cfg.loss.tau_s) + "\n";
    out += "tau_t=" + fmt_float(cfg.loss.tau_t) + "\n";
    out += "ema_momentum=" + fmt_float(cfg.loss.ema_momentum) + "\n";
    out += "center_momentum=" + fmt_float(cfg.loss.center_momentum) + "\n";
    out += "dino_out_dim=" + std::to_string(cfg.loss.dino_out_dim) + "\n";
    out += "bt_embed_dim=" + std::to_string(cfg.loss.bt_embed_dim) + "\n";
    return out;
}

}  // namespace sslvit
