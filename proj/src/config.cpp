#include "vad/config.hpp"

#include <fstream>
#include <sstream>

namespace vad {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

int64_t to_int(const std::string& v, const std::string& key) {
    try {
        return std::stoll(v);
    } catch (...) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        return std::stod(v);
    } catch (...) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

// "name:channels:HxW"
SynthModality parse_modality(const std::string& s) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) throw ConfigError("bad modality spec '" + s + "'");
    SynthModality m;
    m.name = parts[0];
    m.channels = to_int(parts[1], "modalities");
    const auto hw = split(parts[2], 'x');
    if (hw.size() != 2) throw ConfigError("bad modality size in '" + s + "'");
    m.height = to_int(hw[0], "modalities");
    m.width = to_int(hw[1], "modalities");
    return m;
}

}  // namespace

fs::path RunConfig::train_manifest_path() const {
    return train_manifest.empty() ? data_dir() / "train_manifest.json" : fs::path(train_manifest);
}

fs::path RunConfig::test_manifest_path() const {
    return test_manifest.empty() ? data_dir() / "test_manifest.json" : fs::path(test_manifest);
}

void RunConfig::validate() const {
    if (pretrain_epochs < 1 || finetune_epochs < 1)
        throw ConfigError("epoch counts must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (train-mode batch norm)");
    if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (lambda <= 0) throw ConfigError("lambda must be > 0");
    if (cae_widths.empty()) throw ConfigError("cae_widths must not be empty");
    if (cae_downsample.size() != cae_widths.size())
        throw ConfigError("cae_downsample must list one flag per width");
    if (common_height < 0 || common_width < 0)
        throw ConfigError("common size must be >= 0 (0 = auto)");
    if (synth.modalities.empty()) throw ConfigError("at least one modality is required");
    if (synth.anomaly_rate < 0.0 || synth.anomaly_rate > 1.0)
        throw ConfigError("anomaly_rate must be in [0,1]");
    const int64_t ch = synth.modalities.front().channels;
    for (const SynthModality& m : synth.modalities) {
        if (m.channels != ch)
            throw ConfigError(
                "all modalities must share one channel count (the depth-0 fusion sum "
                "requires equal shapes); got " +
                std::to_string(m.channels) + " vs " + std::to_string(ch));
        if (m.channels < 1 || m.height < 1 || m.width < 1)
            throw ConfigError("modality '" + m.name + "' has non-positive extents");
    }
    for (int64_t idx : synth.anomalous_modalities)
        if (idx < 0 || idx >= static_cast<int64_t>(synth.modalities.size()))
            throw ConfigError("anomalous modality index out of range: " + std::to_string(idx));
}

RunConfig parse_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    RunConfig cfg;
    std::string section, line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section + "." + key;

        if (qualified == "paths.out_dir") cfg.out_dir = value;
        else if (qualified == "paths.train_manifest") cfg.train_manifest = value;
        else if (qualified == "paths.test_manifest") cfg.test_manifest = value;
        else if (qualified == "architecture.common_height")
            cfg.common_height = to_int(value, qualified);
        else if (qualified == "architecture.common_width")
            cfg.common_width = to_int(value, qualified);
        else if (qualified == "architecture.cae_widths") {
            cfg.cae_widths.clear();
            for (const auto& w : split(value, ',')) cfg.cae_widths.push_back(to_int(w, qualified));
        } else if (qualified == "architecture.cae_downsample") {
            cfg.cae_downsample.clear();
            for (const auto& w : split(value, ','))
                cfg.cae_downsample.push_back(to_int(w, qualified) != 0);
        } else if (qualified == "training.pretrain_epochs")
            cfg.pretrain_epochs = to_int(value, qualified);
        else if (qualified == "training.finetune_epochs")
            cfg.finetune_epochs = to_int(value, qualified);
        else if (qualified == "training.batch_size") cfg.batch_size = to_int(value, qualified);
        else if (qualified == "training.learning_rate")
            cfg.learning_rate = to_double(value, qualified);
        else if (qualified == "training.weight_decay")
            cfg.weight_decay = to_double(value, qualified);
        else if (qualified == "training.lambda") cfg.lambda = to_double(value, qualified);
        else if (qualified == "training.seed")
            cfg.seed = static_cast<uint64_t>(to_int(value, qualified));
        else if (qualified == "training.center_mode") {
            if (value == "fixed-after-init") cfg.center_mode = CenterMode::FixedAfterInit;
            else if (value == "learned") cfg.center_mode = CenterMode::Learned;
            else throw ConfigError("center_mode must be 'fixed-after-init' or 'learned'");
        } else if (qualified == "synth.modalities") {
            cfg.synth.modalities.clear();
            for (const auto& m : split(value, ','))
                cfg.synth.modalities.push_back(parse_modality(m));
        } else if (qualified == "synth.train_videos")
            cfg.synth.train_videos = to_int(value, qualified);
        else if (qualified == "synth.test_videos")
            cfg.synth.test_videos = to_int(value, qualified);
        else if (qualified == "synth.frames_per_video")
            cfg.synth.frames_per_video = to_int(value, qualified);
        else if (qualified == "synth.anomaly_rate")
            cfg.synth.anomaly_rate = to_double(value, qualified);
        else if (qualified == "synth.anomalous_modalities") {
            cfg.synth.anomalous_modalities.clear();
            for (const auto& m : split(value, ','))
                cfg.synth.anomalous_modalities.push_back(to_int(m, qualified));
        } else if (qualified == "synth.anomaly_amplitude")
            cfg.synth.anomaly_amplitude = to_double(value, qualified);
        else if (qualified == "synth.anomaly_texture")
            cfg.synth.anomaly_texture = to_double(value, qualified);
        else if (qualified == "synth.noise") cfg.synth.noise = to_double(value, qualified);
        else if (qualified == "synth.energy_margin")
            cfg.synth.energy_margin = to_double(value, qualified);
        else
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": unknown config key '" + qualified + "'");
    }
    cfg.validate();
    return cfg;
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[paths]\n";
    os << "out_dir = " << cfg.out_dir.string() << "\n\n";
    os << "[architecture]\n";
    os << "common_height = " << cfg.common_height << "\n";
    os << "common_width = " << cfg.common_width << "\n";
    os << "cae_widths = ";
    for (std::size_t i = 0; i < cfg.cae_widths.size(); ++i)
        os << (i ? "," : "") << cfg.cae_widths[i];
    os << "\ncae_downsample = ";
    for (std::size_t i = 0; i < cfg.cae_downsample.size(); ++i)
        os << (i ? "," : "") << (cfg.cae_downsample[i] ? 1 : 0);
    os << "\n\n[training]\n";
    os << "pretrain_epochs = " << cfg.pretrain_epochs << "\n";
    os << "finetune_epochs = " << cfg.finetune_epochs << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "learning_rate = " << cfg.learning_rate << "\n";
    os << "weight_decay = " << cfg.weight_decay << "\n";
    os << "lambda = " << cfg.lambda << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "center_mode = "
       << (cfg.center_mode == CenterMode::FixedAfterInit ? "fixed-after-init" : "learned")
       << "\n\n[synth]\n";
    os << "modalities = ";
    for (std::size_t i = 0; i < cfg.synth.modalities.size(); ++i) {
        const SynthModality& m = cfg.synth.modalities[i];
        os << (i ? "," : "") << m.name << ":" << m.channels << ":" << m.height << "x" << m.width;
    }
    os << "\ntrain_videos = " << cfg.synth.train_videos << "\n";
    os << "test_videos = " << cfg.synth.test_videos << "\n";
    os << "frames_per_video = " << cfg.synth.frames_per_video << "\n";
    os << "anomaly_rate = " << cfg.synth.anomaly_rate << "\n";
    os << "anomalous_modalities = ";
    for (std::size_t i = 0; i < cfg.synth.anomalous_modalities.size(); ++i)
        os << (i ? "," : "") << cfg.synth.anomalous_modalities[i];
    os << "\nanomaly_amplitude = " << cfg.synth.anomaly_amplitude << "\n";
    os << "anomaly_texture = " << cfg.synth.anomaly_texture << "\n";
    os << "noise = " << cfg.synth.noise << "\n";
    os << "energy_margin = " << cfg.synth.energy_margin << "\n";
    return os.str();
}

}  // namespace vad
