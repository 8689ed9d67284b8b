#pragma once

#include <filesystem>
#include <string>

#include "vad/svdd.hpp"
#include "vad/synth.hpp"

namespace vad {

// Complete experiment record, read from a flat key-value config file with
// [paths] / [architecture] / [training] / [synth] sections. Every run is
// determined by this file plus the seed.
struct RunConfig {
    // paths
    std::filesystem::path out_dir = "out";
    std::string train_manifest;  // default: <out_dir>/data/train_manifest.json
    std::string test_manifest;   // default: <out_dir>/data/test_manifest.json

    // architecture
    int64_t common_height = 0, common_width = 0;  // 0 = max across modalities
    std::vector<int64_t> cae_widths = {16, 32, 32, 64};
    std::vector<bool> cae_downsample = {true, true, false, false};

    // training
    int64_t pretrain_epochs = 100;
    int64_t finetune_epochs = 75;
    int64_t batch_size = 128;
    double learning_rate = 1e-2;
    double weight_decay = 0.1;
    double lambda = 0.1;
    uint64_t seed = 1234;
    CenterMode center_mode = CenterMode::FixedAfterInit;

    SynthConfig synth;

    std::filesystem::path data_dir() const { return out_dir / "data"; }
    std::filesystem::path train_manifest_path() const;
    std::filesystem::path test_manifest_path() const;
    std::filesystem::path cae_checkpoint() const { return out_dir / "cae.mawt"; }
    std::filesystem::path model_checkpoint() const { return out_dir / "model.mawt"; }
    std::filesystem::path pretrain_loss_csv() const { return out_dir / "pretrain_loss.csv"; }
    std::filesystem::path finetune_loss_csv() const { return out_dir / "finetune_loss.csv"; }
    std::filesystem::path scores_csv() const { return out_dir / "scores.csv"; }
    std::filesystem::path report_json() const { return out_dir / "report.json"; }
    std::filesystem::path curves_dir() const { return out_dir / "curves"; }

    void validate() const;  // numeric ranges; throws ConfigError
};

RunConfig parse_config(const std::filesystem::path& path);
std::string config_to_text(const RunConfig& cfg);

}  // namespace vad
