#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vad/feature_io.hpp"

namespace vad {

// Labeled synthetic multimodal dataset generator. Normal frames follow a
// smooth low-frequency spatial pattern with temporally correlated drift;
// anomalous episodes inject an amplitude and texture shift into a subset
// of the modalities.
struct SynthModality {
    std::string name;
    int64_t channels = 2;
    int64_t height = 8;
    int64_t width = 8;
};

struct SynthConfig {
    std::vector<SynthModality> modalities = {
        {"appearance", 2, 8, 8}, {"depth", 2, 8, 8}, {"flow", 2, 6, 6}};
    int64_t train_videos = 8;
    int64_t test_videos = 4;
    int64_t frames_per_video = 250;
    double anomaly_rate = 0.2;            // fraction of anomalous test frames
    int64_t episode_min = 10, episode_max = 30;
    std::vector<int64_t> anomalous_modalities = {0, 1};  // indices hit by anomalies
    double anomaly_amplitude = 2.5;       // multiplicative shift
    double anomaly_texture = 0.8;         // additive high-frequency component
    double noise = 0.05;
    double energy_margin = 0.5;           // required mean-energy separation
};

struct SynthResult {
    std::filesystem::path train_manifest;
    std::filesystem::path test_manifest;
};

// Writes feature clips, label files and both manifests under out_dir.
// Fully deterministic given the seed.
SynthResult generate_synthetic(const SynthConfig& config, uint64_t seed,
                               const std::filesystem::path& out_dir);

}  // namespace vad
