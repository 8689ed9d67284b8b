#include "vad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vad/init.hpp"

namespace vad {

namespace fs = std::filesystem;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

struct ChannelProcess {
    double phase_h, phase_w;   // initial phases
    double freq_h, freq_w;     // low spatial frequencies
    double drift;              // phase drift per frame
};

ChannelProcess sample_process(Rng& rng) {
    ChannelProcess p;
    p.phase_h = rng.uniform();
    p.phase_w = rng.uniform();
    p.freq_h = static_cast<double>(rng.integer(1, 2));
    p.freq_w = static_cast<double>(rng.integer(1, 2));
    p.drift = rng.uniform(-0.01, 0.01);
    return p;
}

double normal_value(const ChannelProcess& p, int64_t t, int64_t h, int64_t w, int64_t H,
                    int64_t W) {
    const double u = H > 1 ? static_cast<double>(h) / static_cast<double>(H - 1) : 0.0;
    const double v = W > 1 ? static_cast<double>(w) / static_cast<double>(W - 1) : 0.0;
    const double drifted = p.drift * static_cast<double>(t);
    return 0.5 + 0.45 * std::sin(kTau * (p.freq_h * u + p.phase_h + drifted)) *
                     std::sin(kTau * (p.freq_w * v + p.phase_w + drifted));
}

// Non-overlapping anomalous episodes covering exactly `target` frames.
std::vector<int> place_episodes(int64_t frames, int64_t target, int64_t len_min, int64_t len_max,
                                Rng& rng) {
    std::vector<int> labels(static_cast<std::size_t>(frames), 0);
    int64_t placed = 0;
    int attempts = 0;
    while (placed < target && attempts < 10000) {
        ++attempts;
        int64_t len = std::min<int64_t>(static_cast<int64_t>(rng.integer(
                                            static_cast<uint64_t>(len_min),
                                            static_cast<uint64_t>(len_max))),
                                        target - placed);
        const int64_t start = static_cast<int64_t>(rng.integer(0, static_cast<uint64_t>(frames - len)));
        bool free = true;
        for (int64_t i = start; i < start + len; ++i)
            if (labels[static_cast<std::size_t>(i)]) free = false;
        if (!free) continue;
        for (int64_t i = start; i < start + len; ++i) labels[static_cast<std::size_t>(i)] = 1;
        placed += len;
    }
    return labels;
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& config, uint64_t seed, const fs::path& out_dir) {
    if (config.modalities.empty()) throw ConfigError("synthetic generator needs >= 1 modality");
    if (config.anomaly_rate < 0.0 || config.anomaly_rate > 1.0)
        throw ConfigError("anomaly rate must be in [0,1], got " +
                          std::to_string(config.anomaly_rate));
    for (int64_t idx : config.anomalous_modalities)
        if (idx < 0 || idx >= static_cast<int64_t>(config.modalities.size()))
            throw ConfigError("anomalous modality index out of range: " + std::to_string(idx));

    fs::create_directories(out_dir / "train");
    fs::create_directories(out_dir / "test");
    Rng rng(seed);

    double normal_energy_sum = 0.0, anomalous_energy_sum = 0.0;
    int64_t normal_frames = 0, anomalous_frames = 0;

    auto generate_split = [&](const std::string& split, int64_t video_count, bool with_anomalies) {
        DatasetManifest manifest;
        manifest.split = split;
        for (int64_t v = 0; v < video_count; ++v) {
            const std::string video_id = split + "_v" + std::to_string(v);
            std::vector<int> labels(static_cast<std::size_t>(config.frames_per_video), 0);
            if (with_anomalies) {
                const int64_t target = static_cast<int64_t>(
                    std::llround(config.anomaly_rate *
                                 static_cast<double>(config.frames_per_video)));
                labels = place_episodes(config.frames_per_video, target, config.episode_min,
                                        config.episode_max, rng);
            }
            VideoEntry entry;
            entry.video_id = video_id;
            entry.frames = config.frames_per_video;

            for (std::size_t mi = 0; mi < config.modalities.size(); ++mi) {
                const SynthModality& mod = config.modalities[mi];
                const bool hit = std::find(config.anomalous_modalities.begin(),
                                           config.anomalous_modalities.end(),
                                           static_cast<int64_t>(mi)) !=
                                 config.anomalous_modalities.end();
                std::vector<ChannelProcess> proc;
                for (int64_t c = 0; c < mod.channels; ++c) proc.push_back(sample_process(rng));

                std::vector<double> data;
                data.reserve(static_cast<std::size_t>(config.frames_per_video * mod.channels *
                                                      mod.height * mod.width));
                for (int64_t t = 0; t < config.frames_per_video; ++t) {
                    const bool anom = labels[static_cast<std::size_t>(t)] == 1 && hit;
                    for (int64_t c = 0; c < mod.channels; ++c)
                        for (int64_t h = 0; h < mod.height; ++h)
                            for (int64_t w = 0; w < mod.width; ++w) {
                                double x = normal_value(proc[static_cast<std::size_t>(c)], t, h, w,
                                                        mod.height, mod.width);
                                if (anom)
                                    x = config.anomaly_amplitude * x +
                                        config.anomaly_texture * static_cast<double>((h + w) % 2);
                                x += config.noise * rng.normal();
                                data.push_back(std::max(0.0, x));
                            }
                }

                FeatureClip clip;
                clip.modality_name = mod.name;
                clip.video_id = video_id;
                clip.frame_start = 0;
                clip.extractor_tag = "synthetic";
                clip.maps = Tensor({config.frames_per_video, mod.channels, mod.height, mod.width},
                                   std::move(data));

                // track per-frame energy separation for the margin check
                const int64_t plane = mod.channels * mod.height * mod.width;
                for (int64_t t = 0; t < config.frames_per_video; ++t) {
                    double e = 0.0;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double x = clip.maps[t * plane + i];
                        e += x * x;
                    }
                    e /= static_cast<double>(plane);
                    if (labels[static_cast<std::size_t>(t)] == 1)
                        anomalous_energy_sum += e;
                    else
                        normal_energy_sum += e;
                }

                const std::string rel = split + "/" + video_id + "_" + mod.name + ".mafc";
                write_feature_clip(clip, out_dir / rel);
                entry.feature_paths[mod.name] = rel;
            }
            for (int l : labels) {
                normal_frames += (l == 0) ? 1 : 0;
                anomalous_frames += (l == 1) ? 1 : 0;
            }
            if (with_anomalies) {
                const std::string rel = split + "/" + video_id + ".labels";
                write_labels(labels, out_dir / rel);
                entry.label_path = rel;
            }
            manifest.videos.push_back(std::move(entry));
        }
        return manifest;
    };

    DatasetManifest train = generate_split("train", config.train_videos, false);
    DatasetManifest test = generate_split("test", config.test_videos, true);

    if (anomalous_frames > 0) {
        const int64_t mods = static_cast<int64_t>(config.modalities.size());
        const double mean_normal = normal_energy_sum / static_cast<double>(normal_frames * mods);
        const double mean_anomalous =
            anomalous_energy_sum / static_cast<double>(anomalous_frames * mods);
        if (mean_anomalous - mean_normal < config.energy_margin)
            throw NumericError("synthetic separation margin not met: anomalous mean energy " +
                               std::to_string(mean_anomalous) + " vs normal " +
                               std::to_string(mean_normal));
    }

    SynthResult res;
    res.train_manifest = out_dir / "train_manifest.json";
    res.test_manifest = out_dir / "test_manifest.json";
    write_manifest(train, res.train_manifest);
    write_manifest(test, res.test_manifest);
    return res;
}

}  // namespace vad
