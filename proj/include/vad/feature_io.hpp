#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vad/tensor.hpp"

namespace vad {

// One modality's precomputed feature maps for a contiguous frame range of
// one video. Extractor networks run elsewhere; their outputs arrive as
// .mafc files.
struct FeatureClip {
    std::string modality_name;
    std::string video_id;
    int64_t frame_start = 0;
    std::string extractor_tag;
    Tensor maps;  // [T,C,H,W]
};

// File layout (little-endian):
//   "MAFC" | u32 version (=1) | u32 header length | header JSON | payload
// Header JSON: modality_name, video_id, frame_start, extractor_tag,
// dims [T,C,H,W]. Payload: T*C*H*W IEEE-754 binary32 values, row-major.
void write_feature_clip(const FeatureClip& clip, const std::filesystem::path& path);
FeatureClip read_feature_clip(const std::filesystem::path& path);

// Per-frame binary labels, one "0" or "1" line per frame.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);

struct VideoEntry {
    std::string video_id;
    std::map<std::string, std::string> feature_paths;  // modality -> file
    std::string label_path;  // empty means all-normal
    int64_t frames = 0;
};

struct DatasetManifest {
    std::string split;  // "train" or "test"
    std::vector<VideoEntry> videos;
};

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Per-frame stack of all modalities at a common spatial size.
struct AlignedSample {
    std::string video_id;
    int64_t frame_index = 0;
    std::vector<Tensor> maps;  // per modality, [C,H*,W*]
    int label = -1;            // 0 normal, 1 anomalous, -1 unknown
};

// Resize one frame's per-modality maps to (target_h, target_w). Clips must
// agree on video_id and cover the requested frame.
AlignedSample align_sample(const std::vector<FeatureClip>& clips, int64_t frame_index,
                           int64_t target_h, int64_t target_w);

struct LoadedDataset {
    std::vector<std::string> modality_names;
    std::vector<int64_t> channels;  // per modality
    int64_t height = 0, width = 0;  // common size after alignment
    std::vector<AlignedSample> samples;  // ordered by (video, frame)
};

// Load every frame of a manifest, aligned to the common size. When
// target_h/target_w are 0 the maximum extent across modalities is used.
// Train manifests are checked for the one-class premise: any anomalous
// label is an error.
LoadedDataset load_dataset(const DatasetManifest& manifest, const std::filesystem::path& base_dir,
                           int64_t target_h = 0, int64_t target_w = 0);

}  // namespace vad
