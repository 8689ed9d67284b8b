#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vad {

// Frame-level ROC AUC via the Mann-Whitney statistic with 0.5 credit per
// tied pair, computed from average ranks in O(N log N). Returns nullopt
// when only one class is present.
std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ScoreSeries {
    std::string video_id;
    std::vector<int64_t> frame_index;  // strictly increasing
    std::vector<double> scores;
    std::vector<int> labels;  // 0/1
};

struct AucReport {
    struct PerVideo {
        std::string video_id;
        std::optional<double> auc;  // undefined for single-class videos
    };
    std::vector<PerVideo> per_video;
    std::optional<double> average;  // mean over defined per-video AUCs
    std::optional<double> overall;  // pooled over all frames
};

AucReport evaluate(const std::vector<ScoreSeries>& series);

// CSV "frame_index,score,normalized_score,label". The normalized column is
// per-video min-max to [0,1]; a constant-score video normalizes to 0.
void export_curves(const ScoreSeries& series, const std::filesystem::path& path);

std::string report_to_json(const AucReport& report);

}  // namespace vad
