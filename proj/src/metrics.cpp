#include "vad/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "vad/errors.hpp"

namespace vad {

std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw DataError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
    const std::size_t n = scores.size();
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw DataError("roc_auc: labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups; rank sum of positives gives U
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }
    const double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

AucReport evaluate(const std::vector<ScoreSeries>& series) {
    if (series.empty()) throw DataError("evaluate: no score series");
    AucReport report;
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    double auc_sum = 0.0;
    std::size_t defined = 0;
    for (const ScoreSeries& s : series) {
        for (std::size_t i = 1; i < s.frame_index.size(); ++i)
            if (s.frame_index[i] <= s.frame_index[i - 1])
                throw DataError("evaluate: frame indices of video " + s.video_id +
                                " are not strictly increasing");
        auto auc = roc_auc(s.scores, s.labels);
        report.per_video.push_back({s.video_id, auc});
        if (auc) {
            auc_sum += *auc;
            ++defined;
        }
        pooled_scores.insert(pooled_scores.end(), s.scores.begin(), s.scores.end());
        pooled_labels.insert(pooled_labels.end(), s.labels.begin(), s.labels.end());
    }
    if (defined > 0) report.average = auc_sum / static_cast<double>(defined);
    report.overall = roc_auc(pooled_scores, pooled_labels);
    return report;
}

void export_curves(const ScoreSeries& series, const std::filesystem::path& path) {
    const auto [lo_it, hi_it] = std::minmax_element(series.scores.begin(), series.scores.end());
    const double lo = series.scores.empty() ? 0.0 : *lo_it;
    const double range = series.scores.empty() ? 0.0 : *hi_it - lo;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << "frame_index,score,normalized_score,label\n";
    os.precision(17);
    for (std::size_t i = 0; i < series.scores.size(); ++i) {
        const double norm = range > 0.0 ? (series.scores[i] - lo) / range : 0.0;
        os << series.frame_index[i] << "," << series.scores[i] << "," << norm << ","
           << series.labels[i] << "\n";
    }
    if (!os) throw DataError("write failure on " + path.string());
}

std::string report_to_json(const AucReport& report) {
    nlohmann::json per_video = nlohmann::json::array();
    for (const auto& pv : report.per_video) {
        nlohmann::json entry = {{"video_id", pv.video_id}};
        if (pv.auc)
            entry["auc"] = *pv.auc;
        else
            entry["auc"] = nullptr;
        per_video.push_back(entry);
    }
    nlohmann::json root = {{"per_video", per_video},
                           {"average", report.average ? nlohmann::json(*report.average)
                                                      : nlohmann::json(nullptr)},
                           {"overall", report.overall ? nlohmann::json(*report.overall)
                                                      : nlohmann::json(nullptr)}};
    return root.dump(2) + "\n";
}

}  // namespace vad
