#include "vad/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "vad/checkpoint.hpp"

namespace vad {

namespace fs = std::filesystem;

namespace {

// Seed offsets per component, so one config seed drives the whole run.
constexpr uint64_t kSynthSeedOffset = 100;
constexpr uint64_t kCaeSeedOffset = 200;
constexpr uint64_t kSvddSeedOffset = 300;

BranchSpec branch_spec_for(const RunConfig& cfg, int64_t in_channels) {
    BranchSpec spec;
    spec.in_channels = in_channels;
    spec.widths = cfg.cae_widths;
    spec.downsample.assign(cfg.cae_downsample.begin(), cfg.cae_downsample.end());
    return spec;
}

LoadedDataset load_split(const RunConfig& cfg, const fs::path& manifest_path) {
    if (!fs::exists(manifest_path))
        throw DataError("manifest not found: " + manifest_path.string());
    DatasetManifest manifest = read_manifest(manifest_path);
    return load_dataset(manifest, manifest_path.parent_path(), cfg.common_height,
                        cfg.common_width);
}

// Depth-0 fused map with the initial balanced fusion weights (1/m each).
std::vector<Tensor> fuse_frames(const LoadedDataset& ds) {
    const double w = 1.0 / static_cast<double>(ds.modality_names.size());
    std::vector<Tensor> fused;
    fused.reserve(ds.samples.size());
    for (const AlignedSample& s : ds.samples) {
        std::vector<double> acc(s.maps.front().data().size(), 0.0);
        for (const Tensor& m : s.maps)
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * m[static_cast<int64_t>(i)];
        fused.emplace_back(s.maps.front().shape(), std::move(acc));
    }
    return fused;
}

int64_t check_uniform_channels(const LoadedDataset& ds) {
    const int64_t ch = ds.channels.front();
    for (std::size_t k = 0; k < ds.channels.size(); ++k)
        if (ds.channels[k] != ch)
            throw DataError("modality '" + ds.modality_names[k] + "' has " +
                            std::to_string(ds.channels[k]) + " channels, expected " +
                            std::to_string(ch) + " (depth-0 fusion needs equal shapes)");
    return ch;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

SynthResult run_synth(const RunConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    return generate_synthetic(cfg.synth, cfg.seed + kSynthSeedOffset, cfg.data_dir());
}

std::vector<double> run_pretrain(const RunConfig& cfg) {
    cfg.validate();
    LoadedDataset train = load_split(cfg, cfg.train_manifest_path());
    const int64_t channels = check_uniform_channels(train);
    std::vector<Tensor> fused = fuse_frames(train);

    Rng rng(cfg.seed + kCaeSeedOffset);
    CaeModel model = CaeModel::kaiming(branch_spec_for(cfg, channels), rng);
    PretrainConfig pc;
    pc.epochs = cfg.pretrain_epochs;
    pc.batch_size = cfg.batch_size;
    pc.learning_rate = cfg.learning_rate;
    pc.weight_decay = cfg.weight_decay;
    pc.seed = cfg.seed + kCaeSeedOffset;
    PretrainResult result = pretrain(model, fused, pc);

    fs::create_directories(cfg.out_dir);
    Checkpoint ckpt;
    ckpt.header = {{"kind", "cae"}, {"epoch", cfg.pretrain_epochs}, {"seed", cfg.seed}};
    capture_state(model, ckpt);
    save_checkpoint(ckpt, cfg.cae_checkpoint());

    std::ofstream os(cfg.pretrain_loss_csv(), std::ios::trunc);
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        os << e + 1 << "," << format_double(result.epoch_loss[e]) << "\n";
    return result.epoch_loss;
}

FinetuneHistory run_finetune(const RunConfig& cfg) {
    cfg.validate();
    if (!fs::exists(cfg.cae_checkpoint()))
        throw DataError("CAE checkpoint not found: " + cfg.cae_checkpoint().string());
    LoadedDataset train = load_split(cfg, cfg.train_manifest_path());
    const int64_t channels = check_uniform_channels(train);
    const int64_t m = static_cast<int64_t>(train.modality_names.size());

    Rng rng(cfg.seed + kSvddSeedOffset);
    CaeModel cae = CaeModel::kaiming(branch_spec_for(cfg, channels), rng);
    restore_state(cae, load_checkpoint(cfg.cae_checkpoint()));

    SvddConfig sc;
    sc.lambda = cfg.lambda;
    sc.epochs = cfg.finetune_epochs;
    sc.batch_size = cfg.batch_size;
    sc.learning_rate = cfg.learning_rate;
    sc.center_mode = cfg.center_mode;
    sc.seed = cfg.seed + kSvddSeedOffset;
    AnomalyModel model = AnomalyModel::from_pretrained(cae.encoder, m, sc, rng);
    model.centers = init_centers(model, train.samples, cfg.batch_size);
    FinetuneHistory hist = finetune(model, train.samples);

    Checkpoint ckpt;
    ckpt.header = {{"kind", "anomaly"},
                   {"epoch", cfg.finetune_epochs},
                   {"seed", cfg.seed},
                   {"modality_names", train.modality_names}};
    capture_state(model, ckpt);
    save_checkpoint(ckpt, cfg.model_checkpoint());

    std::ofstream os(cfg.finetune_loss_csv(), std::ios::trunc);
    os << "epoch,central";
    for (int64_t k = 0; k < m; ++k) os << ",branch" << k;
    os << ",regularization\n";
    for (std::size_t e = 0; e < hist.central.size(); ++e) {
        os << e + 1 << "," << format_double(hist.central[e]);
        for (double b : hist.branches[e]) os << "," << format_double(b);
        os << "," << format_double(hist.regularization[e]) << "\n";
    }
    return hist;
}

void run_score(const RunConfig& cfg) {
    cfg.validate();
    if (!fs::exists(cfg.model_checkpoint()))
        throw DataError("model checkpoint not found: " + cfg.model_checkpoint().string());
    LoadedDataset test = load_split(cfg, cfg.test_manifest_path());
    const int64_t channels = check_uniform_channels(test);
    const int64_t m = static_cast<int64_t>(test.modality_names.size());

    Checkpoint ckpt = load_checkpoint(cfg.model_checkpoint());
    if (ckpt.header.contains("modality_names")) {
        const auto names = ckpt.header.at("modality_names").get<std::vector<std::string>>();
        if (names != test.modality_names)
            throw DataError("modality set mismatch between model and manifest");
    }

    Rng rng(cfg.seed + kSvddSeedOffset);
    SvddConfig sc;
    sc.center_mode = cfg.center_mode;
    AnomalyModel model;
    model.config = sc;
    model.fusion = FusionBlock::kaiming(m, branch_spec_for(cfg, channels), rng);
    restore_state(model, ckpt);

    // stable order: by video id, then frame
    std::stable_sort(test.samples.begin(), test.samples.end(),
                     [](const AlignedSample& a, const AlignedSample& b) {
                         return a.video_id != b.video_id ? a.video_id < b.video_id
                                                         : a.frame_index < b.frame_index;
                     });
    std::vector<double> scores = score_batch(model, test.samples, cfg.batch_size);

    std::ofstream os(cfg.scores_csv(), std::ios::trunc);
    if (!os) throw DataError("cannot open " + cfg.scores_csv().string() + " for writing");
    os << "video_id,frame_index,score,label\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const AlignedSample& s = test.samples[i];
        os << s.video_id << "," << s.frame_index << "," << format_double(scores[i]) << ","
           << s.label << "\n";
    }
}

std::vector<ScoreSeries> read_scores_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open scores CSV " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "video_id,frame_index,score,label")
        throw DataError("bad scores CSV header in " + path.string());
    std::vector<ScoreSeries> series;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string fields[4];
        std::size_t start = 0;
        int nf = 0;
        for (; nf < 4; ++nf) {
            const auto comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields[nf] = line.substr(start);
                ++nf;
                break;
            }
            fields[nf] = line.substr(start, comma - start);
            start = comma + 1;
        }
        if (nf != 4)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        try {
            const int64_t frame = std::stoll(fields[1]);
            const double sc = std::stod(fields[2]);
            const int label = std::stoi(fields[3]);
            if (series.empty() || series.back().video_id != fields[0]) {
                series.push_back({fields[0], {}, {}, {}});
            }
            series.back().frame_index.push_back(frame);
            series.back().scores.push_back(sc);
            series.back().labels.push_back(label);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        }
    }
    if (series.empty()) throw DataError("scores CSV " + path.string() + " has no rows");
    return series;
}

AucReport run_eval(const RunConfig& cfg) {
    cfg.validate();
    std::vector<ScoreSeries> series = read_scores_csv(cfg.scores_csv());
    for (const ScoreSeries& s : series)
        for (int l : s.labels)
            if (l == -1)
                throw DataError("no ground truth: video " + s.video_id +
                                " has unlabeled scores (label -1)");
    AucReport report = evaluate(series);
    fs::create_directories(cfg.curves_dir());
    for (const ScoreSeries& s : series)
        export_curves(s, cfg.curves_dir() / (s.video_id + ".csv"));
    std::ofstream os(cfg.report_json(), std::ios::trunc);
    if (!os) throw DataError("cannot open " + cfg.report_json().string() + " for writing");
    os << report_to_json(report);
    return report;
}

}  // namespace vad
