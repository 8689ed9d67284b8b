#include "vad/feature_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "vad/ops.hpp"

namespace vad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'A', 'F', 'C'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const fs::path& path, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw DataError("truncated " + std::string(what) + " in " + path.string());
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

}  // namespace

void write_feature_clip(const FeatureClip& clip, const fs::path& path) {
    if (clip.maps.shape().size() != 4)
        throw ShapeError("feature clip maps must be [T,C,H,W], got " +
                         shape_str(clip.maps.shape()));
    if (clip.frame_start < 0) throw DataError("frame_start must be non-negative");
    check_finite(clip.maps.data(), "feature clip payload");

    json header = {{"modality_name", clip.modality_name},
                   {"video_id", clip.video_id},
                   {"frame_start", clip.frame_start},
                   {"extractor_tag", clip.extractor_tag},
                   {"dims", clip.maps.shape()}};
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (double v : clip.maps.data()) put_f32(os, static_cast<float>(v));
    if (!os) throw DataError("write failure on " + path.string());
}

FeatureClip read_feature_clip(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open feature clip " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("bad magic in " + path.string());
    const uint32_t version = get_u32(is, path, "version");
    if (version != kVersion)
        throw DataError("version mismatch in " + path.string() + ": got " +
                        std::to_string(version) + ", expected " + std::to_string(kVersion));
    const uint32_t hlen = get_u32(is, path, "header length");
    std::string hs(hlen, '\0');
    if (!is.read(hs.data(), hlen)) throw DataError("truncated header in " + path.string());
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw DataError("malformed header JSON in " + path.string() + ": " + e.what());
    }

    FeatureClip clip;
    clip.modality_name = header.at("modality_name").get<std::string>();
    clip.video_id = header.at("video_id").get<std::string>();
    clip.frame_start = header.at("frame_start").get<int64_t>();
    clip.extractor_tag = header.at("extractor_tag").get<std::string>();
    Shape dims = header.at("dims").get<Shape>();
    if (dims.size() != 4) throw DataError("dims must have 4 entries in " + path.string());

    const int64_t numel = shape_numel(dims);
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (int64_t i = 0; i < numel; ++i) {
        unsigned char b[4];
        if (!is.read(reinterpret_cast<char*>(b), 4))
            throw DataError("payload length disagrees with dims " + shape_str(dims) + " in " +
                            path.string());
        uint32_t bits = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        data[static_cast<std::size_t>(i)] = static_cast<double>(f);
    }
    if (is.peek() != std::ifstream::traits_type::eof())
        throw DataError("payload length disagrees with dims " + shape_str(dims) + " in " +
                        path.string() + " (trailing bytes)");
    clip.maps = Tensor(std::move(dims), std::move(data));
    check_finite(clip.maps.data(), "feature clip payload");
    return clip;
}

std::vector<int> read_labels(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open label file " + path.string());
    std::vector<int> labels;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line == "0")
            labels.push_back(0);
        else if (line == "1")
            labels.push_back(1);
        else
            throw DataError("bad label line '" + line + "' in " + path.string());
    }
    return labels;
}

void write_labels(const std::vector<int>& labels, const fs::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    for (int l : labels) os << (l ? "1" : "0") << "\n";
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
    json videos = json::array();
    for (const VideoEntry& v : m.videos) {
        json features = json::object();
        for (const auto& [mod, p] : v.feature_paths) features[mod] = p;
        videos.push_back({{"video_id", v.video_id},
                          {"features", features},
                          {"labels", v.label_path.empty() ? "all-normal" : v.label_path},
                          {"frames", v.frames}});
    }
    json root = {{"split", m.split}, {"videos", videos}};
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os << root.dump(2) << "\n";
}

DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open manifest " + path.string());
    json root;
    try {
        is >> root;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.split = root.at("split").get<std::string>();
    std::vector<std::string> reference_mods;
    for (const json& jv : root.at("videos")) {
        VideoEntry v;
        v.video_id = jv.at("video_id").get<std::string>();
        for (const auto& [mod, p] : jv.at("features").items())
            v.feature_paths[mod] = p.get<std::string>();
        const std::string labels = jv.at("labels").get<std::string>();
        if (labels != "all-normal") v.label_path = labels;
        v.frames = jv.at("frames").get<int64_t>();
        std::vector<std::string> mods;
        for (const auto& [mod, p] : v.feature_paths) mods.push_back(mod);
        if (reference_mods.empty())
            reference_mods = mods;
        else if (mods != reference_mods)
            throw DataError("video " + v.video_id + " lists a different modality set in " +
                            path.string());
        m.videos.push_back(std::move(v));
    }
    if (m.videos.empty()) throw DataError("manifest " + path.string() + " lists no videos");
    return m;
}

AlignedSample align_sample(const std::vector<FeatureClip>& clips, int64_t frame_index,
                           int64_t target_h, int64_t target_w) {
    if (clips.empty()) throw DataError("align_sample: empty modality set");
    AlignedSample out;
    out.video_id = clips.front().video_id;
    out.frame_index = frame_index;
    for (const FeatureClip& clip : clips) {
        if (clip.video_id != out.video_id)
            throw DataError("align_sample: mismatched video ids '" + clip.video_id + "' vs '" +
                            out.video_id + "'");
        const Shape& s = clip.maps.shape();
        const int64_t local = frame_index - clip.frame_start;
        if (local < 0 || local >= s[0])
            throw DataError("align_sample: frame " + std::to_string(frame_index) +
                            " outside clip range of modality " + clip.modality_name);
        const int64_t plane = s[1] * s[2] * s[3];
        std::vector<double> frame(clip.maps.data().begin() + local * plane,
                                  clip.maps.data().begin() + (local + 1) * plane);
        Tensor t({1, s[1], s[2], s[3]}, std::move(frame));
        Tensor resized = bilinear_resize(nullptr, t, target_h, target_w);
        out.maps.emplace_back(Shape{s[1], target_h, target_w},
                              std::vector<double>(resized.data()));
    }
    return out;
}

LoadedDataset load_dataset(const DatasetManifest& manifest, const fs::path& base_dir,
                           int64_t target_h, int64_t target_w) {
    LoadedDataset ds;
    const bool is_train = manifest.split == "train";
    for (const VideoEntry& video : manifest.videos) {
        std::vector<FeatureClip> clips;
        for (const auto& [mod, rel] : video.feature_paths) {
            fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base_dir / rel;
            clips.push_back(read_feature_clip(p));
            if (clips.back().modality_name != mod)
                throw DataError("modality name mismatch for " + p.string() + ": manifest says '" +
                                mod + "', file says '" + clips.back().modality_name + "'");
        }
        for (const FeatureClip& c : clips)
            if (c.maps.shape()[0] != video.frames)
                throw DataError("frame count mismatch in video " + video.video_id +
                                ": manifest says " + std::to_string(video.frames) +
                                ", modality " + c.modality_name + " has " +
                                std::to_string(c.maps.shape()[0]));

        if (ds.modality_names.empty()) {
            for (const FeatureClip& c : clips) {
                ds.modality_names.push_back(c.modality_name);
                ds.channels.push_back(c.maps.shape()[1]);
            }
            if (target_h == 0 || target_w == 0) {
                for (const FeatureClip& c : clips) {
                    ds.height = std::max(ds.height, c.maps.shape()[2]);
                    ds.width = std::max(ds.width, c.maps.shape()[3]);
                }
            } else {
                ds.height = target_h;
                ds.width = target_w;
            }
        }

        std::vector<int> labels;
        if (!video.label_path.empty()) {
            fs::path lp = fs::path(video.label_path).is_absolute() ? fs::path(video.label_path)
                                                                   : base_dir / video.label_path;
            labels = read_labels(lp);
            if (static_cast<int64_t>(labels.size()) != video.frames)
                throw DataError("label count mismatch for video " + video.video_id);
        }
        for (int64_t f = 0; f < video.frames; ++f) {
            AlignedSample s = align_sample(clips, f, ds.height, ds.width);
            s.label = labels.empty() ? (is_train ? 0 : -1) : labels[static_cast<std::size_t>(f)];
            if (is_train && s.label == 1)
                throw DataError("one-class premise violated: train video " + video.video_id +
                                " contains an anomalous label at frame " + std::to_string(f));
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace vad
