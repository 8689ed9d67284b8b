#include "vad/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'A', 'W', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const fs::path& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw DataError("truncated checkpoint " + path.string());
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    const std::string hs = ckpt.header.dump();
    put_u32(os, static_cast<uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    put_u32(os, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<uint32_t>(t.shape.size()));
        for (int64_t d : t.shape) put_u32(os, static_cast<uint32_t>(d));
        for (double v : t.data) {
            const float f = static_cast<float>(v);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(os, bits);
        }
    }
    if (!os) throw DataError("write failure on " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("bad magic in " + path.string());
    const uint32_t version = get_u32(is, path);
    if (version != kVersion)
        throw DataError("version mismatch in " + path.string() + ": got " +
                        std::to_string(version));
    const uint32_t hlen = get_u32(is, path);
    std::string hs(hlen, '\0');
    if (!is.read(hs.data(), hlen)) throw DataError("truncated header in " + path.string());
    Checkpoint ckpt;
    try {
        ckpt.header = json::parse(hs);
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint header in " + path.string() + ": " + e.what());
    }
    const uint32_t count = get_u32(is, path);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t nlen = get_u32(is, path);
        std::string name(nlen, '\0');
        if (!is.read(name.data(), nlen)) throw DataError("truncated name in " + path.string());
        const uint32_t ndim = get_u32(is, path);
        NamedTensor t;
        for (uint32_t d = 0; d < ndim; ++d)
            t.shape.push_back(static_cast<int64_t>(get_u32(is, path)));
        const int64_t numel = shape_numel(t.shape);
        t.data.resize(static_cast<std::size_t>(numel));
        for (int64_t k = 0; k < numel; ++k) {
            const uint32_t bits = get_u32(is, path);
            float f;
            std::memcpy(&f, &bits, 4);
            t.data[static_cast<std::size_t>(k)] = static_cast<double>(f);
        }
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }
    if (is.peek() != std::ifstream::traits_type::eof())
        throw DataError("trailing bytes after checkpoint payload in " + path.string());
    return ckpt;
}

json branch_spec_to_json(const BranchSpec& spec) {
    std::vector<int> down(spec.downsample.begin(), spec.downsample.end());
    return {{"in_channels", spec.in_channels}, {"widths", spec.widths}, {"downsample", down}};
}

BranchSpec branch_spec_from_json(const json& j) {
    BranchSpec spec;
    spec.in_channels = j.at("in_channels").get<int64_t>();
    spec.widths = j.at("widths").get<std::vector<int64_t>>();
    auto down = j.at("downsample").get<std::vector<int>>();
    spec.downsample.assign(down.begin(), down.end());
    spec.validate();
    return spec;
}

namespace {

void put_tensor(Checkpoint& ckpt, const std::string& name, const Shape& shape,
                const std::vector<double>& data) {
    ckpt.tensors[name] = NamedTensor{shape, data};
}

NamedTensor take_tensor(const Checkpoint& ckpt, const std::string& name, const Shape& expected) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape != expected)
        throw DataError("checkpoint tensor '" + name + "' has shape " +
                        shape_str(it->second.shape) + ", model expects " + shape_str(expected));
    return it->second;
}

void capture_stack(const ConvStack& s, const std::string& prefix, Checkpoint& ckpt) {
    put_tensor(ckpt, prefix + ".conv.weight", s.conv.weight.shape(), s.conv.weight.data());
    put_tensor(ckpt, prefix + ".bn.gamma", s.bn.gamma.shape(), s.bn.gamma.data());
    if (s.bn.beta) put_tensor(ckpt, prefix + ".bn.beta", s.bn.beta->shape(), s.bn.beta->data());
    const Shape c = {static_cast<int64_t>(s.bn.running_mean.size())};
    put_tensor(ckpt, prefix + ".bn.running_mean", c, s.bn.running_mean);
    put_tensor(ckpt, prefix + ".bn.running_var", c, s.bn.running_var);
}

void restore_stack(ConvStack& s, const std::string& prefix, const Checkpoint& ckpt) {
    s.conv.weight.assign(take_tensor(ckpt, prefix + ".conv.weight", s.conv.weight.shape()).data);
    s.bn.gamma.assign(take_tensor(ckpt, prefix + ".bn.gamma", s.bn.gamma.shape()).data);
    if (s.bn.beta) s.bn.beta->assign(take_tensor(ckpt, prefix + ".bn.beta", s.bn.beta->shape()).data);
    const Shape c = {static_cast<int64_t>(s.bn.running_mean.size())};
    s.bn.running_mean = take_tensor(ckpt, prefix + ".bn.running_mean", c).data;
    s.bn.running_var = take_tensor(ckpt, prefix + ".bn.running_var", c).data;
}

}  // namespace

void capture_state(const BranchNet& net, const std::string& prefix, Checkpoint& ckpt) {
    for (std::size_t i = 0; i < net.stacks.size(); ++i)
        capture_stack(net.stacks[i], prefix + ".stack" + std::to_string(i), ckpt);
}

void restore_state(BranchNet& net, const std::string& prefix, const Checkpoint& ckpt) {
    for (std::size_t i = 0; i < net.stacks.size(); ++i)
        restore_stack(net.stacks[i], prefix + ".stack" + std::to_string(i), ckpt);
}

void capture_state(const DecoderNet& net, const std::string& prefix, Checkpoint& ckpt) {
    for (std::size_t i = 0; i < net.stacks.size(); ++i)
        capture_stack(net.stacks[i], prefix + ".stack" + std::to_string(i), ckpt);
}

void restore_state(DecoderNet& net, const std::string& prefix, const Checkpoint& ckpt) {
    for (std::size_t i = 0; i < net.stacks.size(); ++i)
        restore_stack(net.stacks[i], prefix + ".stack" + std::to_string(i), ckpt);
}

void capture_state(const CaeModel& model, Checkpoint& ckpt) {
    ckpt.header["architecture"] = branch_spec_to_json(model.encoder.spec);
    capture_state(model.encoder, "cae.encoder", ckpt);
    capture_state(model.decoder, "cae.decoder", ckpt);
}

void restore_state(CaeModel& model, const Checkpoint& ckpt) {
    const BranchSpec spec = branch_spec_from_json(ckpt.header.at("architecture"));
    if (!(spec == model.encoder.spec))
        throw DataError(
            "architecture mismatch: checkpoint " + branch_spec_to_json(spec).dump() +
            " vs model " + branch_spec_to_json(model.encoder.spec).dump());
    restore_state(model.encoder, "cae.encoder", ckpt);
    restore_state(model.decoder, "cae.decoder", ckpt);
}

void capture_state(const AnomalyModel& model, Checkpoint& ckpt) {
    ckpt.header["architecture"] = branch_spec_to_json(model.fusion.central.spec);
    ckpt.header["modalities"] = model.fusion.m;
    capture_state(model.fusion.central, "fusion.central", ckpt);
    for (std::size_t k = 0; k < model.fusion.branches.size(); ++k)
        capture_state(model.fusion.branches[k], "fusion.branch" + std::to_string(k), ckpt);
    auto scalar_shape = Shape{1};
    for (std::size_t k = 0; k < model.fusion.alpha0.size(); ++k)
        put_tensor(ckpt, "fusion.alpha0.m" + std::to_string(k), scalar_shape,
                   model.fusion.alpha0[k].data());
    for (std::size_t i = 0; i < model.fusion.alpha_c.size(); ++i) {
        put_tensor(ckpt, "fusion.alpha_c.d" + std::to_string(i), scalar_shape,
                   model.fusion.alpha_c[i].data());
        for (std::size_t k = 0; k < model.fusion.alpha_m[i].size(); ++k)
            put_tensor(ckpt, "fusion.alpha_m.d" + std::to_string(i) + ".m" + std::to_string(k),
                       scalar_shape, model.fusion.alpha_m[i][k].data());
    }
    if (model.centers.central.defined()) {
        put_tensor(ckpt, "center.central", model.centers.central.shape(),
                   model.centers.central.data());
        for (std::size_t k = 0; k < model.centers.branch.size(); ++k)
            put_tensor(ckpt, "center.branch" + std::to_string(k),
                       model.centers.branch[k].shape(), model.centers.branch[k].data());
    }
}

void restore_state(AnomalyModel& model, const Checkpoint& ckpt) {
    const BranchSpec spec = branch_spec_from_json(ckpt.header.at("architecture"));
    if (!(spec == model.fusion.central.spec))
        throw DataError(
            "architecture mismatch: checkpoint " + branch_spec_to_json(spec).dump() +
            " vs model " + branch_spec_to_json(model.fusion.central.spec).dump());
    const auto m = ckpt.header.at("modalities").get<int64_t>();
    if (m != model.fusion.m)
        throw DataError("modality count mismatch: checkpoint has " + std::to_string(m) +
                        ", model has " + std::to_string(model.fusion.m));
    restore_state(model.fusion.central, "fusion.central", ckpt);
    for (std::size_t k = 0; k < model.fusion.branches.size(); ++k)
        restore_state(model.fusion.branches[k], "fusion.branch" + std::to_string(k), ckpt);
    const Shape scalar_shape{1};
    for (std::size_t k = 0; k < model.fusion.alpha0.size(); ++k)
        model.fusion.alpha0[k].assign(
            take_tensor(ckpt, "fusion.alpha0.m" + std::to_string(k), scalar_shape).data);
    for (std::size_t i = 0; i < model.fusion.alpha_c.size(); ++i) {
        model.fusion.alpha_c[i].assign(
            take_tensor(ckpt, "fusion.alpha_c.d" + std::to_string(i), scalar_shape).data);
        for (std::size_t k = 0; k < model.fusion.alpha_m[i].size(); ++k)
            model.fusion.alpha_m[i][k].assign(
                take_tensor(ckpt,
                            "fusion.alpha_m.d" + std::to_string(i) + ".m" + std::to_string(k),
                            scalar_shape)
                    .data);
    }
    if (ckpt.tensors.count("center.central")) {
        const NamedTensor& c = ckpt.tensors.at("center.central");
        model.centers.central = Tensor(c.shape, c.data);
        model.centers.branch.clear();
        for (std::size_t k = 0;; ++k) {
            auto it = ckpt.tensors.find("center.branch" + std::to_string(k));
            if (it == ckpt.tensors.end()) break;
            model.centers.branch.emplace_back(it->second.shape, it->second.data);
        }
        model.centers.frozen = model.config.center_mode == CenterMode::FixedAfterInit;
    }
}

}  // namespace vad
