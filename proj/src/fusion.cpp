#include "vad/fusion.hpp"

#include <algorithm>

namespace vad {

ConvStack ConvStack::kaiming(int64_t in_ch, int64_t out_ch, Rng& rng, bool bn_shift) {
    ConvStack s;
    s.conv = Conv2d::kaiming(out_ch, in_ch, 3, rng);
    s.bn = BatchNorm2d::make(out_ch, bn_shift);
    return s;
}

ConvStack ConvStack::identity(int64_t ch) {
    ConvStack s;
    s.conv = Conv2d::identity(ch, 3);
    s.bn = BatchNorm2d::make(ch, false);
    return s;
}

Tensor ConvStack::forward(Tape* tape, const Tensor& x, bool train, bool transposed) {
    Tensor y = transposed ? conv.forward_transposed(tape, x) : conv.forward(tape, x);
    y = bn.forward(tape, y, train);
    return relu(tape, y);
}

void ConvStack::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    conv.collect(prefix + ".conv", out);
    bn.collect(prefix + ".bn", out);
}

void BranchSpec::validate() const {
    if (widths.empty()) throw ConfigError("branch spec needs at least one stack");
    if (downsample.size() != widths.size())
        throw ConfigError("branch spec downsample flags must match stack count");
    if (in_channels < 1) throw ConfigError("branch spec needs positive input channels");
}

BranchNet BranchNet::kaiming(const BranchSpec& spec, Rng& rng, bool bn_shift) {
    spec.validate();
    BranchNet net;
    net.spec = spec;
    int64_t c = spec.in_channels;
    for (int64_t w : spec.widths) {
        net.stacks.push_back(ConvStack::kaiming(c, w, rng, bn_shift));
        c = w;
    }
    return net;
}

Tensor BranchNet::forward_stack(Tape* tape, const Tensor& x, int64_t i, bool train) {
    Tensor y = stacks[static_cast<std::size_t>(i)].forward(tape, x, train);
    if (spec.downsample[static_cast<std::size_t>(i)]) {
        const int64_t h = std::max<int64_t>(1, y.shape()[2] / 2);
        const int64_t w = std::max<int64_t>(1, y.shape()[3] / 2);
        y = bilinear_resize(tape, y, h, w);
    }
    return y;
}

Tensor BranchNet::forward(Tape* tape, Tensor x, bool train) {
    for (int64_t i = 0; i < spec.depth(); ++i) x = forward_stack(tape, x, i, train);
    return x;
}

void BranchNet::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < stacks.size(); ++i)
        stacks[i].collect(prefix + ".stack" + std::to_string(i), out);
}

Tensor central_combine(Tape* tape, const Tensor& h_central, const std::vector<Tensor>& branch_acts,
                       const std::vector<Tensor>& alphas) {
    if (alphas.size() != branch_acts.size() + 1)
        throw ShapeError("central_combine: expected " + std::to_string(branch_acts.size() + 1) +
                         " fusion weights, got " + std::to_string(alphas.size()));
    std::vector<Tensor> terms;
    terms.push_back(h_central);
    for (const Tensor& b : branch_acts) terms.push_back(b);
    return weighted_sum(tape, alphas, terms);
}

FusionBlock FusionBlock::kaiming(int64_t modalities, const BranchSpec& spec, Rng& rng) {
    if (modalities < 1) throw ConfigError("fusion block needs at least one modality");
    FusionBlock fb;
    fb.m = modalities;
    fb.central = BranchNet::kaiming(spec, rng, /*bn_shift=*/false);
    for (int64_t k = 0; k < modalities; ++k)
        fb.branches.push_back(BranchNet::kaiming(spec, rng, /*bn_shift=*/false));
    const double am = 1.0 / static_cast<double>(modalities);
    for (int64_t k = 0; k < modalities; ++k) fb.alpha0.push_back(Tensor::param({1}, {am}));
    for (int64_t i = 0; i < spec.depth(); ++i) {
        fb.alpha_c.push_back(Tensor::param({1}, {1.0}));
        std::vector<Tensor> row;
        for (int64_t k = 0; k < modalities; ++k) row.push_back(Tensor::param({1}, {am}));
        fb.alpha_m.push_back(std::move(row));
    }
    return fb;
}

Tensor FusionBlock::depth0_combine(Tape* tape, const std::vector<Tensor>& inputs) const {
    if (static_cast<int64_t>(inputs.size()) != m)
        throw ShapeError("fusion forward: expected " + std::to_string(m) + " modalities, got " +
                         std::to_string(inputs.size()));
    return weighted_sum(tape, alpha0, inputs);
}

FusionBlock::Output FusionBlock::forward(Tape* tape, const std::vector<Tensor>& inputs,
                                         bool train) {
    Output out;
    out.fused_input = depth0_combine(tape, inputs);
    Tensor c = out.fused_input;
    std::vector<Tensor> h = inputs;
    const int64_t L = central.spec.depth();
    for (int64_t i = 0; i < L; ++i) {
        Tensor hc = central.forward_stack(tape, c, i, train);
        for (int64_t k = 0; k < m; ++k)
            h[static_cast<std::size_t>(k)] = branches[static_cast<std::size_t>(k)].forward_stack(
                tape, h[static_cast<std::size_t>(k)], i, train);
        std::vector<Tensor> alphas;
        alphas.push_back(alpha_c[static_cast<std::size_t>(i)]);
        for (const Tensor& a : alpha_m[static_cast<std::size_t>(i)]) alphas.push_back(a);
        c = central_combine(tape, hc, h, alphas);
    }
    out.central = c;
    out.branch = h;
    return out;
}

void FusionBlock::collect(std::vector<ParamRef>& out) {
    central.collect("fusion.central", out);
    for (std::size_t k = 0; k < branches.size(); ++k)
        branches[k].collect("fusion.branch" + std::to_string(k), out);
    for (std::size_t k = 0; k < alpha0.size(); ++k)
        out.push_back({"fusion.alpha0.m" + std::to_string(k), &alpha0[k], false});
    for (std::size_t i = 0; i < alpha_c.size(); ++i) {
        out.push_back({"fusion.alpha_c.d" + std::to_string(i), &alpha_c[i], false});
        for (std::size_t k = 0; k < alpha_m[i].size(); ++k)
            out.push_back(
                {"fusion.alpha_m.d" + std::to_string(i) + ".m" + std::to_string(k),
                 &alpha_m[i][k], false});
    }
}

}  // namespace vad
