#include "vad/cae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vad {

DecoderNet DecoderNet::mirror_of(const BranchSpec& spec, Rng& rng) {
    spec.validate();
    DecoderNet dec;
    dec.encoder_spec = spec;
    const int64_t L = spec.depth();
    for (int64_t i = 0; i < L; ++i) {
        const int64_t in_ch = spec.widths[static_cast<std::size_t>(L - 1 - i)];
        const int64_t out_ch =
            i == L - 1 ? spec.in_channels : spec.widths[static_cast<std::size_t>(L - 2 - i)];
        ConvStack s;
        // transposed conv weights are [in_ch, out_ch, k, k]
        s.conv.weight = kaiming_init({in_ch, out_ch, 3, 3}, in_ch * 9, rng);
        s.bn = BatchNorm2d::make(out_ch, /*with_shift=*/true);
        dec.stacks.push_back(std::move(s));
    }
    return dec;
}

void DecoderNet::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < stacks.size(); ++i)
        stacks[i].collect(prefix + ".stack" + std::to_string(i), out);
}

CaeModel CaeModel::kaiming(const BranchSpec& spec, Rng& rng) {
    CaeModel m;
    m.encoder = BranchNet::kaiming(spec, rng, /*bn_shift=*/false);
    m.decoder = DecoderNet::mirror_of(spec, rng);
    return m;
}

CaeModel::Output CaeModel::forward(Tape* tape, const Tensor& x, bool train) {
    const BranchSpec& spec = encoder.spec;
    const int64_t L = spec.depth();
    if (x.shape().size() != 4 || x.shape()[1] != spec.in_channels)
        throw ShapeError("cae forward: input " + shape_str(x.shape()) + " does not match " +
                         std::to_string(spec.in_channels) + " input channels");

    // Encoder, remembering the spatial size consumed by each downsample so
    // the decoder can invert it exactly.
    std::vector<std::pair<int64_t, int64_t>> pre_down(static_cast<std::size_t>(L), {0, 0});
    Tensor h = x;
    for (int64_t i = 0; i < L; ++i) {
        h = encoder.stacks[static_cast<std::size_t>(i)].forward(tape, h, train);
        pre_down[static_cast<std::size_t>(i)] = {h.shape()[2], h.shape()[3]};
        if (spec.downsample[static_cast<std::size_t>(i)]) {
            const int64_t th = std::max<int64_t>(1, h.shape()[2] / 2);
            const int64_t tw = std::max<int64_t>(1, h.shape()[3] / 2);
            h = bilinear_resize(tape, h, th, tw);
        }
    }
    Output out;
    out.embedding = h;

    Tensor r = h;
    for (int64_t i = 0; i < L; ++i) {
        const int64_t enc_i = L - 1 - i;
        if (spec.downsample[static_cast<std::size_t>(enc_i)]) {
            const auto [th, tw] = pre_down[static_cast<std::size_t>(enc_i)];
            r = bilinear_resize(tape, r, th, tw);
        }
        r = decoder.stacks[static_cast<std::size_t>(i)].forward(tape, r, train,
                                                                /*transposed=*/true);
    }
    if (r.shape() != x.shape())
        throw ShapeError("cae reconstruction shape " + shape_str(r.shape()) +
                         " does not match input " + shape_str(x.shape()));
    out.reconstruction = r;
    return out;
}

void CaeModel::collect(std::vector<ParamRef>& out) {
    encoder.collect("cae.encoder", out);
    decoder.collect("cae.decoder", out);
}

Tensor stack_frames(const std::vector<Tensor>& frames, const std::vector<int64_t>& indices) {
    if (indices.empty()) throw DataError("stack_frames: empty batch");
    const Shape& fs = frames[static_cast<std::size_t>(indices[0])].shape();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(shape_numel(fs)) * indices.size());
    for (int64_t idx : indices) {
        const Tensor& f = frames[static_cast<std::size_t>(idx)];
        if (f.shape() != fs) throw ShapeError("stack_frames: inconsistent frame shapes");
        data.insert(data.end(), f.data().begin(), f.data().end());
    }
    Shape bs = fs;
    bs.insert(bs.begin(), static_cast<int64_t>(indices.size()));
    return Tensor(std::move(bs), std::move(data));
}

PretrainResult pretrain(CaeModel& model, const std::vector<Tensor>& fused_frames,
                        const PretrainConfig& config) {
    if (fused_frames.empty()) throw DataError("pretrain: empty dataset");
    if (config.epochs < 1) throw ConfigError("pretrain: epochs must be >= 1");
    if (config.learning_rate < 0) throw ConfigError("pretrain: learning rate must be >= 0");

    std::vector<ParamRef> params;
    model.collect(params);
    Adam opt({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
    Rng shuffle_rng(config.seed + 1);

    const int64_t n = static_cast<int64_t>(fused_frames.size());
    std::vector<int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    PretrainResult result;
    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        double loss_sum = 0.0;
        int64_t frames_seen = 0;
        for (int64_t start = 0; start < n; start += config.batch_size) {
            const int64_t end = std::min(n, start + config.batch_size);
            std::vector<int64_t> batch(order.begin() + start, order.begin() + end);
            Tensor x = stack_frames(fused_frames, batch);

            Tape tape;
            for (ParamRef& p : params) p.tensor->zero_grad();
            auto out = model.forward(&tape, x, /*train=*/true);
            Tensor diff = sub(&tape, out.reconstruction, x);
            Tensor loss = scale(&tape, sum_squares(&tape, diff),
                                1.0 / static_cast<double>(x.size()));
            if (!std::isfinite(loss.item()))
                throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
            tape.backward(loss);
            opt.step(params);

            loss_sum += loss.item() * static_cast<double>(end - start);
            frames_seen += end - start;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(frames_seen));
    }
    return result;
}

}  // namespace vad
