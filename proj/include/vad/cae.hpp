#pragma once

#include <vector>

#include "vad/fusion.hpp"

namespace vad {

// Mirror of a BranchNet: transposed convolutions with an upsample before
// each stack whose encoder counterpart downsampled after. Decoder batch
// norms keep their shift so reconstructions are not forced to zero mean.
struct DecoderNet {
    BranchSpec encoder_spec;
    std::vector<ConvStack> stacks;

    static DecoderNet mirror_of(const BranchSpec& encoder_spec, Rng& rng);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// Symmetric convolutional autoencoder: the encoder is a BranchNet so its
// weights can seed the anomaly detector's central branch directly.
struct CaeModel {
    BranchNet encoder;
    DecoderNet decoder;

    static CaeModel kaiming(const BranchSpec& spec, Rng& rng);

    struct Output {
        Tensor reconstruction;
        Tensor embedding;
    };
    Output forward(Tape* tape, const Tensor& x, bool train);
    void collect(std::vector<ParamRef>& out);
};

struct PretrainConfig {
    int64_t epochs = 100;
    int64_t batch_size = 128;
    double learning_rate = 1e-2;
    double weight_decay = 0.1;
    uint64_t seed = 0;
};

struct PretrainResult {
    std::vector<double> epoch_loss;  // mean reconstruction MSE per epoch
};

// Minimizes mean squared reconstruction error over the fused frames
// ([C,H,W] each) with Adam. Deterministic given the seed.
PretrainResult pretrain(CaeModel& model, const std::vector<Tensor>& fused_frames,
                        const PretrainConfig& config);

// Stack per-frame [C,H,W] tensors into one [B,C,H,W] batch.
Tensor stack_frames(const std::vector<Tensor>& frames, const std::vector<int64_t>& indices);

}  // namespace vad
