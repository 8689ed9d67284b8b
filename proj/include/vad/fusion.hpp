#pragma once

#include <string>
#include <vector>

#include "vad/nn.hpp"

namespace vad {

// conv -> batchnorm -> relu, the recipe used by every branch and by the
// autoencoder. Shift-free batch norm in encoder-side stacks.
struct ConvStack {
    Conv2d conv;
    BatchNorm2d bn;

    static ConvStack kaiming(int64_t in_ch, int64_t out_ch, Rng& rng, bool bn_shift);
    // Delta kernels and unit scale: identity on non-negative input in eval mode.
    static ConvStack identity(int64_t ch);

    Tensor forward(Tape* tape, const Tensor& x, bool train, bool transposed = false);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// Architecture of one CNN branch: channel widths per stack and whether a
// 2x bilinear downsample follows each stack.
struct BranchSpec {
    int64_t in_channels = 2;
    std::vector<int64_t> widths = {16, 32, 32, 64};
    std::vector<bool> downsample = {true, true, false, false};

    int64_t depth() const { return static_cast<int64_t>(widths.size()); }
    void validate() const;
    bool operator==(const BranchSpec&) const = default;
};

// One CNN branch (also serves as the CAE encoder).
struct BranchNet {
    BranchSpec spec;
    std::vector<ConvStack> stacks;

    static BranchNet kaiming(const BranchSpec& spec, Rng& rng, bool bn_shift);
    Tensor forward(Tape* tape, Tensor x, bool train);
    // Activation after stack i (and its downsample), for depth-wise fusion.
    Tensor forward_stack(Tape* tape, const Tensor& x, int64_t i, bool train);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

// CentralNet-style fusion: one branch per modality plus a central branch.
// The central input at depth 0 is a learnable weighted sum of the modality
// inputs; each deeper central layer consumes
//   alpha_C[i] * h_C[i] + sum_k alpha_M[i][k] * h_M[i][k].
struct FusionBlock {
    int64_t m = 0;  // modality count
    BranchNet central;
    std::vector<BranchNet> branches;
    std::vector<Tensor> alpha0;                // [m], depth-0 combine
    std::vector<Tensor> alpha_c;               // [L]
    std::vector<std::vector<Tensor>> alpha_m;  // [L][m]

    // alpha init: alpha_C = 1, alpha_M = 1/m (balanced start).
    static FusionBlock kaiming(int64_t modalities, const BranchSpec& spec, Rng& rng);

    struct Output {
        Tensor central;               // combined central activation after depth L
        std::vector<Tensor> branch;   // per-modality depth-L activations
        Tensor fused_input;           // the depth-0 combination
    };

    Tensor depth0_combine(Tape* tape, const std::vector<Tensor>& inputs) const;
    Output forward(Tape* tape, const std::vector<Tensor>& inputs, bool train);
    void collect(std::vector<ParamRef>& out);
};

// The weighted sum at one fusion depth; alphas = [alpha_C, alpha_M1..m].
Tensor central_combine(Tape* tape, const Tensor& h_central, const std::vector<Tensor>& branch_acts,
                       const std::vector<Tensor>& alphas);

}  // namespace vad
