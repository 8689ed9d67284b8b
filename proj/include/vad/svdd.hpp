#pragma once

#include <vector>

#include "vad/cae.hpp"
#include "vad/feature_io.hpp"
#include "vad/fusion.hpp"

namespace vad {

// Hypercenters for the central branch and each modality branch.
struct CenterSet {
    Tensor central;               // matches central embedding shape
    std::vector<Tensor> branch;   // per modality
    bool frozen = true;
};

enum class CenterMode { FixedAfterInit, Learned };

struct SvddConfig {
    double lambda = 0.1;  // regularization weight, realized as optimizer weight decay
    int64_t epochs = 75;
    int64_t batch_size = 128;
    double learning_rate = 1e-2;
    CenterMode center_mode = CenterMode::FixedAfterInit;
    uint64_t seed = 0;
};

// Fusion block whose central branch starts from the pretrained CAE
// encoder, plus the hypercenters.
struct AnomalyModel {
    FusionBlock fusion;
    CenterSet centers;
    SvddConfig config;

    // Branch nets are freshly initialized; the central branch copies the
    // encoder's stacks (weights, norm scales and running stats).
    static AnomalyModel from_pretrained(const BranchNet& encoder, int64_t modalities,
                                        const SvddConfig& config, Rng& rng);
};

// Mean embedding of each branch over the training set (eval-mode norm),
// with near-zero coordinates pushed to +-guard to block the trivial
// zero-map solution.
CenterSet init_centers(AnomalyModel& model, const std::vector<AlignedSample>& train_samples,
                       int64_t batch_size = 32, double guard = 0.01);

// Data term of the regularized one-class loss: mean squared distance of a
// batch of embeddings to the center. The lambda regularization term enters
// through optimizer weight decay and is reported separately for logging.
Tensor svdd_data_term(Tape* tape, const Tensor& embeddings, const Tensor& center);

// Sum of central and per-modality data terms.
Tensor joint_data_term(Tape* tape, const FusionBlock::Output& out, const CenterSet& centers);

// (lambda/2) * sum of squared Frobenius norms of the decayed weights.
double regularization_term(const std::vector<ParamRef>& params, double lambda);

struct FinetuneHistory {
    std::vector<double> central;                // per-epoch mean central data term
    std::vector<std::vector<double>> branches;  // [epoch][modality]
    std::vector<double> regularization;         // per-epoch lambda/2 * ||W||^2
};

FinetuneHistory finetune(AnomalyModel& model, const std::vector<AlignedSample>& train_samples);

// Anomaly score: squared distance of the central embedding to its center.
// Branch embeddings and centers are not consulted at inference.
double score(AnomalyModel& model, const AlignedSample& sample);
std::vector<double> score_batch(AnomalyModel& model, const std::vector<AlignedSample>& samples,
                                int64_t batch_size = 32);

// Per-modality [B,C,H,W] batches from aligned samples.
std::vector<Tensor> stack_samples(const std::vector<AlignedSample>& samples,
                                  const std::vector<int64_t>& indices);

}  // namespace vad
