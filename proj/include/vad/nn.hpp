#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vad/init.hpp"
#include "vad/ops.hpp"
#include "vad/tensor.hpp"

namespace vad {

// Reference to a trainable tensor plus its weight-decay policy. Decay is
// applied to convolution weights only, never to normalization scales or
// fusion weights.
struct ParamRef {
    std::string name;
    Tensor* tensor;
    bool apply_weight_decay;
};

// Bias-free 3x3/stride-1/pad-1 convolutions are the default everywhere; a
// bias is never materialized in bias-free mode.
struct Conv2d {
    Tensor weight;  // [out_ch, in_ch, kh, kw]
    int stride = 1;
    int pad = 1;

    static Conv2d kaiming(int64_t out_ch, int64_t in_ch, int64_t k, Rng& rng, int stride = 1,
                          int pad = 1);
    // Delta kernel: passes each channel through unchanged (requires
    // out_ch == in_ch and odd kernel size).
    static Conv2d identity(int64_t ch, int64_t k);

    Tensor forward(Tape* tape, const Tensor& x) const { return conv2d(tape, x, weight, stride, pad); }
    Tensor forward_transposed(Tape* tape, const Tensor& x) const {
        return conv_transpose2d(tape, x, weight, stride, pad);
    }
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct BatchNorm2d {
    Tensor gamma;                // [C]
    std::optional<Tensor> beta;  // absent in shift-free mode
    std::vector<double> running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    // with_shift=false builds the shift-free variant used in the encoder.
    static BatchNorm2d make(int64_t channels, bool with_shift);

    Tensor forward(Tape* tape, const Tensor& x, bool train) {
        return train ? batchnorm2d_train(tape, x, gamma, beta, running_mean, running_var,
                                         momentum, eps)
                     : batchnorm2d_eval(tape, x, gamma, beta, running_mean, running_var, eps);
    }
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
};

struct AdamConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Adam with bias correction. Weight decay enters as an additive
// lambda*w term in the gradient before the moment updates, for parameters
// whose ParamRef opts in.
class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void step(const std::vector<ParamRef>& params);
    int64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace vad
