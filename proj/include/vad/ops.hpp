#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "vad/tensor.hpp"

// Differentiable tensor operations. Every op takes an optional Tape*;
// passing nullptr runs the forward pass only (evaluation mode). Shapes
// are validated and non-finite outputs raise NumericError.

namespace vad {

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double s);

// Scalar sum of squares; gradient is 2a.
Tensor sum_squares(Tape* tape, const Tensor& a);

Tensor relu(Tape* tape, const Tensor& x);

// x: [N,Cin,H,W], w: [Cout,Cin,KH,KW]. Output [N,Cout,H',W'] with
// H' = (H + 2*pad - KH)/stride + 1; a fractional extent is an error.
Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, int stride, int pad);

// Exact adjoint of conv2d for the same weights and hyperparameters:
// x: [N,C1,H,W] with w: [C1,C2,KH,KW] produces [N,C2,H'',W''] where a
// conv2d of the output with (stride, pad) would yield the input shape.
Tensor conv_transpose2d(Tape* tape, const Tensor& x, const Tensor& w, int stride, int pad);

// Batch normalization over [N,C,H,W]. Train mode uses per-channel batch
// statistics (biased variance) and folds them into running stats with the
// given momentum; eval mode uses the running stats. beta may be absent
// (shift-free mode). running_mean/running_var are owned by the caller.
Tensor batchnorm2d_train(Tape* tape, const Tensor& x, const Tensor& gamma,
                         const std::optional<Tensor>& beta,
                         std::vector<double>& running_mean, std::vector<double>& running_var,
                         double momentum, double eps);
Tensor batchnorm2d_eval(Tape* tape, const Tensor& x, const Tensor& gamma,
                        const std::optional<Tensor>& beta,
                        const std::vector<double>& running_mean,
                        const std::vector<double>& running_var, double eps);

// Corner-aligned bilinear interpolation of [N,C,H,W] to [N,C,Ht,Wt]:
// grid endpoints map to corner pixel centers, so corners are preserved
// exactly and same-size resize is the identity.
Tensor bilinear_resize(Tape* tape, const Tensor& x, int64_t target_h, int64_t target_w);

// out = sum_j coeffs[j] * terms[j]; coeffs are scalar tensors (the
// learnable fusion weights), terms share one shape.
Tensor weighted_sum(Tape* tape, const std::vector<Tensor>& coeffs,
                    const std::vector<Tensor>& terms);

// Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h);

}  // namespace vad
