#include "vad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vad/kernels.hpp"

namespace vad {

namespace {

const kernels::Backend& K() { return kernels::active(); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

bool recording(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    return tape != nullptr && any_requires_grad(inputs);
}

Tensor make_result(Tape* tape, Shape shape, std::vector<double> data, const char* op,
                   std::initializer_list<const Tensor*> inputs,
                   const std::function<std::function<void()>(Tensor&)>& make_backprop) {
    check_finite(data, op);
    Tensor out(std::move(shape), std::move(data));
    if (recording(tape, inputs)) {
        out.track_grad();
        tape->record(out, make_backprop(out));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolution core. Weights are [c_out, c_in, KH, KW] for the forward map
// and the same buffer is reused for the adjoint (transposed) direction.

struct ConvGeom {
    int64_t N, Cin, H, W, Cout, KH, KW, Ho, Wo;
    int stride, pad;
};

ConvGeom conv_geom(const Shape& xs, const Shape& ws, int stride, int pad, const char* op) {
    if (xs.size() != 4)
        throw ShapeError(std::string(op) + ": input must be [N,C,H,W], got " + shape_str(xs));
    if (ws.size() != 4)
        throw ShapeError(std::string(op) + ": weights must be 4-d, got " + shape_str(ws));
    if (stride < 1 || pad < 0) throw ShapeError(std::string(op) + ": bad stride/padding");
    ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[0], ws[2], ws[3], 0, 0, stride, pad};
    if (ws[1] != g.Cin)
        throw ShapeError(std::string(op) + ": channel mismatch, input " + shape_str(xs) +
                         " vs weights " + shape_str(ws));
    int64_t hn = g.H + 2 * pad - g.KH;
    int64_t wn = g.W + 2 * pad - g.KW;
    if (hn < 0 || wn < 0 || hn % stride != 0 || wn % stride != 0)
        throw ShapeError(std::string(op) + ": non-integral output extent for input " +
                         shape_str(xs) + " kernel " + shape_str(ws));
    g.Ho = hn / stride + 1;
    g.Wo = wn / stride + 1;
    return g;
}

// The convolution kernels below share an im2col layout: for one sample,
// `cols` holds one contiguous row of length K = Cin*KH*KW per output pixel
// (zero-padded where the window leaves the input). All three passes then
// reduce to length-K dot/axpy calls, which keeps the vector lanes full even
// when the spatial plane is tiny.
struct ColScratch {
    std::vector<double> cols;   // [Ho*Wo][Cin*KH*KW]
    std::vector<double> dcols;  // same layout, gradient direction
};

ColScratch& col_scratch() {
    thread_local ColScratch s;
    return s;
}

void im2col(const double* xc, const ConvGeom& g, double* cols) {
    const int64_t Kc = g.Cin * g.KH * g.KW;
    for (int64_t oh = 0; oh < g.Ho; ++oh)
        for (int64_t ow = 0; ow < g.Wo; ++ow) {
            double* col = cols + (oh * g.Wo + ow) * Kc;
            for (int64_t ci = 0; ci < g.Cin; ++ci) {
                const double* xp = xc + ci * g.H * g.W;
                for (int64_t kh = 0; kh < g.KH; ++kh) {
                    const int64_t ih = oh * g.stride + kh - g.pad;
                    double* dst = col + (ci * g.KH + kh) * g.KW;
                    if (ih < 0 || ih >= g.H) {
                        for (int64_t kw = 0; kw < g.KW; ++kw) dst[kw] = 0.0;
                        continue;
                    }
                    const double* xrow = xp + ih * g.W;
                    for (int64_t kw = 0; kw < g.KW; ++kw) {
                        const int64_t iw = ow * g.stride + kw - g.pad;
                        dst[kw] = (iw >= 0 && iw < g.W) ? xrow[iw] : 0.0;
                    }
                }
            }
        }
}

// Scatter-add of the column gradients back onto the input plane.
void col2im_add(const double* dcols, const ConvGeom& g, double* dxc) {
    const int64_t Kc = g.Cin * g.KH * g.KW;
    for (int64_t oh = 0; oh < g.Ho; ++oh)
        for (int64_t ow = 0; ow < g.Wo; ++ow) {
            const double* col = dcols + (oh * g.Wo + ow) * Kc;
            for (int64_t ci = 0; ci < g.Cin; ++ci) {
                double* dxp = dxc + ci * g.H * g.W;
                for (int64_t kh = 0; kh < g.KH; ++kh) {
                    const int64_t ih = oh * g.stride + kh - g.pad;
                    if (ih < 0 || ih >= g.H) continue;
                    const double* srow = col + (ci * g.KH + kh) * g.KW;
                    double* dxrow = dxp + ih * g.W;
                    for (int64_t kw = 0; kw < g.KW; ++kw) {
                        const int64_t iw = ow * g.stride + kw - g.pad;
                        if (iw >= 0 && iw < g.W) dxrow[iw] += srow[kw];
                    }
                }
            }
        }
}

// y[n,co,ho,wo] += sum_{ci,kh,kw} w[co,ci,kh,kw] * x[n,ci,ho*s+kh-p,wo*s+kw-p]
void conv_forward(const double* x, const double* w, double* y, const ConvGeom& g) {
    const int64_t Kc = g.Cin * g.KH * g.KW;
    const int64_t P = g.Ho * g.Wo;
    auto& s = col_scratch();
    s.cols.resize(static_cast<std::size_t>(P * Kc));
    for (int64_t n = 0; n < g.N; ++n) {
        im2col(x + n * g.Cin * g.H * g.W, g, s.cols.data());
        for (int64_t co = 0; co < g.Cout; ++co) {
            const double* wc = w + co * Kc;
            double* yc = y + (n * g.Cout + co) * P;
            for (int64_t p = 0; p < P; ++p)
                yc[p] += K().dot(wc, s.cols.data() + p * Kc, static_cast<std::size_t>(Kc));
        }
    }
}

// dx[n,ci,ih,iw] += sum w[co,ci,kh,kw] * dy[n,co,ho,wo]
void conv_backward_input(const double* dy, const double* w, double* dx, const ConvGeom& g) {
    const int64_t Kc = g.Cin * g.KH * g.KW;
    const int64_t P = g.Ho * g.Wo;
    auto& s = col_scratch();
    s.dcols.assign(static_cast<std::size_t>(P * Kc), 0.0);
    for (int64_t n = 0; n < g.N; ++n) {
        if (n > 0) std::fill(s.dcols.begin(), s.dcols.end(), 0.0);
        for (int64_t co = 0; co < g.Cout; ++co) {
            const double* wc = w + co * Kc;
            const double* dyc = dy + (n * g.Cout + co) * P;
            for (int64_t p = 0; p < P; ++p)
                if (dyc[p] != 0.0)
                    K().axpy(dyc[p], wc, s.dcols.data() + p * Kc, static_cast<std::size_t>(Kc));
        }
        col2im_add(s.dcols.data(), g, dx + n * g.Cin * g.H * g.W);
    }
}

// dw[co,ci,kh,kw] += sum_{n,ho,wo} dy[n,co,ho,wo] * x[n,ci,ih,iw]
void conv_backward_weight(const double* dy, const double* x, double* dw, const ConvGeom& g) {
    const int64_t Kc = g.Cin * g.KH * g.KW;
    const int64_t P = g.Ho * g.Wo;
    auto& s = col_scratch();
    s.cols.resize(static_cast<std::size_t>(P * Kc));
    for (int64_t n = 0; n < g.N; ++n) {
        im2col(x + n * g.Cin * g.H * g.W, g, s.cols.data());
        for (int64_t co = 0; co < g.Cout; ++co) {
            const double* dyc = dy + (n * g.Cout + co) * P;
            double* wc = dw + co * Kc;
            for (int64_t p = 0; p < P; ++p)
                if (dyc[p] != 0.0)
                    K().axpy(dyc[p], s.cols.data() + p * Kc, wc, static_cast<std::size_t>(Kc));
        }
    }
}

// Corner-aligned sampling positions for one axis.
struct AxisMap {
    std::vector<int64_t> i0, i1;
    std::vector<double> f;  // weight of i1
};

AxisMap axis_map(int64_t src, int64_t dst) {
    AxisMap m;
    m.i0.resize(dst);
    m.i1.resize(dst);
    m.f.resize(dst);
    for (int64_t i = 0; i < dst; ++i) {
        double pos = dst == 1 ? 0.0
                              : static_cast<double>(i) * static_cast<double>(src - 1) /
                                    static_cast<double>(dst - 1);
        int64_t lo = static_cast<int64_t>(std::floor(pos));
        if (lo >= src - 1) lo = src - 1;
        int64_t hi = std::min(lo + 1, src - 1);
        m.i0[i] = lo;
        m.i1[i] = hi;
        m.f[i] = pos - static_cast<double>(lo);
    }
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    K().add(a.ptr(), b.ptr(), out.data(), out.size());
    return make_result(tape, a.shape(), std::move(out), "add", {&a, &b}, [&](Tensor& res) {
        return [a, b, res] {
            const auto& up = *res.grad_buffer();
            if (auto* ga = a.grad_buffer()) K().axpy(1.0, up.data(), ga->data(), up.size());
            if (auto* gb = b.grad_buffer()) K().axpy(1.0, up.data(), gb->data(), up.size());
        };
    });
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    K().sub(a.ptr(), b.ptr(), out.data(), out.size());
    return make_result(tape, a.shape(), std::move(out), "sub", {&a, &b}, [&](Tensor& res) {
        return [a, b, res] {
            const auto& up = *res.grad_buffer();
            if (auto* ga = a.grad_buffer()) K().axpy(1.0, up.data(), ga->data(), up.size());
            if (auto* gb = b.grad_buffer()) K().axpy(-1.0, up.data(), gb->data(), up.size());
        };
    });
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    K().mul(a.ptr(), b.ptr(), out.data(), out.size());
    return make_result(tape, a.shape(), std::move(out), "mul", {&a, &b}, [&](Tensor& res) {
        return [a, b, res] {
            const auto& up = *res.grad_buffer();
            if (auto* ga = a.grad_buffer())
                for (std::size_t i = 0; i < up.size(); ++i) (*ga)[i] += up[i] * b[i];
            if (auto* gb = b.grad_buffer())
                for (std::size_t i = 0; i < up.size(); ++i) (*gb)[i] += up[i] * a[i];
        };
    });
}

Tensor scale(Tape* tape, const Tensor& a, double s) {
    std::vector<double> out(a.size());
    K().scale(a.ptr(), s, out.data(), out.size());
    return make_result(tape, a.shape(), std::move(out), "scale", {&a}, [&](Tensor& res) {
        return [a, s, res] {
            const auto& up = *res.grad_buffer();
            if (auto* ga = a.grad_buffer()) K().axpy(s, up.data(), ga->data(), up.size());
        };
    });
}

Tensor sum_squares(Tape* tape, const Tensor& a) {
    double v = K().sum_squares(a.ptr(), a.size());
    return make_result(tape, {1}, {v}, "sum_squares", {&a}, [&](Tensor& res) {
        return [a, res] {
            const double up = (*res.grad_buffer())[0];
            if (auto* ga = a.grad_buffer()) K().axpy(2.0 * up, a.ptr(), ga->data(), ga->size());
        };
    });
}

Tensor relu(Tape* tape, const Tensor& x) {
    std::vector<double> out(x.size());
    K().relu(x.ptr(), out.data(), out.size());
    return make_result(tape, x.shape(), std::move(out), "relu", {&x}, [&](Tensor& res) {
        return [x, res] {
            const auto& up = *res.grad_buffer();
            if (auto* gx = x.grad_buffer()) K().relu_backward(x.ptr(), up.data(), gx->data(), up.size());
        };
    });
}

Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, int stride, int pad) {
    const ConvGeom g = conv_geom(x.shape(), w.shape(), stride, pad, "conv2d");
    std::vector<double> out(static_cast<std::size_t>(g.N * g.Cout * g.Ho * g.Wo), 0.0);
    conv_forward(x.ptr(), w.ptr(), out.data(), g);
    return make_result(tape, {g.N, g.Cout, g.Ho, g.Wo}, std::move(out), "conv2d", {&x, &w},
                       [&](Tensor& res) {
                           return [x, w, res, g] {
                               const auto& up = *res.grad_buffer();
                               if (auto* gx = x.grad_buffer())
                                   conv_backward_input(up.data(), w.ptr(), gx->data(), g);
                               if (auto* gw = w.grad_buffer())
                                   conv_backward_weight(up.data(), x.ptr(), gw->data(), g);
                           };
                       });
}

Tensor conv_transpose2d(Tape* tape, const Tensor& x, const Tensor& w, int stride, int pad) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw ShapeError("conv_transpose2d: expected 4-d input and weights, got " +
                         shape_str(xs) + " and " + shape_str(ws));
    if (xs[1] != ws[0])
        throw ShapeError("conv_transpose2d: channel mismatch, input " + shape_str(xs) +
                         " vs weights " + shape_str(ws));
    // Output shape inverts conv2d's shape map for the same hyperparameters.
    const int64_t Ho = (xs[2] - 1) * stride - 2 * pad + ws[2];
    const int64_t Wo = (xs[3] - 1) * stride - 2 * pad + ws[3];
    if (Ho < 1 || Wo < 1) throw ShapeError("conv_transpose2d: output extent not positive");
    const ConvGeom g = conv_geom({xs[0], ws[1], Ho, Wo}, ws, stride, pad, "conv_transpose2d");
    std::vector<double> out(static_cast<std::size_t>(g.N * g.Cin * g.H * g.W), 0.0);
    conv_backward_input(x.ptr(), w.ptr(), out.data(), g);
    return make_result(tape, {g.N, g.Cin, g.H, g.W}, std::move(out), "conv_transpose2d", {&x, &w},
                       [&](Tensor& res) {
                           return [x, w, res, g] {
                               const auto& up = *res.grad_buffer();
                               if (auto* gx = x.grad_buffer())
                                   conv_forward(up.data(), w.ptr(), gx->data(), g);
                               if (auto* gw = w.grad_buffer())
                                   conv_backward_weight(x.ptr(), up.data(), gw->data(), g);
                           };
                       });
}

namespace {

void check_bn_args(const Tensor& x, const Tensor& gamma, const std::optional<Tensor>& beta,
                   const std::vector<double>& rm, const std::vector<double>& rv) {
    if (x.shape().size() != 4)
        throw ShapeError("batchnorm2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
    const int64_t C = x.shape()[1];
    if (gamma.size() != C) throw ShapeError("batchnorm2d: gamma size mismatch");
    if (beta && beta->size() != C) throw ShapeError("batchnorm2d: beta size mismatch");
    if (static_cast<int64_t>(rm.size()) != C || static_cast<int64_t>(rv.size()) != C)
        throw ShapeError("batchnorm2d: running stats size mismatch");
}

}  // namespace

Tensor batchnorm2d_train(Tape* tape, const Tensor& x, const Tensor& gamma,
                         const std::optional<Tensor>& beta, std::vector<double>& running_mean,
                         std::vector<double>& running_var, double momentum, double eps) {
    check_bn_args(x, gamma, beta, running_mean, running_var);
    const int64_t N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
    const int64_t M = N * HW;
    if (M < 2) throw DataError("batchnorm2d train mode needs at least 2 elements per channel");

    std::vector<double> mean(C, 0.0), var(C, 0.0), inv_std(C);
    const double* xp = x.ptr();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* p = xp + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) mean[c] += p[i];
        }
    for (int64_t c = 0; c < C; ++c) mean[c] /= static_cast<double>(M);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* p = xp + (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) {
                const double d = p[i] - mean[c];
                var[c] += d * d;
            }
        }
    for (int64_t c = 0; c < C; ++c) {
        var[c] /= static_cast<double>(M);
        inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
        running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean[c];
        running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var[c];
    }

    auto xhat = std::make_shared<std::vector<double>>(x.size());
    std::vector<double> out(x.size());
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* p = xp + (n * C + c) * HW;
            double* xh = xhat->data() + (n * C + c) * HW;
            double* o = out.data() + (n * C + c) * HW;
            const double g = gamma[c];
            const double b = beta ? (*beta)[c] : 0.0;
            for (int64_t i = 0; i < HW; ++i) {
                xh[i] = (p[i] - mean[c]) * inv_std[c];
                o[i] = g * xh[i] + b;
            }
        }

    return make_result(
        tape, x.shape(), std::move(out), "batchnorm2d_train",
        {&x, &gamma, beta ? &*beta : &x}, [&](Tensor& res) {
            return [x, gamma, beta, res, xhat, inv_std, N, C, HW, M] {
                const auto& up = *res.grad_buffer();
                // per-channel reductions of dy and dy*xhat
                std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < C; ++c) {
                        const double* u = up.data() + (n * C + c) * HW;
                        const double* xh = xhat->data() + (n * C + c) * HW;
                        for (int64_t i = 0; i < HW; ++i) {
                            sum_dy[c] += u[i];
                            sum_dy_xhat[c] += u[i] * xh[i];
                        }
                    }
                if (auto* gg = gamma.grad_buffer())
                    for (int64_t c = 0; c < C; ++c) (*gg)[c] += sum_dy_xhat[c];
                if (beta)
                    if (auto* gb = beta->grad_buffer())
                        for (int64_t c = 0; c < C; ++c) (*gb)[c] += sum_dy[c];
                if (auto* gx = x.grad_buffer()) {
                    const double invM = 1.0 / static_cast<double>(M);
                    for (int64_t n = 0; n < N; ++n)
                        for (int64_t c = 0; c < C; ++c) {
                            const double* u = up.data() + (n * C + c) * HW;
                            const double* xh = xhat->data() + (n * C + c) * HW;
                            double* g = gx->data() + (n * C + c) * HW;
                            const double k = gamma[c] * inv_std[c];
                            const double mdy = sum_dy[c] * invM;
                            const double mdyx = sum_dy_xhat[c] * invM;
                            for (int64_t i = 0; i < HW; ++i)
                                g[i] += k * (u[i] - mdy - xh[i] * mdyx);
                        }
                }
            };
        });
}

Tensor batchnorm2d_eval(Tape* tape, const Tensor& x, const Tensor& gamma,
                        const std::optional<Tensor>& beta, const std::vector<double>& running_mean,
                        const std::vector<double>& running_var, double eps) {
    check_bn_args(x, gamma, beta, running_mean, running_var);
    const int64_t N = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
    std::vector<double> inv_std(C);
    for (int64_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(running_var[c] + eps);
    std::vector<double> out(x.size());
    const double* xp = x.ptr();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* p = xp + (n * C + c) * HW;
            double* o = out.data() + (n * C + c) * HW;
            const double g = gamma[c], b = beta ? (*beta)[c] : 0.0, m = running_mean[c];
            for (int64_t i = 0; i < HW; ++i) o[i] = g * (p[i] - m) * inv_std[c] + b;
        }
    std::vector<double> rm = running_mean;
    return make_result(
        tape, x.shape(), std::move(out), "batchnorm2d_eval",
        {&x, &gamma, beta ? &*beta : &x}, [&](Tensor& res) {
            return [x, gamma, beta, res, inv_std, rm, N, C, HW] {
                const auto& up = *res.grad_buffer();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < C; ++c) {
                        const double* u = up.data() + (n * C + c) * HW;
                        const double* p = x.ptr() + (n * C + c) * HW;
                        if (auto* gx = x.grad_buffer()) {
                            double* g = gx->data() + (n * C + c) * HW;
                            const double k = gamma[c] * inv_std[c];
                            for (int64_t i = 0; i < HW; ++i) g[i] += k * u[i];
                        }
                        if (auto* gg = gamma.grad_buffer()) {
                            double acc = 0.0;
                            for (int64_t i = 0; i < HW; ++i)
                                acc += u[i] * (p[i] - rm[c]) * inv_std[c];
                            (*gg)[c] += acc;
                        }
                        if (beta)
                            if (auto* gb = beta->grad_buffer()) {
                                double acc = 0.0;
                                for (int64_t i = 0; i < HW; ++i) acc += u[i];
                                (*gb)[c] += acc;
                            }
                    }
            };
        });
}

Tensor bilinear_resize(Tape* tape, const Tensor& x, int64_t target_h, int64_t target_w) {
    if (x.shape().size() != 4)
        throw ShapeError("bilinear_resize: input must be [N,C,H,W], got " + shape_str(x.shape()));
    if (target_h < 1 || target_w < 1) throw ShapeError("bilinear_resize: target extents must be >= 1");
    const int64_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    if (target_h == H && target_w == W) {
        // Identity: preserve the payload bit-for-bit.
        std::vector<double> out(x.data());
        return make_result(tape, x.shape(), std::move(out), "bilinear_resize", {&x},
                           [&](Tensor& res) {
                               return [x, res] {
                                   const auto& up = *res.grad_buffer();
                                   if (auto* gx = x.grad_buffer())
                                       K().axpy(1.0, up.data(), gx->data(), up.size());
                               };
                           });
    }
    auto hm = std::make_shared<AxisMap>(axis_map(H, target_h));
    auto wm = std::make_shared<AxisMap>(axis_map(W, target_w));
    std::vector<double> out(static_cast<std::size_t>(N * C * target_h * target_w));
    const double* xp = x.ptr();
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
            const double* src = xp + (n * C + c) * H * W;
            double* dst = out.data() + (n * C + c) * target_h * target_w;
            for (int64_t i = 0; i < target_h; ++i) {
                const double fh = hm->f[i];
                const double* r0 = src + hm->i0[i] * W;
                const double* r1 = src + hm->i1[i] * W;
                for (int64_t j = 0; j < target_w; ++j) {
                    const double fw = wm->f[j];
                    const double top = r0[wm->i0[j]] * (1 - fw) + r0[wm->i1[j]] * fw;
                    const double bot = r1[wm->i0[j]] * (1 - fw) + r1[wm->i1[j]] * fw;
                    dst[i * target_w + j] = top * (1 - fh) + bot * fh;
                }
            }
        }
    return make_result(
        tape, {N, C, target_h, target_w}, std::move(out), "bilinear_resize", {&x},
        [&](Tensor& res) {
            return [x, res, hm, wm, N, C, H, W, target_h, target_w] {
                auto* gx = x.grad_buffer();
                if (!gx) return;
                const auto& up = *res.grad_buffer();
                for (int64_t n = 0; n < N; ++n)
                    for (int64_t c = 0; c < C; ++c) {
                        double* g = gx->data() + (n * C + c) * H * W;
                        const double* u = up.data() + (n * C + c) * target_h * target_w;
                        for (int64_t i = 0; i < target_h; ++i) {
                            const double fh = hm->f[i];
                            for (int64_t j = 0; j < target_w; ++j) {
                                const double fw = wm->f[j];
                                const double v = u[i * target_w + j];
                                g[hm->i0[i] * W + wm->i0[j]] += v * (1 - fh) * (1 - fw);
                                g[hm->i0[i] * W + wm->i1[j]] += v * (1 - fh) * fw;
                                g[hm->i1[i] * W + wm->i0[j]] += v * fh * (1 - fw);
                                g[hm->i1[i] * W + wm->i1[j]] += v * fh * fw;
                            }
                        }
                    }
            };
        });
}

Tensor weighted_sum(Tape* tape, const std::vector<Tensor>& coeffs,
                    const std::vector<Tensor>& terms) {
    if (coeffs.size() != terms.size())
        throw ShapeError("weighted_sum: " + std::to_string(coeffs.size()) + " coefficients for " +
                         std::to_string(terms.size()) + " terms");
    if (terms.empty()) throw ShapeError("weighted_sum: empty term list");
    for (const Tensor& c : coeffs)
        if (c.size() != 1) throw ShapeError("weighted_sum: coefficients must be scalars");
    for (const Tensor& t : terms) require_same_shape(terms[0], t, "weighted_sum");

    std::vector<double> out(terms[0].size(), 0.0);
    for (std::size_t j = 0; j < terms.size(); ++j)
        K().axpy(coeffs[j][0], terms[j].ptr(), out.data(), out.size());

    bool track = tape != nullptr;
    if (track) {
        track = false;
        for (const Tensor& c : coeffs) track = track || c.requires_grad();
        for (const Tensor& t : terms) track = track || t.requires_grad();
    }
    check_finite(out, "weighted_sum");
    Tensor res(terms[0].shape(), std::move(out));
    if (track) {
        res.track_grad();
        tape->record(res, [coeffs, terms, res] {
            const auto& up = *res.grad_buffer();
            for (std::size_t j = 0; j < terms.size(); ++j) {
                if (auto* gc = coeffs[j].grad_buffer())
                    (*gc)[0] += K().dot(up.data(), terms[j].ptr(), up.size());
                if (auto* gt = terms[j].grad_buffer())
                    K().axpy(coeffs[j][0], up.data(), gt->data(), up.size());
            }
        });
    }
    return res;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h) {
    if (h <= 0.0) throw DataError("finite_diff_gradient: step must be positive");
    std::vector<double> grad(x.size());
    for (int64_t i = 0; i < x.size(); ++i) {
        std::vector<double> plus = x.data(), minus = x.data();
        plus[i] += h;
        minus[i] -= h;
        const double fp = f(Tensor(x.shape(), std::move(plus)));
        const double fm = f(Tensor(x.shape(), std::move(minus)));
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_gradient: non-finite function value");
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return Tensor(x.shape(), std::move(grad));
}

}  // namespace vad
