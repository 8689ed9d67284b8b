#include "vad/nn.hpp"

#include <cmath>

namespace vad {

Conv2d Conv2d::kaiming(int64_t out_ch, int64_t in_ch, int64_t k, Rng& rng, int stride, int pad) {
    Conv2d c;
    c.weight = kaiming_init({out_ch, in_ch, k, k}, in_ch * k * k, rng);
    c.stride = stride;
    c.pad = pad;
    return c;
}

Conv2d Conv2d::identity(int64_t ch, int64_t k) {
    if (k % 2 == 0) throw DataError("identity conv needs an odd kernel size");
    std::vector<double> w(static_cast<std::size_t>(ch * ch * k * k), 0.0);
    const int64_t center = (k / 2) * k + k / 2;
    for (int64_t c = 0; c < ch; ++c) w[(c * ch + c) * k * k + center] = 1.0;
    Conv2d conv;
    conv.weight = Tensor::param({ch, ch, k, k}, std::move(w));
    conv.pad = static_cast<int>(k / 2);
    return conv;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &weight, true});
}

BatchNorm2d BatchNorm2d::make(int64_t channels, bool with_shift) {
    BatchNorm2d bn;
    bn.gamma = Tensor::param({channels}, std::vector<double>(channels, 1.0));
    if (with_shift) bn.beta = Tensor::param({channels}, std::vector<double>(channels, 0.0));
    bn.running_mean.assign(channels, 0.0);
    bn.running_var.assign(channels, 1.0);
    return bn;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma, false});
    if (beta) out.push_back({prefix + ".beta", &*beta, false});
}

void Adam::step(const std::vector<ParamRef>& params) {
    if (m_.empty()) {
        for (const ParamRef& p : params) {
            m_.emplace_back(p.tensor->size(), 0.0);
            v_.emplace_back(p.tensor->size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw DataError("Adam: parameter set changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& w = *params[pi].tensor;
        const auto& grad = w.grad();
        check_finite(grad, "Adam gradient");
        std::vector<double> next(w.data());
        auto& m = m_[pi];
        auto& v = v_[pi];
        const double wd = params[pi].apply_weight_decay ? cfg_.weight_decay : 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) {
            const double g = grad[i] + wd * next[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            next[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        w.assign(std::move(next));
    }
}

}  // namespace vad
