#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "vad/fusion.hpp"
#include "vad/init.hpp"
#include "vad/ops.hpp"

using namespace vad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double s = 1.0) {
    std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : d) x = s * rng.normal();
    return Tensor(std::move(shape), std::move(d));
}

double max_rel_err(const std::vector<double>& got, const Tensor& want) {
    REQUIRE(static_cast<int64_t>(got.size()) == want.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        double denom = std::max(1.0, std::abs(want[static_cast<int64_t>(i)]));
        worst = std::max(worst, std::abs(got[i] - want[static_cast<int64_t>(i)]) / denom);
    }
    return worst;
}

// Straight-line re-statement of the fusion recurrence, written directly
// against the per-stack forward calls rather than FusionBlock::forward.
Tensor fusion_oracle(FusionBlock& fb, const std::vector<Tensor>& inputs) {
    Tensor c = fb.depth0_combine(nullptr, inputs);
    std::vector<Tensor> h = inputs;
    for (int64_t i = 0; i < fb.central.spec.depth(); ++i) {
        Tensor hc = fb.central.forward_stack(nullptr, c, i, false);
        std::vector<double> acc(static_cast<std::size_t>(hc.size()), 0.0);
        for (int64_t p = 0; p < hc.size(); ++p) acc[p] = fb.alpha_c[i][0] * hc[p];
        for (int64_t k = 0; k < fb.m; ++k) {
            h[k] = fb.branches[k].forward_stack(nullptr, h[k], i, false);
            for (int64_t p = 0; p < hc.size(); ++p)
                acc[static_cast<std::size_t>(p)] += fb.alpha_m[i][k][0] * h[k][p];
        }
        c = Tensor(hc.shape(), std::move(acc));
    }
    return c;
}

}  // namespace

TEST_CASE("central_combine reproduces the fusion equation exactly") {
    Rng rng(3);
    Tensor hc = random_tensor({1, 2, 3, 3}, rng);
    Tensor h1 = random_tensor({1, 2, 3, 3}, rng);
    Tensor h2 = random_tensor({1, 2, 3, 3}, rng);
    Tensor ac = Tensor::scalar(0.7);
    Tensor a1 = Tensor::scalar(-0.2);
    Tensor a2 = Tensor::scalar(1.3);
    Tensor out = central_combine(nullptr, hc, {h1, h2}, {ac, a1, a2});
    for (int64_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(0.7 * hc[i] - 0.2 * h1[i] + 1.3 * h2[i]).epsilon(1e-15));
}

TEST_CASE("central_combine passes the central branch through when branch weights are zero") {
    Rng rng(5);
    Tensor hc = random_tensor({1, 2, 4, 4}, rng);
    Tensor hb = random_tensor({1, 2, 4, 4}, rng);
    Tensor out = central_combine(nullptr, hc, {hb}, {Tensor::scalar(1.0), Tensor::scalar(0.0)});
    for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == hc[i]);
}

TEST_CASE("central_combine substitutes a branch when the central weight is zero") {
    Rng rng(7);
    Tensor hc = random_tensor({1, 2, 4, 4}, rng);
    Tensor hb = random_tensor({1, 2, 4, 4}, rng);
    Tensor out = central_combine(nullptr, hc, {hb}, {Tensor::scalar(0.0), Tensor::scalar(1.0)});
    for (int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == hb[i]);
}

TEST_CASE("central_combine rejects a wrong number of weights") {
    Tensor hc = Tensor::full({1, 1, 2, 2}, 1.0);
    Tensor hb = Tensor::full({1, 1, 2, 2}, 1.0);
    CHECK_THROWS(central_combine(nullptr, hc, {hb}, {Tensor::scalar(1.0)}));
}

TEST_CASE("alpha initialization is balanced") {
    Rng rng(9);
    BranchSpec spec;
    spec.in_channels = 2;
    spec.widths = {4, 4};
    spec.downsample = {false, false};
    FusionBlock fb = FusionBlock::kaiming(3, spec, rng);
    for (const auto& a : fb.alpha0) CHECK(a[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    for (const auto& a : fb.alpha_c) CHECK(a[0] == 1.0);
    for (const auto& depth : fb.alpha_m)
        for (const auto& a : depth) CHECK(a[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("fusion forward matches the straight-line oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        BranchSpec spec;
        spec.in_channels = 2;
        spec.widths = {3, 5};
        spec.downsample = {trial % 2 == 0, false};
        FusionBlock fb = FusionBlock::kaiming(2, spec, rng);
        std::vector<Tensor> inputs = {random_tensor({1, 2, 8, 8}, rng),
                                      random_tensor({1, 2, 8, 8}, rng)};
        // Running stats are mutated by train mode; compare in eval mode so
        // the oracle and the block see identical statistics.
        Tensor want = fusion_oracle(fb, inputs);
        FusionBlock::Output out = fb.forward(nullptr, inputs, false);
        REQUIRE(out.central.shape() == want.shape());
        double worst = 0.0;
        for (int64_t i = 0; i < want.size(); ++i)
            worst = std::max(worst, std::abs(out.central[i] - want[i]));
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("fusion treats modalities symmetrically at initialization") {
    // Identical alphas and swapped branch weights: permuting the inputs
    // must permute nothing in the central output.
    Rng rng(13);
    BranchSpec spec;
    spec.in_channels = 2;
    spec.widths = {4, 4};
    spec.downsample = {false, false};
    FusionBlock fb = FusionBlock::kaiming(2, spec, rng);
    fb.branches[1] = fb.branches[0];  // same weights in both branches

    std::vector<Tensor> in = {random_tensor({1, 2, 6, 6}, rng), random_tensor({1, 2, 6, 6}, rng)};
    Tensor a = fb.forward(nullptr, in, false).central;
    Tensor b = fb.forward(nullptr, {in[1], in[0]}, false).central;
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("alpha gradients match finite differences") {
    Rng rng(17);
    BranchSpec spec;
    spec.in_channels = 2;
    spec.widths = {3, 4};
    spec.downsample = {true, false};
    FusionBlock fb = FusionBlock::kaiming(2, spec, rng);
    std::vector<Tensor> inputs = {random_tensor({2, 2, 8, 8}, rng),
                                  random_tensor({2, 2, 8, 8}, rng)};

    Tape tape;
    Tensor f = sum_squares(&tape, fb.forward(&tape, inputs, false).central);
    tape.backward(f);

    auto loss_with_alpha = [&](Tensor* slot, const Tensor& v) {
        Tensor saved = *slot;
        *slot = v;
        double out = sum_squares(nullptr, fb.forward(nullptr, inputs, false).central).item();
        *slot = saved;
        return out;
    };

    std::vector<Tensor*> all_alphas;
    for (auto& a : fb.alpha0) all_alphas.push_back(&a);
    for (auto& a : fb.alpha_c) all_alphas.push_back(&a);
    for (auto& d : fb.alpha_m)
        for (auto& a : d) all_alphas.push_back(&a);
    for (Tensor* a : all_alphas) {
        Tensor fd = finite_diff_gradient([&](const Tensor& v) { return loss_with_alpha(a, v); },
                                         *a, 1e-5);
        CHECK(max_rel_err(a->grad(), fd) < 1e-4);
    }
}

TEST_CASE("zeroed branch weights silence that branch's gradient at deeper alphas") {
    Rng rng(19);
    BranchSpec spec;
    spec.in_channels = 2;
    spec.widths = {3};
    spec.downsample = {false};
    FusionBlock fb = FusionBlock::kaiming(2, spec, rng);
    // Kill modality 1's contribution at depth 0 on the branch path.
    fb.branches[1].stacks[0].conv.weight.assign(
        std::vector<double>(static_cast<std::size_t>(fb.branches[1].stacks[0].conv.weight.size()),
                            0.0));
    fb.branches[1].stacks[0].bn.running_mean.assign(3, 0.0);
    fb.branches[1].stacks[0].bn.running_var.assign(3, 1.0);

    std::vector<Tensor> inputs = {random_tensor({1, 2, 5, 5}, rng),
                                  random_tensor({1, 2, 5, 5}, rng)};
    Tape tape;
    Tensor f = sum_squares(&tape, fb.forward(&tape, inputs, false).central);
    tape.backward(f);
    // h_M[0][1] == 0 everywhere, so d loss / d alpha_m[0][1] == 0.
    CHECK(fb.alpha_m[0][1].grad()[0] == 0.0);
    CHECK(fb.alpha_m[0][0].grad()[0] != 0.0);
}

TEST_CASE("full fusion block weight gradients match finite differences") {
    Rng rng(23);
    BranchSpec spec;
    spec.in_channels = 2;
    spec.widths = {3, 4};
    spec.downsample = {true, false};
    FusionBlock fb = FusionBlock::kaiming(2, spec, rng);
    std::vector<Tensor> inputs = {random_tensor({2, 2, 8, 8}, rng),
                                  random_tensor({2, 2, 8, 8}, rng)};

    Tape tape;
    Tensor f = sum_squares(&tape, fb.forward(&tape, inputs, false).central);
    tape.backward(f);

    // Spot-check one convolution weight per network against finite
    // differences (the full sweep lives in the per-op tests).
    auto check_weight = [&](Tensor& w) {
        Tensor fd = finite_diff_gradient(
            [&](const Tensor& v) {
                Tensor saved = w;
                w = v;
                double out = sum_squares(nullptr, fb.forward(nullptr, inputs, false).central).item();
                w = saved;
                return out;
            },
            w, 1e-5);
        CHECK(max_rel_err(w.grad(), fd) < 1e-4);
    };
    check_weight(fb.central.stacks[0].conv.weight);
    check_weight(fb.central.stacks[1].conv.weight);
    check_weight(fb.branches[0].stacks[0].conv.weight);
    check_weight(fb.branches[1].stacks[1].conv.weight);
}

TEST_CASE("collect exposes every trainable parameter exactly once") {
    Rng rng(29);
    BranchSpec spec;
    spec.in_channels = 2;
    spec.widths = {3, 4};
    spec.downsample = {false, false};
    FusionBlock fb = FusionBlock::kaiming(3, spec, rng);
    std::vector<ParamRef> params;
    fb.collect(params);

    std::size_t expected = 0;
    expected += 3;          // alpha0
    expected += 2;          // alpha_c
    expected += 2 * 3;      // alpha_m
    expected += 2 * 2 * 4;  // conv + gamma per stack, 4 networks, 2 stacks
    CHECK(params.size() == expected);

    std::set<std::string> names;
    std::set<const Tensor*> ptrs;
    for (const auto& p : params) {
        CHECK(names.insert(p.name).second);
        CHECK(ptrs.insert(p.tensor).second);
        // Decay policy: conv weights yes, everything else no.
        bool is_conv = p.name.find("conv") != std::string::npos;
        CHECK(p.apply_weight_decay == is_conv);
    }
}
