#include "vad/svdd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vad/kernels.hpp"

namespace vad {

namespace {

// out[b, ...] = center[...]; gradient of the center accumulates over the batch.
Tensor broadcast_batch(Tape* tape, const Tensor& center, int64_t batch) {
    Shape bs = center.shape();
    bs.insert(bs.begin(), batch);
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(batch) * center.data().size());
    for (int64_t b = 0; b < batch; ++b)
        data.insert(data.end(), center.data().begin(), center.data().end());
    Tensor out(std::move(bs), std::move(data));
    if (tape && center.requires_grad()) {
        out.track_grad();
        tape->record(out, [center, out, batch] {
            auto* gc = center.grad_buffer();
            if (!gc) return;
            const auto& up = *out.grad_buffer();
            const std::size_t n = gc->size();
            for (int64_t b = 0; b < batch; ++b)
                kernels::active().axpy(1.0, up.data() + static_cast<std::size_t>(b) * n,
                                       gc->data(), n);
        });
    }
    return out;
}

}  // namespace

AnomalyModel AnomalyModel::from_pretrained(const BranchNet& encoder, int64_t modalities,
                                           const SvddConfig& config, Rng& rng) {
    AnomalyModel model;
    model.config = config;
    model.fusion = FusionBlock::kaiming(modalities, encoder.spec, rng);
    model.fusion.central = encoder;  // bitwise copy of the pretrained encoder
    return model;
}

Tensor svdd_data_term(Tape* tape, const Tensor& embeddings, const Tensor& center) {
    if (embeddings.shape().size() != center.shape().size() + 1)
        throw ShapeError("svdd_data_term: embeddings " + shape_str(embeddings.shape()) +
                         " must be a batch of " + shape_str(center.shape()));
    for (std::size_t i = 0; i < center.shape().size(); ++i)
        if (embeddings.shape()[i + 1] != center.shape()[i])
            throw ShapeError("svdd_data_term: embedding batch " + shape_str(embeddings.shape()) +
                             " does not match center " + shape_str(center.shape()));
    const int64_t batch = embeddings.shape()[0];
    Tensor c = broadcast_batch(tape, center, batch);
    Tensor diff = sub(tape, embeddings, c);
    return scale(tape, sum_squares(tape, diff), 1.0 / static_cast<double>(batch));
}

Tensor joint_data_term(Tape* tape, const FusionBlock::Output& out, const CenterSet& centers) {
    if (out.branch.size() != centers.branch.size())
        throw ShapeError("joint_data_term: " + std::to_string(out.branch.size()) +
                         " branch outputs vs " + std::to_string(centers.branch.size()) +
                         " branch centers");
    Tensor total = svdd_data_term(tape, out.central, centers.central);
    for (std::size_t k = 0; k < out.branch.size(); ++k)
        total = add(tape, total, svdd_data_term(tape, out.branch[k], centers.branch[k]));
    return total;
}

double regularization_term(const std::vector<ParamRef>& params, double lambda) {
    double ssq = 0.0;
    for (const ParamRef& p : params)
        if (p.apply_weight_decay)
            ssq += kernels::active().sum_squares(p.tensor->ptr(),
                                                 static_cast<std::size_t>(p.tensor->size()));
    return 0.5 * lambda * ssq;
}

CenterSet init_centers(AnomalyModel& model, const std::vector<AlignedSample>& train_samples,
                       int64_t batch_size, double guard) {
    if (train_samples.empty()) throw DataError("init_centers: empty dataset");
    const int64_t n = static_cast<int64_t>(train_samples.size());

    std::vector<double> central_sum;
    std::vector<std::vector<double>> branch_sum;
    Shape central_shape;
    std::vector<Shape> branch_shapes;

    for (int64_t start = 0; start < n; start += batch_size) {
        const int64_t end = std::min(n, start + batch_size);
        std::vector<int64_t> idx(static_cast<std::size_t>(end - start));
        std::iota(idx.begin(), idx.end(), start);
        auto inputs = stack_samples(train_samples, idx);
        auto out = model.fusion.forward(nullptr, inputs, /*train=*/false);

        auto accumulate = [&](const Tensor& emb, std::vector<double>& sum, Shape& shape) {
            Shape per(emb.shape().begin() + 1, emb.shape().end());
            if (sum.empty()) {
                sum.assign(static_cast<std::size_t>(shape_numel(per)), 0.0);
                shape = per;
            }
            const std::size_t sz = sum.size();
            for (int64_t b = 0; b < emb.shape()[0]; ++b)
                kernels::active().axpy(1.0, emb.ptr() + static_cast<std::size_t>(b) * sz,
                                       sum.data(), sz);
        };
        accumulate(out.central, central_sum, central_shape);
        branch_sum.resize(out.branch.size());
        branch_shapes.resize(out.branch.size());
        for (std::size_t k = 0; k < out.branch.size(); ++k)
            accumulate(out.branch[k], branch_sum[k], branch_shapes[k]);
    }

    auto to_center = [&](std::vector<double> sum, const Shape& shape) {
        for (double& v : sum) {
            v /= static_cast<double>(n);
            if (std::abs(v) < guard) v = v < 0.0 ? -guard : guard;
        }
        return Tensor(shape, std::move(sum));
    };

    CenterSet cs;
    cs.central = to_center(std::move(central_sum), central_shape);
    for (std::size_t k = 0; k < branch_sum.size(); ++k)
        cs.branch.push_back(to_center(std::move(branch_sum[k]), branch_shapes[k]));
    cs.frozen = model.config.center_mode == CenterMode::FixedAfterInit;
    return cs;
}

std::vector<Tensor> stack_samples(const std::vector<AlignedSample>& samples,
                                  const std::vector<int64_t>& indices) {
    if (indices.empty()) throw DataError("stack_samples: empty batch");
    const std::size_t m = samples[static_cast<std::size_t>(indices[0])].maps.size();
    std::vector<Tensor> out;
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<Tensor> frames;
        frames.reserve(indices.size());
        for (int64_t idx : indices) frames.push_back(samples[static_cast<std::size_t>(idx)].maps[k]);
        std::vector<int64_t> all(frames.size());
        std::iota(all.begin(), all.end(), 0);
        out.push_back(stack_frames(frames, all));
    }
    return out;
}

FinetuneHistory finetune(AnomalyModel& model, const std::vector<AlignedSample>& train_samples) {
    if (train_samples.empty()) throw DataError("finetune: empty dataset");
    if (!model.centers.central.defined())
        throw DataError("finetune: centers not initialized");
    const SvddConfig& cfg = model.config;
    if (cfg.lambda <= 0.0) throw ConfigError("finetune: lambda must be positive");

    std::vector<ParamRef> params;
    model.fusion.collect(params);
    const bool learned_centers = cfg.center_mode == CenterMode::Learned;
    if (learned_centers) {
        model.centers.central = Tensor::param(model.centers.central.shape(),
                                              std::vector<double>(model.centers.central.data()));
        for (std::size_t k = 0; k < model.centers.branch.size(); ++k)
            model.centers.branch[k] = Tensor::param(
                model.centers.branch[k].shape(),
                std::vector<double>(model.centers.branch[k].data()));
        params.push_back({"center.central", &model.centers.central, false});
        for (std::size_t k = 0; k < model.centers.branch.size(); ++k)
            params.push_back({"center.branch" + std::to_string(k), &model.centers.branch[k], false});
        model.centers.frozen = false;
    }

    Adam opt({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.lambda});
    Rng shuffle_rng(cfg.seed + 2);
    const int64_t n = static_cast<int64_t>(train_samples.size());
    const int64_t m = model.fusion.m;
    std::vector<int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    FinetuneHistory hist;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        double central_sum = 0.0;
        std::vector<double> branch_sums(static_cast<std::size_t>(m), 0.0);
        int64_t frames_seen = 0;
        for (int64_t start = 0; start < n; start += cfg.batch_size) {
            const int64_t end = std::min(n, start + cfg.batch_size);
            std::vector<int64_t> batch(order.begin() + start, order.begin() + end);
            auto inputs = stack_samples(train_samples, batch);

            Tape tape;
            for (ParamRef& p : params) p.tensor->zero_grad();
            // batch norm statistics stay frozen during fine-tuning
            auto out = model.fusion.forward(&tape, inputs, /*train=*/false);
            Tensor central_term = svdd_data_term(&tape, out.central, model.centers.central);
            Tensor total = central_term;
            std::vector<double> branch_terms(static_cast<std::size_t>(m));
            for (int64_t k = 0; k < m; ++k) {
                Tensor bt = svdd_data_term(&tape, out.branch[static_cast<std::size_t>(k)],
                                           model.centers.branch[static_cast<std::size_t>(k)]);
                branch_terms[static_cast<std::size_t>(k)] = bt.item();
                total = add(&tape, total, bt);
            }
            if (!std::isfinite(total.item()))
                throw NumericError("finetune: non-finite loss at epoch " + std::to_string(epoch));
            tape.backward(total);
            opt.step(params);

            const auto weight = static_cast<double>(end - start);
            central_sum += central_term.item() * weight;
            for (int64_t k = 0; k < m; ++k)
                branch_sums[static_cast<std::size_t>(k)] +=
                    branch_terms[static_cast<std::size_t>(k)] * weight;
            frames_seen += end - start;
        }
        hist.central.push_back(central_sum / static_cast<double>(frames_seen));
        std::vector<double> row;
        for (double s : branch_sums) row.push_back(s / static_cast<double>(frames_seen));
        hist.branches.push_back(std::move(row));
        hist.regularization.push_back(regularization_term(params, cfg.lambda));
    }
    return hist;
}

double score(AnomalyModel& model, const AlignedSample& sample) {
    std::vector<AlignedSample> one = {sample};
    return score_batch(model, one, 1)[0];
}

std::vector<double> score_batch(AnomalyModel& model, const std::vector<AlignedSample>& samples,
                                int64_t batch_size) {
    if (!model.centers.central.defined()) throw DataError("score: centers not initialized");
    const int64_t n = static_cast<int64_t>(samples.size());
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(n));
    for (int64_t start = 0; start < n; start += batch_size) {
        const int64_t end = std::min(n, start + batch_size);
        std::vector<int64_t> idx(static_cast<std::size_t>(end - start));
        std::iota(idx.begin(), idx.end(), start);
        auto inputs = stack_samples(samples, idx);
        auto out = model.fusion.forward(nullptr, inputs, /*train=*/false);
        const std::size_t sz = model.centers.central.data().size();
        if (static_cast<int64_t>(sz) != shape_numel(out.central.shape()) / (end - start))
            throw ShapeError("score: central embedding does not match center shape");
        for (int64_t b = 0; b < end - start; ++b) {
            double d = 0.0;
            const double* e = out.central.ptr() + static_cast<std::size_t>(b) * sz;
            const double* c = model.centers.central.ptr();
            for (std::size_t i = 0; i < sz; ++i) {
                const double diff = e[i] - c[i];
                d += diff * diff;
            }
            scores.push_back(d);
        }
    }
    return scores;
}

}  // namespace vad
