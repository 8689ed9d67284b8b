#include "vad/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace vad {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)),
      data_(std::make_shared<const std::vector<double>>(std::move(data))) {
    for (int64_t d : shape_)
        if (d <= 0) throw ShapeError("tensor extent must be positive, got " + shape_str(shape_));
    if (shape_numel(shape_) != size())
        throw ShapeError("shape " + shape_str(shape_) + " does not match payload length " +
                         std::to_string(size()));
}

Tensor Tensor::zeros(Shape shape) {
    auto n = static_cast<std::size_t>(shape_numel(shape));
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
    auto n = static_cast<std::size_t>(shape_numel(shape));
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t(std::move(shape), std::move(data));
    t.grad_ = std::make_shared<std::vector<double>>(t.size(), 0.0);
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
    return (*data_)[0];
}

const std::vector<double>& Tensor::grad() const {
    if (!grad_) throw DataError("tensor has no gradient accumulator");
    return *grad_;
}

void Tensor::track_grad() {
    if (!grad_) grad_ = std::make_shared<std::vector<double>>(data_->size(), 0.0);
}

void Tensor::zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

void Tensor::assign(std::vector<double> new_data) {
    if (static_cast<int64_t>(new_data.size()) != size())
        throw ShapeError("assign payload length mismatch");
    data_ = std::make_shared<const std::vector<double>>(std::move(new_data));
    node_ = -1;
    tape_id_ = 0;
}

Tensor Tensor::detached() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
}

namespace {
std::atomic<uint64_t> next_tape_id{1};
}

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

void Tape::record(Tensor& out, std::function<void()> backprop) {
    if (!out.grad_) out.grad_ = std::make_shared<std::vector<double>>(out.size(), 0.0);
    out.node_ = static_cast<int64_t>(nodes_.size());
    out.tape_id_ = id_;
    nodes_.push_back(std::move(backprop));
}

void Tape::backward(const Tensor& root) {
    if (backward_done_)
        throw DataError("backward called twice on the same tape without reset");
    if (root.size() != 1)
        throw ShapeError("backward root must be scalar, got " + shape_str(root.shape()));
    if (root.tape_id_ != id_ || root.node_ < 0)
        throw DataError("backward root is detached from this tape");
    (*root.grad_)[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    backward_done_ = true;
}

void Tape::reset() {
    nodes_.clear();
    backward_done_ = false;
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw NumericError(std::string("non-finite value produced by ") + what);
}

}  // namespace vad
