#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vad/errors.hpp"

namespace vad {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

class Tape;

// Dense row-major tensor of doubles. The payload is immutable and shared;
// copies are cheap. A tensor may carry a gradient accumulator (then it is
// a trainable leaf or an op output recorded on a tape).
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    // Leaf with a gradient accumulator (a trainable parameter).
    static Tensor param(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_ ? data_->size() : 0); }
    bool defined() const { return data_ != nullptr; }

    const std::vector<double>& data() const { return *data_; }
    const double* ptr() const { return data_->data(); }
    double operator[](int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }
    double item() const;

    bool requires_grad() const { return grad_ != nullptr; }
    const std::vector<double>& grad() const;
    // Mutable accumulator, nullptr when gradients are not tracked. Used by
    // op backward closures; not part of the user-facing API.
    std::vector<double>* grad_buffer() const { return grad_.get(); }
    // Allocate the gradient accumulator up front so backprop closures that
    // capture this tensor by value share it. Must run before the closure
    // for the producing op is built.
    void track_grad();
    void zero_grad();

    // Replace the payload in place, keeping the gradient accumulator.
    // Single-writer use only (the optimizer, between steps).
    void assign(std::vector<double> new_data);

    Tensor detached() const;

private:
    Shape shape_;
    std::shared_ptr<const std::vector<double>> data_;
    std::shared_ptr<std::vector<double>> grad_;
    int64_t node_ = -1;      // index on the recording tape, -1 for leaves
    uint64_t tape_id_ = 0;

    friend class Tape;
};

// Record of one training step's computation, replayed in reverse for
// gradients. Single-threaded: one step owns one tape.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Attach a gradient accumulator to `out` and record a node whose
    // function propagates out.grad into the parents' accumulators.
    void record(Tensor& out, std::function<void()> backprop);

    // Seed root (a scalar produced on this tape) with gradient 1 and run
    // all recorded nodes in reverse order. A second call without reset()
    // is an error.
    void backward(const Tensor& root);

    void reset();
    std::size_t num_nodes() const { return nodes_.size(); }

private:
    uint64_t id_;
    bool backward_done_ = false;
    std::vector<std::function<void()>> nodes_;
};

// True when any input participates in gradient tracking.
inline bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->requires_grad()) return true;
    return false;
}

// Throws NumericError if the buffer contains NaN or Inf.
void check_finite(const std::vector<double>& v, const char* what);

}  // namespace vad
