#pragma once

// Reverse-mode automatic differentiation over dense row-major arrays.
//
// Graphs are built define-by-run: every op on a Tensor that requires
// gradients records a node holding shared references to its parents and a
// backward rule. backward() collects the nodes reachable from a scalar loss,
// visits them in reverse creation order (a valid reverse topological order,
// since parents are always created before their children) and accumulates
// gradients into every reachable node.
//
// Shapes used throughout the library:
//   {}      scalar
//   {F}     feature vector (parameters such as biases and initial states)
//   {B}     per-row scalar (one value per batch row)
//   {B, F}  batch of feature vectors
// Broadcasting is limited to expanding a {F} tensor over a leading batch axis.

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentseq::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Dense value storage without any graph bookkeeping.
template <std::floating_point Real>
struct Array {
    Shape shape;
    std::vector<Real> data;

    Array() : shape{}, data(1, Real{0}) {}
    explicit Array(Shape s, Real fill = Real{0});
    Array(Shape s, std::vector<Real> values);

    static Array scalar(Real v) { return Array(Shape{}, std::vector<Real>{v}); }

    [[nodiscard]] std::size_t size() const { return data.size(); }
    [[nodiscard]] std::size_t rank() const { return shape.size(); }
    [[nodiscard]] std::size_t rows() const { return shape.empty() ? 1 : shape.front(); }
    [[nodiscard]] std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

    Real& operator[](std::size_t i) { return data[i]; }
    const Real& operator[](std::size_t i) const { return data[i]; }
    Real& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    const Real& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    template <std::floating_point Other>
    [[nodiscard]] Array<Other> cast() const {
        return Array<Other>(shape, std::vector<Other>(data.begin(), data.end()));
    }
};

template <std::floating_point Real>
struct Node {
    Array<Real> value;
    std::vector<Real> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::uint64_t order = 0;
    const char* kind = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(const Node&)> backward_fn;

    std::vector<Real>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), Real{0});
        return grad;
    }
};

// Handle to a node of the differentiation graph. Copies alias the same node.
template <std::floating_point Real>
class Tensor {
public:
    using NodePtr = std::shared_ptr<Node<Real>>;

    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor constant(Array<Real> value);
    static Tensor parameter(Array<Real> value);

    [[nodiscard]] bool defined() const { return node_ != nullptr; }
    [[nodiscard]] const Array<Real>& value() const { return node_->value; }
    // Direct write access for optimizers and checkpoint loading.
    [[nodiscard]] Array<Real>& mutable_value() { return node_->value; }
    [[nodiscard]] const Shape& shape() const { return node_->value.shape; }
    [[nodiscard]] std::size_t size() const { return node_->value.size(); }
    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
    [[nodiscard]] const char* kind() const { return node_->kind; }
    [[nodiscard]] Real item() const;

    // Gradient accumulator, zero-filled when nothing has been accumulated.
    [[nodiscard]] Array<Real> grad() const;
    [[nodiscard]] bool has_grad() const { return !node_->grad.empty(); }
    [[nodiscard]] std::vector<Real>& mutable_grad() { return node_->ensure_grad(); }
    void zero_grad() { node_->grad.clear(); }

    [[nodiscard]] const NodePtr& node() const { return node_; }
    [[nodiscard]] bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    NodePtr node_;
};

// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

template <std::floating_point Real>
void backward(const Tensor<Real>& loss);

// True when `target` is reachable from `root` through parent links without
// passing through any of the `blocked` nodes.
template <std::floating_point Real>
bool depends_on(const Tensor<Real>& root, const Tensor<Real>& target,
                std::span<const Tensor<Real>> blocked = {});

template <std::floating_point Real> Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);
template <std::floating_point Real> Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <std::floating_point Real> Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <std::floating_point Real> Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
template <std::floating_point Real> Tensor<Real> div(const Tensor<Real>& a, const Tensor<Real>& b);
template <std::floating_point Real> Tensor<Real> scale(const Tensor<Real>& x, double factor);
template <std::floating_point Real> Tensor<Real> add_scalar(const Tensor<Real>& x, double offset);
template <std::floating_point Real> Tensor<Real> tanh(const Tensor<Real>& x);
template <std::floating_point Real> Tensor<Real> sigmoid(const Tensor<Real>& x);
template <std::floating_point Real> Tensor<Real> leaky_relu(const Tensor<Real>& x, double slope);
// Zero gradient outside [lo, hi]; the boundary points take the inside gradient.
template <std::floating_point Real> Tensor<Real> clip(const Tensor<Real>& x, double lo, double hi);
template <std::floating_point Real> Tensor<Real> exp(const Tensor<Real>& x);
template <std::floating_point Real> Tensor<Real> log(const Tensor<Real>& x);
template <std::floating_point Real> Tensor<Real> softplus(const Tensor<Real>& x);
// Along the last axis.
template <std::floating_point Real> Tensor<Real> log_softmax(const Tensor<Real>& x);
// Reductions accumulate in double.
template <std::floating_point Real> Tensor<Real> sum(const Tensor<Real>& x);
template <std::floating_point Real> Tensor<Real> mean(const Tensor<Real>& x);
// {B, F} -> {B}; {F} -> {}.
template <std::floating_point Real> Tensor<Real> sum_last(const Tensor<Real>& x);
// Along the last axis.
template <std::floating_point Real> Tensor<Real> concat(std::span<const Tensor<Real>> parts);
template <std::floating_point Real> Tensor<Real> concat(const Tensor<Real>& a, const Tensor<Real>& b);
template <std::floating_point Real> Tensor<Real> slice(const Tensor<Real>& x, std::size_t begin, std::size_t end);
// {F} -> {rows, F}.
template <std::floating_point Real> Tensor<Real> broadcast(const Tensor<Real>& x, std::size_t rows);
// out[b] = x[b, index[b]].
template <std::floating_point Real>
Tensor<Real> pick(const Tensor<Real>& x, std::span<const std::int32_t> index);
// out[b, :] = table[ids[b], :].
template <std::floating_point Real>
Tensor<Real> embedding(const Tensor<Real>& table, std::span<const std::int32_t> ids);
// out[b, :] = keep[b] ? a[b, :] : b_[b, :]. Gradient is routed to the chosen side only.
template <std::floating_point Real>
Tensor<Real> select_rows(std::span<const std::uint8_t> keep, const Tensor<Real>& a, const Tensor<Real>& b);
template <std::floating_point Real> Tensor<Real> stop_gradient(const Tensor<Real>& x);

template <std::floating_point Real>
Tensor<Real> operator+(const Tensor<Real>& a, const Tensor<Real>& b) { return add(a, b); }
template <std::floating_point Real>
Tensor<Real> operator-(const Tensor<Real>& a, const Tensor<Real>& b) { return sub(a, b); }
template <std::floating_point Real>
Tensor<Real> operator*(const Tensor<Real>& a, const Tensor<Real>& b) { return mul(a, b); }

}  // namespace latentseq::ad
