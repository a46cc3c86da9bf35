#include "latentseq/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace latentseq::ad {

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

template <std::floating_point Real>
Array<Real>::Array(Shape s, Real fill) : shape(std::move(s)), data(element_count(shape), fill) {}

template <std::floating_point Real>
Array<Real>::Array(Shape s, std::vector<Real> values) : shape(std::move(s)), data(std::move(values)) {
    if (element_count(shape) != data.size()) {
        throw ShapeError("array: shape " + to_string(shape) + " holds " +
                         std::to_string(element_count(shape)) + " elements, got " +
                         std::to_string(data.size()));
    }
}

namespace {

std::atomic<std::uint64_t> next_order{1};
thread_local bool recording = true;

template <std::floating_point Real>
using NodePtr = std::shared_ptr<Node<Real>>;

template <std::floating_point Real>
using BackwardFn = std::function<void(const Node<Real>&)>;

template <std::floating_point Real>
Tensor<Real> make_result(const char* kind, Array<Real> value, std::vector<NodePtr<Real>> parents,
                         BackwardFn<Real> fn) {
    auto node = std::make_shared<Node<Real>>();
    node->value = std::move(value);
    node->kind = kind;
    node->order = next_order.fetch_add(1, std::memory_order_relaxed);
    const bool any_grad =
        std::any_of(parents.begin(), parents.end(), [](const auto& p) { return p->requires_grad; });
    if (recording && any_grad) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(fn);
    }
    return Tensor<Real>(std::move(node));
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

template <std::floating_point Real>
void require_same_shape(const char* op, const Tensor<Real>& a, const Tensor<Real>& b) {
    if (a.shape() != b.shape()) shape_mismatch(op, a.shape(), b.shape());
}

template <std::floating_point Real>
void require_rank_at_least(const char* op, const Tensor<Real>& x, std::size_t rank) {
    if (x.shape().size() < rank) {
        throw ShapeError(std::string(op) + ": expected rank >= " + std::to_string(rank) + ", got shape " +
                         to_string(x.shape()));
    }
}

// Elementwise unary op: forward value f(x), local derivative df(x, y).
template <std::floating_point Real, class F, class DF>
Tensor<Real> unary(const char* kind, const Tensor<Real>& x, F f, DF df) {
    Array<Real> out(x.shape());
    const auto& in = x.value().data;
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = f(in[i]);
    return make_result<Real>(kind, std::move(out), {x.node()}, [df](const Node<Real>& self) {
        auto& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        auto& g = parent.ensure_grad();
        const auto& xv = parent.value.data;
        const auto& yv = self.value.data;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(xv[i], yv[i]);
    });
}

template <std::floating_point Real>
Real stable_sigmoid(Real x) {
    if (x >= Real{0}) return Real{1} / (Real{1} + std::exp(-x));
    const Real e = std::exp(x);
    return e / (Real{1} + e);
}

}  // namespace

template <std::floating_point Real>
Tensor<Real> Tensor<Real>::constant(Array<Real> value) {
    return make_result<Real>("constant", std::move(value), {}, nullptr);
}

template <std::floating_point Real>
Tensor<Real> Tensor<Real>::parameter(Array<Real> value) {
    auto node = std::make_shared<Node<Real>>();
    node->value = std::move(value);
    node->kind = "parameter";
    node->requires_grad = true;
    node->order = next_order.fetch_add(1, std::memory_order_relaxed);
    return Tensor<Real>(std::move(node));
}

template <std::floating_point Real>
Real Tensor<Real>::item() const {
    if (size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
    return node_->value.data[0];
}

template <std::floating_point Real>
Array<Real> Tensor<Real>::grad() const {
    if (node_->grad.empty()) return Array<Real>(shape());
    return Array<Real>(shape(), node_->grad);
}

NoGradGuard::NoGradGuard() : previous_(recording) { recording = false; }
NoGradGuard::~NoGradGuard() { recording = previous_; }

bool grad_enabled() { return recording; }

template <std::floating_point Real>
void backward(const Tensor<Real>& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined loss tensor");
    if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + to_string(loss.shape()));
    if (!loss.requires_grad()) return;

    std::vector<Node<Real>*> nodes;
    std::unordered_set<const Node<Real>*> seen;
    std::vector<Node<Real>*> stack{loss.node().get()};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        Node<Real>* n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(nodes.begin(), nodes.end(), [](const auto* a, const auto* b) { return a->order > b->order; });

    loss.node()->ensure_grad()[0] += Real{1};
    for (Node<Real>* n : nodes) {
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

template <std::floating_point Real>
bool depends_on(const Tensor<Real>& root, const Tensor<Real>& target, std::span<const Tensor<Real>> blocked) {
    std::unordered_set<const Node<Real>*> seen;
    for (const auto& b : blocked) seen.insert(b.node().get());
    if (seen.count(root.node().get())) return false;
    std::vector<const Node<Real>*> stack{root.node().get()};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        const Node<Real>* n = stack.back();
        stack.pop_back();
        if (n == target.node().get()) return true;
        for (const auto& p : n->parents) {
            if (seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    return false;
}

template <std::floating_point Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) shape_mismatch("matmul", sa, sb);
    const std::size_t m = sa[0], k = sa[1], n = sb[1];
    Array<Real> out(Shape{m, n});
    const auto& av = a.value().data;
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < m; ++i) {
        Real* row = out.data.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const Real aip = av[i * k + p];
            const Real* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
        }
    }
    return make_result<Real>("matmul", std::move(out), {a.node(), b.node()}, [m, k, n](const Node<Real>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& g = self.grad;
        if (pa.requires_grad) {
            auto& ga = pa.ensure_grad();
            const auto& bv = pb.value.data;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    Real acc{0};
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                    ga[i * k + p] += acc;
                }
            }
        }
        if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            const auto& av = pa.value.data;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const Real aip = av[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                }
            }
        }
    });
}

template <std::floating_point Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape("add", a, b);
    Array<Real> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] + b.value().data[i];
    return make_result<Real>("add", std::move(out), {a.node(), b.node()}, [](const Node<Real>& self) {
        for (const auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <std::floating_point Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape("sub", a, b);
    Array<Real> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] - b.value().data[i];
    return make_result<Real>("sub", std::move(out), {a.node(), b.node()}, [](const Node<Real>& self) {
        if (self.parents[0]->requires_grad) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (self.parents[1]->requires_grad) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <std::floating_point Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape("mul", a, b);
    Array<Real> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] * b.value().data[i];
    return make_result<Real>("mul", std::move(out), {a.node(), b.node()}, [](const Node<Real>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value.data[i];
        }
    });
}

template <std::floating_point Real>
Tensor<Real> div(const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape("div", a, b);
    Array<Real> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a.value().data[i] / b.value().data[i];
    return make_result<Real>("div", std::move(out), {a.node(), b.node()}, [](const Node<Real>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value.data[i] / pb.value.data[i];
        }
    });
}

template <std::floating_point Real>
Tensor<Real> scale(const Tensor<Real>& x, double factor) {
    const Real f = static_cast<Real>(factor);
    return unary<Real>("scale", x, [f](Real v) { return f * v; }, [f](Real, Real) { return f; });
}

template <std::floating_point Real>
Tensor<Real> add_scalar(const Tensor<Real>& x, double offset) {
    const Real o = static_cast<Real>(offset);
    return unary<Real>("add_scalar", x, [o](Real v) { return v + o; }, [](Real, Real) { return Real{1}; });
}

template <std::floating_point Real>
Tensor<Real> tanh(const Tensor<Real>& x) {
    return unary<Real>(
        "tanh", x, [](Real v) { return std::tanh(v); }, [](Real, Real y) { return Real{1} - y * y; });
}

template <std::floating_point Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) {
    return unary<Real>(
        "sigmoid", x, [](Real v) { return stable_sigmoid(v); }, [](Real, Real y) { return y * (Real{1} - y); });
}

template <std::floating_point Real>
Tensor<Real> leaky_relu(const Tensor<Real>& x, double slope) {
    const Real s = static_cast<Real>(slope);
    return unary<Real>(
        "leaky_relu", x, [s](Real v) { return v > Real{0} ? v : s * v; },
        [s](Real v, Real) { return v > Real{0} ? Real{1} : s; });
}

template <std::floating_point Real>
Tensor<Real> clip(const Tensor<Real>& x, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("clip: lo > hi");
    const Real l = static_cast<Real>(lo);
    const Real h = static_cast<Real>(hi);
    return unary<Real>(
        "clip", x, [l, h](Real v) { return std::clamp(v, l, h); },
        [l, h](Real v, Real) { return (v >= l && v <= h) ? Real{1} : Real{0}; });
}

template <std::floating_point Real>
Tensor<Real> exp(const Tensor<Real>& x) {
    return unary<Real>("exp", x, [](Real v) { return std::exp(v); }, [](Real, Real y) { return y; });
}

template <std::floating_point Real>
Tensor<Real> log(const Tensor<Real>& x) {
    return unary<Real>("log", x, [](Real v) { return std::log(v); }, [](Real v, Real) { return Real{1} / v; });
}

template <std::floating_point Real>
Tensor<Real> softplus(const Tensor<Real>& x) {
    return unary<Real>(
        "softplus", x, [](Real v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, Real{0}); },
        [](Real v, Real) { return stable_sigmoid(v); });
}

template <std::floating_point Real>
Tensor<Real> log_softmax(const Tensor<Real>& x) {
    require_rank_at_least("log_softmax", x, 1);
    const std::size_t cols = x.shape().back();
    const std::size_t rows = cols == 0 ? 0 : x.size() / cols;
    Array<Real> out(x.shape());
    const auto& in = x.value().data;
    for (std::size_t r = 0; r < rows; ++r) {
        const Real* row = in.data() + r * cols;
        const Real mx = *std::max_element(row, row + cols);
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += std::exp(static_cast<double>(row[c] - mx));
        const Real lse = mx + static_cast<Real>(std::log(acc));
        for (std::size_t c = 0; c < cols; ++c) out.data[r * cols + c] = row[c] - lse;
    }
    return make_result<Real>("log_softmax", std::move(out), {x.node()}, [rows, cols](const Node<Real>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (std::size_t c = 0; c < cols; ++c) total += self.grad[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c) {
                const std::size_t i = r * cols + c;
                g[i] += self.grad[i] - static_cast<Real>(std::exp(static_cast<double>(self.value.data[i])) * total);
            }
        }
    });
}

template <std::floating_point Real>
Tensor<Real> sum(const Tensor<Real>& x) {
    double acc = 0.0;
    for (Real v : x.value().data) acc += v;
    return make_result<Real>("sum", Array<Real>::scalar(static_cast<Real>(acc)), {x.node()},
                             [](const Node<Real>& self) {
                                 auto& g = self.parents[0]->ensure_grad();
                                 for (auto& v : g) v += self.grad[0];
                             });
}

template <std::floating_point Real>
Tensor<Real> mean(const Tensor<Real>& x) {
    if (x.size() == 0) throw ShapeError("mean: empty tensor");
    double acc = 0.0;
    for (Real v : x.value().data) acc += v;
    const double n = static_cast<double>(x.size());
    return make_result<Real>("mean", Array<Real>::scalar(static_cast<Real>(acc / n)), {x.node()},
                             [n](const Node<Real>& self) {
                                 auto& g = self.parents[0]->ensure_grad();
                                 const Real share = static_cast<Real>(self.grad[0] / n);
                                 for (auto& v : g) v += share;
                             });
}

template <std::floating_point Real>
Tensor<Real> sum_last(const Tensor<Real>& x) {
    require_rank_at_least("sum_last", x, 1);
    Shape out_shape(x.shape().begin(), x.shape().end() - 1);
    const std::size_t cols = x.shape().back();
    const std::size_t rows = element_count(out_shape);
    Array<Real> out(out_shape);
    const auto& in = x.value().data;
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += in[r * cols + c];
        out.data[r] = static_cast<Real>(acc);
    }
    return make_result<Real>("sum_last", std::move(out), {x.node()}, [rows, cols](const Node<Real>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
        }
    });
}

template <std::floating_point Real>
Tensor<Real> concat(std::span<const Tensor<Real>> parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (first.empty()) throw ShapeError("concat: scalar inputs are not supported");
    Shape lead(first.begin(), first.end() - 1);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
            shape_mismatch("concat", first, s);
        }
        widths.push_back(s.back());
        total += s.back();
    }
    const std::size_t rows = element_count(lead);
    Shape out_shape = lead;
    out_shape.push_back(total);
    Array<Real> out(out_shape);
    std::vector<NodePtr<Real>> parents;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& in = parts[k].value().data;
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(in.begin() + r * widths[k], widths[k], out.data.begin() + r * total + offset);
        }
        offset += widths[k];
        parents.push_back(parts[k].node());
    }
    return make_result<Real>("concat", std::move(out), std::move(parents),
                             [rows, total, widths](const Node<Real>& self) {
                                 std::size_t off = 0;
                                 for (std::size_t k = 0; k < widths.size(); ++k) {
                                     auto& p = *self.parents[k];
                                     if (p.requires_grad) {
                                         auto& g = p.ensure_grad();
                                         for (std::size_t r = 0; r < rows; ++r) {
                                             for (std::size_t c = 0; c < widths[k]; ++c) {
                                                 g[r * widths[k] + c] += self.grad[r * total + off + c];
                                             }
                                         }
                                     }
                                     off += widths[k];
                                 }
                             });
}

template <std::floating_point Real>
Tensor<Real> concat(const Tensor<Real>& a, const Tensor<Real>& b) {
    const Tensor<Real> parts[] = {a, b};
    return concat<Real>(std::span<const Tensor<Real>>(parts));
}

template <std::floating_point Real>
Tensor<Real> slice(const Tensor<Real>& x, std::size_t begin, std::size_t end) {
    require_rank_at_least("slice", x, 1);
    const std::size_t cols = x.shape().back();
    if (begin > end || end > cols) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for shape " + to_string(x.shape()));
    }
    const std::size_t width = end - begin;
    const std::size_t rows = cols == 0 ? 0 : x.size() / cols;
    Shape out_shape = x.shape();
    out_shape.back() = width;
    Array<Real> out(out_shape);
    const auto& in = x.value().data;
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(in.begin() + r * cols + begin, width, out.data.begin() + r * width);
    }
    return make_result<Real>("slice", std::move(out), {x.node()},
                             [rows, cols, begin, width](const Node<Real>& self) {
                                 auto& g = self.parents[0]->ensure_grad();
                                 for (std::size_t r = 0; r < rows; ++r) {
                                     for (std::size_t c = 0; c < width; ++c) {
                                         g[r * cols + begin + c] += self.grad[r * width + c];
                                     }
                                 }
                             });
}

template <std::floating_point Real>
Tensor<Real> broadcast(const Tensor<Real>& x, std::size_t rows) {
    if (x.shape().size() != 1) throw ShapeError("broadcast: expected rank-1 input, got " + to_string(x.shape()));
    const std::size_t cols = x.shape()[0];
    Array<Real> out(Shape{rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(x.value().data.begin(), x.value().data.end(), out.data.begin() + r * cols);
    }
    return make_result<Real>("broadcast", std::move(out), {x.node()}, [rows, cols](const Node<Real>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
        }
    });
}

template <std::floating_point Real>
Tensor<Real> pick(const Tensor<Real>& x, std::span<const std::int32_t> index) {
    if (x.shape().size() != 2 || x.shape()[0] != index.size()) {
        shape_mismatch("pick", x.shape(), Shape{index.size()});
    }
    const std::size_t rows = x.shape()[0];
    const std::size_t cols = x.shape()[1];
    std::vector<std::int32_t> idx(index.begin(), index.end());
    Array<Real> out(Shape{rows});
    for (std::size_t r = 0; r < rows; ++r) {
        if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= cols) {
            throw ShapeError("pick: index " + std::to_string(idx[r]) + " out of range for shape " + to_string(x.shape()));
        }
        out.data[r] = x.value().data[r * cols + static_cast<std::size_t>(idx[r])];
    }
    return make_result<Real>("pick", std::move(out), {x.node()}, [cols, idx](const Node<Real>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r) g[r * cols + static_cast<std::size_t>(idx[r])] += self.grad[r];
    });
}

template <std::floating_point Real>
Tensor<Real> embedding(const Tensor<Real>& table, std::span<const std::int32_t> ids) {
    if (table.shape().size() != 2) throw ShapeError("embedding: table must be rank 2, got " + to_string(table.shape()));
    const std::size_t vocab = table.shape()[0];
    const std::size_t width = table.shape()[1];
    std::vector<std::int32_t> idx(ids.begin(), ids.end());
    Array<Real> out(Shape{idx.size(), width});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= vocab) {
            throw ShapeError("embedding: id " + std::to_string(idx[r]) + " out of range for table " +
                             to_string(table.shape()));
        }
        std::copy_n(table.value().data.begin() + static_cast<std::size_t>(idx[r]) * width, width,
                    out.data.begin() + r * width);
    }
    return make_result<Real>("embedding", std::move(out), {table.node()}, [width, idx](const Node<Real>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const std::size_t base = static_cast<std::size_t>(idx[r]) * width;
            for (std::size_t c = 0; c < width; ++c) g[base + c] += self.grad[r * width + c];
        }
    });
}

template <std::floating_point Real>
Tensor<Real> select_rows(std::span<const std::uint8_t> keep, const Tensor<Real>& a, const Tensor<Real>& b) {
    require_same_shape("select_rows", a, b);
    require_rank_at_least("select_rows", a, 1);
    const std::size_t rows = a.shape()[0];
    if (keep.size() != rows) shape_mismatch("select_rows", a.shape(), Shape{keep.size()});
    const std::size_t cols = rows == 0 ? 0 : a.size() / rows;
    std::vector<std::uint8_t> mask(keep.begin(), keep.end());
    Array<Real> out(a.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& src = mask[r] ? a.value().data : b.value().data;
        std::copy_n(src.begin() + r * cols, cols, out.data.begin() + r * cols);
    }
    return make_result<Real>("select_rows", std::move(out), {a.node(), b.node()},
                             [rows, cols, mask](const Node<Real>& self) {
                                 for (int side = 0; side < 2; ++side) {
                                     auto& p = *self.parents[side];
                                     if (!p.requires_grad) continue;
                                     auto& g = p.ensure_grad();
                                     const bool want = side == 0;
                                     for (std::size_t r = 0; r < rows; ++r) {
                                         if ((mask[r] != 0) != want) continue;
                                         for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r * cols + c];
                                     }
                                 }
                             });
}

template <std::floating_point Real>
Tensor<Real> stop_gradient(const Tensor<Real>& x) {
    auto node = std::make_shared<Node<Real>>();
    node->value = x.value();
    node->kind = "stop_gradient";
    node->order = next_order.fetch_add(1, std::memory_order_relaxed);
    return Tensor<Real>(std::move(node));
}

#define LATENTSEQ_INSTANTIATE_AUTODIFF(R)                                                              \
    template struct Array<R>;                                                                          \
    template class Tensor<R>;                                                                          \
    template void backward<R>(const Tensor<R>&);                                                       \
    template bool depends_on<R>(const Tensor<R>&, const Tensor<R>&, std::span<const Tensor<R>>);       \
    template Tensor<R> matmul<R>(const Tensor<R>&, const Tensor<R>&);                                  \
    template Tensor<R> add<R>(const Tensor<R>&, const Tensor<R>&);                                     \
    template Tensor<R> sub<R>(const Tensor<R>&, const Tensor<R>&);                                     \
    template Tensor<R> mul<R>(const Tensor<R>&, const Tensor<R>&);                                     \
    template Tensor<R> div<R>(const Tensor<R>&, const Tensor<R>&);                                     \
    template Tensor<R> scale<R>(const Tensor<R>&, double);                                             \
    template Tensor<R> add_scalar<R>(const Tensor<R>&, double);                                        \
    template Tensor<R> tanh<R>(const Tensor<R>&);                                                      \
    template Tensor<R> sigmoid<R>(const Tensor<R>&);                                                   \
    template Tensor<R> leaky_relu<R>(const Tensor<R>&, double);                                        \
    template Tensor<R> clip<R>(const Tensor<R>&, double, double);                                      \
    template Tensor<R> exp<R>(const Tensor<R>&);                                                       \
    template Tensor<R> log<R>(const Tensor<R>&);                                                       \
    template Tensor<R> softplus<R>(const Tensor<R>&);                                                  \
    template Tensor<R> log_softmax<R>(const Tensor<R>&);                                               \
    template Tensor<R> sum<R>(const Tensor<R>&);                                                       \
    template Tensor<R> mean<R>(const Tensor<R>&);                                                      \
    template Tensor<R> sum_last<R>(const Tensor<R>&);                                                  \
    template Tensor<R> concat<R>(std::span<const Tensor<R>>);                                          \
    template Tensor<R> concat<R>(const Tensor<R>&, const Tensor<R>&);                                  \
    template Tensor<R> slice<R>(const Tensor<R>&, std::size_t, std::size_t);                           \
    template Tensor<R> broadcast<R>(const Tensor<R>&, std::size_t);                                    \
    template Tensor<R> pick<R>(const Tensor<R>&, std::span<const std::int32_t>);                       \
    template Tensor<R> embedding<R>(const Tensor<R>&, std::span<const std::int32_t>);                  \
    template Tensor<R> select_rows<R>(std::span<const std::uint8_t>, const Tensor<R>&, const Tensor<R>&); \
    template Tensor<R> stop_gradient<R>(const Tensor<R>&);

LATENTSEQ_INSTANTIATE_AUTODIFF(float)
LATENTSEQ_INSTANTIATE_AUTODIFF(double)

}  // namespace latentseq::ad
