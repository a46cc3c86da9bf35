#include "latentseq/recurrent.hpp"

#include <cmath>

namespace latentseq {

template <std::floating_point Real>
LstmCell<Real> LstmCell<Real>::create(ParameterSet<Real>& params, const std::string& prefix,
                                      std::size_t input_size, std::size_t hidden_size, Rng& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    std::uniform_real_distribution<double> dist(-k, k);
    auto fill = [&](ad::Shape shape) {
        ad::Array<Real> a(std::move(shape));
        for (auto& v : a.data) v = static_cast<Real>(dist(rng));
        return a;
    };
    LstmCell cell;
    cell.input_size = input_size;
    cell.hidden_size = hidden_size;
    cell.input_weights = params.add(prefix + ".input_weights", fill({input_size, 4 * hidden_size}));
    cell.hidden_weights = params.add(prefix + ".hidden_weights", fill({hidden_size, 4 * hidden_size}));
    auto bias = fill({4 * hidden_size});
    for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j) bias.data[j] = Real{1};
    cell.bias = params.add(prefix + ".bias", std::move(bias));
    return cell;
}

template <std::floating_point Real>
LstmState<Real> lstm_step(const LstmCell<Real>& cell, const ad::Tensor<Real>& input, const LstmState<Real>& prev) {
    if (input.shape().size() != 2 || input.shape()[1] != cell.input_size) {
        throw ad::ShapeError("lstm_step: input shape " + ad::to_string(input.shape()) + " vs cell input size " +
                             std::to_string(cell.input_size));
    }
    const std::size_t rows = input.shape()[0];
    const std::size_t hs = cell.hidden_size;
    const auto pre = ad::matmul(input, cell.input_weights) + ad::matmul(prev.h, cell.hidden_weights) +
                     ad::broadcast(cell.bias, rows);
    const auto i = ad::sigmoid(ad::slice(pre, 0, hs));
    const auto f = ad::sigmoid(ad::slice(pre, hs, 2 * hs));
    const auto g = ad::tanh(ad::slice(pre, 2 * hs, 3 * hs));
    const auto o = ad::sigmoid(ad::slice(pre, 3 * hs, 4 * hs));
    auto c = f * prev.c + i * g;
    auto h = o * ad::tanh(c);
    return {std::move(h), std::move(c)};
}

template <std::floating_point Real>
LstmState<Real> forward_step(const LstmCell<Real>& cell, const ad::Tensor<Real>& input,
                             const ad::Tensor<Real>& latent, const LstmState<Real>& prev, const StepMask& mask) {
    const auto cell_input = latent.defined() ? ad::concat(input, latent) : input;
    const auto next = lstm_step(cell, cell_input, prev);
    return {ad::select_rows<Real>(mask, next.h, prev.h), ad::select_rows<Real>(mask, next.c, prev.c)};
}

template <std::floating_point Real>
ForwardStatePath<Real> forward_unroll(const LstmCell<Real>& cell, std::span<const ad::Tensor<Real>> inputs,
                                      std::span<const ad::Tensor<Real>> latents, std::span<const StepMask> masks,
                                      const LstmState<Real>& initial) {
    if (!latents.empty() && latents.size() != inputs.size()) {
        throw std::invalid_argument("forward_unroll: " + std::to_string(latents.size()) + " latents for " +
                                    std::to_string(inputs.size()) + " steps");
    }
    if (masks.size() != inputs.size()) {
        throw std::invalid_argument("forward_unroll: " + std::to_string(masks.size()) + " masks for " +
                                    std::to_string(inputs.size()) + " steps");
    }
    ForwardStatePath<Real> path;
    path.h.push_back(initial.h);
    path.c.push_back(initial.c);
    LstmState<Real> state = initial;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const ad::Tensor<Real> z = latents.empty() ? ad::Tensor<Real>() : latents[t];
        state = forward_step(cell, inputs[t], z, state, masks[t]);
        path.h.push_back(state.h);
        path.c.push_back(state.c);
    }
    return path;
}

template <std::floating_point Real>
BackwardStatePath<Real> backward_unroll(const LstmCell<Real>& cell, std::span<const ad::Tensor<Real>> inputs,
                                        std::span<const StepMask> masks, const LstmState<Real>& terminal) {
    if (masks.size() != inputs.size()) {
        throw std::invalid_argument("backward_unroll: " + std::to_string(masks.size()) + " masks for " +
                                    std::to_string(inputs.size()) + " positions");
    }
    const std::size_t n = inputs.size();
    BackwardStatePath<Real> path;
    if (n == 0) return path;
    path.b.resize(n);
    path.c.resize(n);
    path.b[n - 1] = terminal.h;
    path.c[n - 1] = terminal.c;
    LstmState<Real> state = terminal;
    for (std::size_t p = n - 1; p-- > 0;) {
        state = forward_step(cell, inputs[p + 1], ad::Tensor<Real>(), state, masks[p + 1]);
        path.b[p] = state.h;
        path.c[p] = state.c;
    }
    return path;
}

#define LATENTSEQ_INSTANTIATE_RECURRENT(R)                                                                     \
    template struct LstmCell<R>;                                                                               \
    template LstmState<R> lstm_step<R>(const LstmCell<R>&, const ad::Tensor<R>&, const LstmState<R>&);         \
    template LstmState<R> forward_step<R>(const LstmCell<R>&, const ad::Tensor<R>&, const ad::Tensor<R>&,      \
                                          const LstmState<R>&, const StepMask&);                              \
    template ForwardStatePath<R> forward_unroll<R>(const LstmCell<R>&, std::span<const ad::Tensor<R>>,         \
                                                   std::span<const ad::Tensor<R>>, std::span<const StepMask>,  \
                                                   const LstmState<R>&);                                       \
    template BackwardStatePath<R> backward_unroll<R>(const LstmCell<R>&, std::span<const ad::Tensor<R>>,       \
                                                     std::span<const StepMask>, const LstmState<R>&);

LATENTSEQ_INSTANTIATE_RECURRENT(float)
LATENTSEQ_INSTANTIATE_RECURRENT(double)

}  // namespace latentseq
