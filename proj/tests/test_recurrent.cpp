#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "latentseq/recurrent.hpp"

namespace ad = latentseq::ad;
using latentseq::LstmCell;
using latentseq::LstmState;
using latentseq::ParameterSet;
using latentseq::StepMask;
using T = ad::Tensor<double>;
using A = ad::Array<double>;

namespace {

A random_array(std::mt19937_64& rng, ad::Shape shape, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    A a(std::move(shape));
    for (auto& v : a.data) v = n(rng);
    return a;
}

LstmCell<double> make_cell(ParameterSet<double>& ps, std::size_t in, std::size_t hidden, std::uint64_t seed) {
    latentseq::Rng rng(seed);
    return LstmCell<double>::create(ps, "cell", in, hidden, rng);
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Lstm, InitializationRanges) {
    ParameterSet<double> ps;
    const auto cell = make_cell(ps, 3, 4, 1);
    const double k = 0.5;
    for (double v : cell.input_weights.value().data) EXPECT_LE(std::abs(v), k);
    for (double v : cell.hidden_weights.value().data) EXPECT_LE(std::abs(v), k);
    for (std::size_t j = 0; j < 16; ++j) {
        if (j >= 4 && j < 8) {
            EXPECT_EQ(cell.bias.value()[j], 1.0);
        } else {
            EXPECT_LE(std::abs(cell.bias.value()[j]), k);
        }
    }
}

TEST(Lstm, ZeroWeightsHalveCell) {
    ParameterSet<double> ps;
    auto cell = make_cell(ps, 2, 3, 1);
    for (auto& e : ps.entries()) std::fill(e.tensor.mutable_value().data.begin(), e.tensor.mutable_value().data.end(), 0.0);
    const A c_prev({1, 3}, {0.4, -1.0, 2.0});
    const auto s = lstm_step(cell, T::constant(A({1, 2}, {0.7, -0.2})),
                             LstmState<double>{T::constant(A({1, 3}, {0.1, 0.2, 0.3})), T::constant(c_prev)});
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(s.c.value()[j], 0.5 * c_prev[j]);
        EXPECT_DOUBLE_EQ(s.h.value()[j], 0.5 * std::tanh(0.5 * c_prev[j]));
    }
}

TEST(Lstm, ZeroInputAndStateWithZeroBiasGivesZero) {
    ParameterSet<double> ps;
    auto cell = make_cell(ps, 2, 3, 4);
    std::fill(cell.bias.mutable_value().data.begin(), cell.bias.mutable_value().data.end(), 0.0);
    const auto s = lstm_step(cell, T::constant(A(ad::Shape{2, 2})),
                             LstmState<double>{T::constant(A(ad::Shape{2, 3})), T::constant(A(ad::Shape{2, 3}))});
    for (double v : s.h.value().data) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, MatchesScalarGateOracle) {
    std::mt19937_64 rng(9);
    ParameterSet<double> ps;
    const std::size_t in = 2, hs = 3, rows = 2;
    const auto cell = make_cell(ps, in, hs, 17);
    const A x = random_array(rng, {rows, in});
    const A h = random_array(rng, {rows, hs}, 0.5);
    const A c = random_array(rng, {rows, hs}, 0.5);
    const auto s = lstm_step(cell, T::constant(x), LstmState<double>{T::constant(h), T::constant(c)});

    const auto& W = cell.input_weights.value();
    const auto& U = cell.hidden_weights.value();
    const auto& b = cell.bias.value();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < hs; ++j) {
            double gate[4];
            for (std::size_t g = 0; g < 4; ++g) {
                const std::size_t col = g * hs + j;
                double acc = b[col];
                for (std::size_t k = 0; k < in; ++k) acc += x.at(r, k) * W.at(k, col);
                for (std::size_t k = 0; k < hs; ++k) acc += h.at(r, k) * U.at(k, col);
                gate[g] = acc;
            }
            const double c_new = sig(gate[1]) * c.at(r, j) + sig(gate[0]) * std::tanh(gate[2]);
            const double h_new = sig(gate[3]) * std::tanh(c_new);
            EXPECT_NEAR(s.c.value().at(r, j), c_new, 1e-14);
            EXPECT_NEAR(s.h.value().at(r, j), h_new, 1e-14);
        }
    }
}

TEST(Lstm, MaskedRowCarriesStateBitExactly) {
    std::mt19937_64 rng(2);
    ParameterSet<double> ps;
    const auto cell = make_cell(ps, 2, 3, 3);
    const LstmState<double> prev{T::constant(random_array(rng, {2, 3})), T::constant(random_array(rng, {2, 3}))};
    const auto next = forward_step(cell, T::constant(random_array(rng, {2, 2})), T{}, prev, StepMask{1, 0});
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(next.h.value().at(1, j), prev.h.value().at(1, j));
        EXPECT_EQ(next.c.value().at(1, j), prev.c.value().at(1, j));
        EXPECT_NE(next.h.value().at(0, j), prev.h.value().at(0, j));
    }
}

TEST(ForwardUnroll, EmptySequenceHoldsInitialState) {
    ParameterSet<double> ps;
    const auto cell = make_cell(ps, 2, 3, 3);
    const LstmState<double> init{T::constant(A(ad::Shape{1, 3}, 0.25)), T::constant(A(ad::Shape{1, 3}))};
    const auto path = latentseq::forward_unroll<double>(cell, {}, {}, {}, init);
    ASSERT_EQ(path.h.size(), 1u);
    EXPECT_TRUE(path.h[0].same_node(init.h));
}

TEST(ForwardUnroll, ZeroLatentsEqualZeroPaddedInputs) {
    std::mt19937_64 rng(4);
    ParameterSet<double> ps;
    const std::size_t in = 2, zd = 2, rows = 2, steps = 4;
    const auto cell = make_cell(ps, in + zd, 3, 8);
    std::vector<T> inputs, latents, padded;
    std::vector<StepMask> masks(steps, StepMask{1, 1});
    for (std::size_t t = 0; t < steps; ++t) {
        A x = random_array(rng, {rows, in});
        inputs.push_back(T::constant(x));
        latents.push_back(T::constant(A(ad::Shape{rows, zd})));
        A p(ad::Shape{rows, in + zd});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t k = 0; k < in; ++k) p.at(r, k) = x.at(r, k);
        }
        padded.push_back(T::constant(p));
    }
    const LstmState<double> init{T::constant(A(ad::Shape{rows, 3})), T::constant(A(ad::Shape{rows, 3}))};
    const auto a = latentseq::forward_unroll<double>(cell, inputs, latents, masks, init);
    const auto b = latentseq::forward_unroll<double>(cell, padded, {}, masks, init);
    for (std::size_t t = 0; t <= steps; ++t) EXPECT_EQ(a.h[t].value().data, b.h[t].value().data);
}

TEST(ForwardUnroll, LatentReachesOnlyLaterStates) {
    // h[t] may depend on z[s] only for s < t.
    std::mt19937_64 rng(6);
    ParameterSet<double> ps;
    const std::size_t steps = 4, rows = 2, zd = 2;
    const auto cell = make_cell(ps, 1 + zd, 3, 5);
    std::vector<T> inputs, latents;
    std::vector<StepMask> masks(steps, StepMask{1, 1});
    for (std::size_t t = 0; t < steps; ++t) {
        inputs.push_back(T::constant(random_array(rng, {rows, 1})));
        latents.push_back(T::parameter(random_array(rng, {rows, zd})));
    }
    const LstmState<double> init{T::constant(A(ad::Shape{rows, 3})), T::constant(A(ad::Shape{rows, 3}))};
    const auto path = latentseq::forward_unroll<double>(cell, inputs, latents, masks, init);
    for (std::size_t t = 0; t <= steps; ++t) {
        for (auto& z : latents) z.zero_grad();
        ad::backward(ad::sum(path.h[t]));
        for (std::size_t s = 0; s < steps; ++s) {
            const auto g = latents[s].grad();
            const bool any = std::any_of(g.data.begin(), g.data.end(), [](double v) { return v != 0.0; });
            if (s < t) {
                EXPECT_TRUE(any) << "h[" << t << "] should depend on z[" << s << "]";
            } else {
                EXPECT_FALSE(any) << "h[" << t << "] must not depend on z[" << s << "]";
            }
        }
    }
}

TEST(BackwardUnroll, SinglePositionIsTerminalState) {
    ParameterSet<double> ps;
    const auto cell = make_cell(ps, 2, 3, 3);
    const LstmState<double> terminal{T::constant(A(ad::Shape{1, 3}, 0.5)), T::constant(A(ad::Shape{1, 3}))};
    const std::vector<T> inputs{T::constant(A(ad::Shape{1, 2}, 1.0))};
    const std::vector<StepMask> masks{StepMask{1}};
    const auto path = latentseq::backward_unroll<double>(cell, inputs, masks, terminal);
    ASSERT_EQ(path.b.size(), 1u);
    EXPECT_EQ(path.b[0].value().data, terminal.h.value().data);
}

TEST(BackwardUnroll, ReversalEquivalence) {
    std::mt19937_64 rng(12);
    ParameterSet<double> ps;
    const std::size_t n = 5, rows = 2;
    const auto cell = make_cell(ps, 2, 3, 21);
    std::vector<T> inputs;
    for (std::size_t p = 0; p < n; ++p) inputs.push_back(T::constant(random_array(rng, {rows, 2})));
    const std::vector<StepMask> masks(n, StepMask{1, 1});
    const LstmState<double> terminal{T::constant(random_array(rng, {rows, 3}, 0.3)),
                                     T::constant(random_array(rng, {rows, 3}, 0.3))};
    const auto back = latentseq::backward_unroll<double>(cell, inputs, masks, terminal);

    std::vector<T> reversed(inputs.rbegin(), inputs.rend() - 1);  // x[n-1] .. x[1]
    const std::vector<StepMask> fmasks(n - 1, StepMask{1, 1});
    const auto fwd = latentseq::forward_unroll<double>(cell, reversed, {}, fmasks, terminal);
    for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(fwd.h[k].value().data, back.b[n - 1 - k].value().data) << k;
}

TEST(BackwardUnroll, StateDependsOnlyOnTheFuture) {
    // b[t] may depend on x[s] only for s > t.
    std::mt19937_64 rng(13);
    ParameterSet<double> ps;
    const std::size_t n = 5, rows = 2;
    const auto cell = make_cell(ps, 2, 3, 22);
    std::vector<T> inputs;
    for (std::size_t p = 0; p < n; ++p) inputs.push_back(T::parameter(random_array(rng, {rows, 2})));
    const std::vector<StepMask> masks(n, StepMask{1, 1});
    const LstmState<double> terminal{T::constant(A(ad::Shape{rows, 3})), T::constant(A(ad::Shape{rows, 3}))};
    const auto back = latentseq::backward_unroll<double>(cell, inputs, masks, terminal);
    for (std::size_t t = 0; t < n; ++t) {
        for (auto& x : inputs) x.zero_grad();
        ad::backward(ad::sum(back.b[t]));
        for (std::size_t s = 0; s < n; ++s) {
            const auto g = inputs[s].grad();
            const bool any = std::any_of(g.data.begin(), g.data.end(), [](double v) { return v != 0.0; });
            EXPECT_EQ(any, s > t) << "b[" << t << "] vs x[" << s << "]";
        }
    }
}

TEST(BackwardUnroll, PaddedTailLeavesStatesUnchanged) {
    std::mt19937_64 rng(14);
    ParameterSet<double> ps;
    const auto cell = make_cell(ps, 2, 3, 23);
    std::vector<T> inputs;
    for (std::size_t p = 0; p < 3; ++p) inputs.push_back(T::constant(random_array(rng, {1, 2})));
    const LstmState<double> terminal{T::constant(random_array(rng, {1, 3})), T::constant(random_array(rng, {1, 3}))};
    const std::vector<StepMask> masks(3, StepMask{1});
    const auto short_path = latentseq::backward_unroll<double>(cell, inputs, masks, terminal);

    auto padded_inputs = inputs;
    padded_inputs.push_back(T::constant(random_array(rng, {1, 2})));
    padded_inputs.push_back(T::constant(random_array(rng, {1, 2})));
    std::vector<StepMask> padded_masks = masks;
    padded_masks.push_back(StepMask{0});
    padded_masks.push_back(StepMask{0});
    const auto long_path = latentseq::backward_unroll<double>(cell, padded_inputs, padded_masks, terminal);
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(short_path.b[p].value().data, long_path.b[p].value().data);
}
