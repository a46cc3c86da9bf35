#include "latentseq/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "latentseq/distributions.hpp"
#include "latentseq/recurrent.hpp"
#include "latentseq/rng.hpp"

namespace latentseq {

using T = ad::Tensor<double>;
using A = ad::Array<double>;

GradCheckResult check_gradients(const std::string& name, const std::vector<T>& inputs,
                                const std::function<T()>& loss, const GradCheckOptions& options) {
    for (const auto& in : inputs) {
        if (!in.requires_grad()) throw std::invalid_argument("check_gradients: inputs must be parameters");
    }
    GradCheckResult result;
    result.name = name;

    for (auto in : inputs) in.zero_grad();
    ad::backward(loss());
    std::vector<A> analytic;
    for (const auto& in : inputs) analytic.push_back(in.grad());
    for (auto in : inputs) in.zero_grad();

    ad::NoGradGuard no_grad;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto input = inputs[i];
        auto& values = input.mutable_value().data;
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double saved = values[j];
            values[j] = saved + options.epsilon;
            const double plus = loss().item();
            values[j] = saved - options.epsilon;
            const double minus = loss().item();
            values[j] = saved;
            const double numeric = (plus - minus) / (2.0 * options.epsilon);
            const double a = analytic[i].data[j];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
            const double err = std::abs(a - numeric) / denom;
            ++result.checked;
            const double e = std::isnan(err) ? INFINITY : err;
            if (result.worst.empty() || e > result.max_rel_error) {
                result.max_rel_error = e;
                char buf[128];
                std::snprintf(buf, sizeof(buf), "input%zu[%zu]: analytic %.9g vs numeric %.9g", i, j, a, numeric);
                result.worst = buf;
            }
        }
    }
    result.passed = result.max_rel_error < options.tolerance;
    return result;
}

namespace {

A random_array(Rng& rng, ad::Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    A a(std::move(shape));
    for (auto& v : a.data) v = dist(rng);
    return a;
}

// Values with magnitude in [lo, hi] and random sign, keeping clear of kinks at zero.
A away_from_zero(Rng& rng, ad::Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> mag(lo, hi);
    std::bernoulli_distribution sign(0.5);
    A a(std::move(shape));
    for (auto& v : a.data) v = sign(rng) ? mag(rng) : -mag(rng);
    return a;
}

// Reduces any tensor to a scalar with fixed random weights so every output
// element contributes a distinct amount.
T weighted_sum(const T& x, const A& weights) { return ad::sum(x * T::constant(weights)); }

}  // namespace

std::vector<GradCheckResult> op_gradient_suite(std::uint64_t seed, const GradCheckOptions& options) {
    Rng rng = make_rng(seed, Stream::init, 0xF00D);
    std::vector<GradCheckResult> out;
    auto param = [&](ad::Shape shape, double lo = -1.0, double hi = 1.0) {
        return T::parameter(random_array(rng, std::move(shape), lo, hi));
    };
    auto weights = [&](ad::Shape shape) { return random_array(rng, std::move(shape), -1.0, 1.0); };
    auto unary = [&](const std::string& name, T x, auto&& op) {
        const A w = weights(op(x).shape());
        out.push_back(check_gradients(name, {x}, [&, x] { return weighted_sum(op(x), w); }, options));
    };

    {
        auto a = param({3, 4});
        auto b = param({4, 2});
        const A w = weights({3, 2});
        out.push_back(check_gradients("matmul", {a, b}, [&] { return weighted_sum(ad::matmul(a, b), w); }, options));
    }
    {
        auto a = param({2, 3});
        auto b = param({2, 3});
        auto d = T::parameter(away_from_zero(rng, {2, 3}, 0.5, 2.0));
        const A w = weights({2, 3});
        out.push_back(check_gradients("add", {a, b}, [&] { return weighted_sum(a + b, w); }, options));
        out.push_back(check_gradients("sub", {a, b}, [&] { return weighted_sum(a - b, w); }, options));
        out.push_back(check_gradients("mul", {a, b}, [&] { return weighted_sum(a * b, w); }, options));
        out.push_back(check_gradients("div", {a, d}, [&] { return weighted_sum(ad::div(a, d), w); }, options));
        out.push_back(check_gradients("mul_shared_input", {a}, [&] { return weighted_sum(a * a, w); }, options));
    }
    unary("scale", param({2, 3}), [](const T& x) { return ad::scale(x, -1.7); });
    unary("add_scalar", param({2, 3}), [](const T& x) { return ad::add_scalar(x, 0.3); });
    unary("tanh", param({2, 3}, -2.0, 2.0), [](const T& x) { return ad::tanh(x); });
    unary("sigmoid", param({2, 3}, -4.0, 4.0), [](const T& x) { return ad::sigmoid(x); });
    unary("leaky_relu", T::parameter(away_from_zero(rng, {2, 3}, 0.1, 2.0)),
          [](const T& x) { return ad::leaky_relu(x, kHeadLeakiness); });
    unary("clip", T::parameter(away_from_zero(rng, {3, 4}, 0.1, 2.0)),
          [](const T& x) { return ad::clip(ad::scale(x, 2.0), -kHeadClip, kHeadClip); });
    unary("exp", param({2, 3}), [](const T& x) { return ad::exp(x); });
    unary("log", param({2, 3}, 0.2, 3.0), [](const T& x) { return ad::log(x); });
    unary("softplus", param({2, 3}, -3.0, 3.0), [](const T& x) { return ad::softplus(x); });
    unary("log_softmax", param({2, 5}, -2.0, 2.0), [](const T& x) { return ad::log_softmax(x); });
    unary("sum_last", param({3, 4}), [](const T& x) { return ad::sum_last(x); });
    unary("slice", param({2, 6}), [](const T& x) { return ad::slice(x, 1, 4); });
    {
        auto x = param({3, 4});
        out.push_back(check_gradients("sum", {x}, [&] { return ad::sum(ad::tanh(x)); }, options));
        out.push_back(check_gradients("mean", {x}, [&] { return ad::mean(ad::exp(x)); }, options));
    }
    {
        auto a = param({2, 2});
        auto b = param({2, 3});
        auto c = param({2, 1});
        const A w = weights({2, 6});
        out.push_back(check_gradients("concat", {a, b, c}, [&] {
            const std::vector<T> parts{a, b, c};
            return weighted_sum(ad::concat<double>(parts), w);
        }, options));
    }
    {
        auto v = param({4});
        const A w = weights({3, 4});
        out.push_back(check_gradients("broadcast", {v}, [&] { return weighted_sum(ad::broadcast(v, 3), w); }, options));
    }
    {
        auto x = param({3, 5});
        const std::vector<std::int32_t> idx{4, 0, 2};
        const A w = weights({3});
        out.push_back(check_gradients("pick", {x}, [&] { return weighted_sum(ad::pick<double>(x, idx), w); }, options));
    }
    {
        auto table = param({5, 3});
        const std::vector<std::int32_t> ids{1, 4, 1, 0};
        const A w = weights({4, 3});
        out.push_back(check_gradients("embedding", {table},
                                      [&] { return weighted_sum(ad::embedding<double>(table, ids), w); }, options));
    }
    {
        auto a = param({3, 2});
        auto b = param({3, 2});
        const std::vector<std::uint8_t> keep{1, 0, 1};
        const A w = weights({3, 2});
        out.push_back(check_gradients("select_rows", {a, b},
                                      [&] { return weighted_sum(ad::select_rows<double>(keep, a, b), w); }, options));
    }

    // Distribution terms.
    {
        auto mu = param({2, 3});
        auto ls = param({2, 3}, -1.0, 1.0);
        auto x = param({2, 3}, -2.0, 2.0);
        const A w = weights({2});
        out.push_back(check_gradients("gaussian_log_prob", {mu, ls, x}, [&] {
            return weighted_sum(log_prob(DiagGaussian<double>{mu, ls}, x), w);
        }, options));
        const A eps = random_array(rng, {2, 3}, -2.0, 2.0);
        const A wz = weights({2, 3});
        out.push_back(check_gradients("gaussian_rsample", {mu, ls}, [&] {
            return weighted_sum(rsample(DiagGaussian<double>{mu, ls}, eps), wz);
        }, options));
        auto mu_p = param({2, 3});
        auto ls_p = param({2, 3}, -1.0, 1.0);
        out.push_back(check_gradients("kl_diag_gauss", {mu, ls, mu_p, ls_p}, [&] {
            return weighted_sum(kl_diag_gauss(DiagGaussian<double>{mu, ls}, DiagGaussian<double>{mu_p, ls_p}), w);
        }, options));
        auto packed = param({2, 6});
        out.push_back(check_gradients("gaussian_from_packed", {packed}, [&] {
            return weighted_sum(log_prob(DiagGaussian<double>::from_packed(packed), x), w);
        }, options));
    }
    {
        auto logits = param({2, 4}, -3.0, 3.0);
        A bits(ad::Shape{2, 4}, std::vector<double>{1, 0, 0, 1, 1, 1, 0, 0});
        const A w = weights({2});
        out.push_back(check_gradients("bernoulli_log_prob", {logits}, [&] {
            return weighted_sum(log_prob(Bernoulli<double>{logits}, T::constant(bits)), w);
        }, options));
        const std::vector<std::int32_t> ids{3, 1};
        out.push_back(check_gradients("categorical_log_prob", {logits}, [&] {
            return weighted_sum(log_prob(Categorical<double>{logits}, std::span<const std::int32_t>(ids)), w);
        }, options));
    }

    // Recurrent steps.
    {
        ParameterSet<double> ps;
        const auto cell = LstmCell<double>::create(ps, "cell", 3, 4, rng);
        auto x0 = param({2, 3});
        auto x1 = param({2, 3});
        auto z = param({2, 1});
        auto h0 = param({2, 4});
        auto c0 = param({2, 4});
        std::vector<T> inputs{x0, x1, h0, c0};
        for (const auto& e : ps.entries()) inputs.push_back(e.tensor);
        const A wh = weights({2, 4});
        const A wc = weights({2, 4});
        out.push_back(check_gradients("lstm_step", inputs, [&] {
            const auto s = lstm_step(cell, x0, LstmState<double>{h0, c0});
            return weighted_sum(s.h, wh) + weighted_sum(s.c, wc);
        }, options));
        out.push_back(check_gradients("lstm_unroll_masked", inputs, [&] {
            const StepMask mask{1, 0};
            auto s = lstm_step(cell, x0, LstmState<double>{h0, c0});
            s = forward_step(cell, x1, T{}, s, mask);
            return weighted_sum(s.h, wh) + weighted_sum(s.c, wc);
        }, options));

        ParameterSet<double> ps2;
        const auto zcell = LstmCell<double>::create(ps2, "zcell", 4, 4, rng);
        std::vector<T> zinputs{x0, z, h0, c0};
        for (const auto& e : ps2.entries()) zinputs.push_back(e.tensor);
        out.push_back(check_gradients("forward_step_with_latent", zinputs, [&] {
            const auto s = forward_step(zcell, x0, z, LstmState<double>{h0, c0}, StepMask{1, 1});
            return weighted_sum(s.h, wh);
        }, options));
    }
    return out;
}

ModelConfig tiny_model_config(const TinyModelSpec& spec) {
    ModelConfig cfg;
    cfg.kind = spec.kind;
    cfg.observation_width = spec.kind == ObservationKind::tokens ? 6 : 2;
    cfg.embed_dim = 3;
    cfg.hidden_size = spec.hidden;
    cfg.backward_hidden_size = spec.hidden;
    cfg.z_dim = spec.z_dim;
    cfg.head_hidden = spec.hidden;
    cfg.end_id = spec.kind == ObservationKind::tokens ? 1 : -1;
    return cfg;
}

SequenceBatch tiny_batch(const TinyModelSpec& spec, std::uint64_t seed) {
    const auto cfg = tiny_model_config(spec);
    Rng rng = make_rng(seed, Stream::data, 0xBA7C);
    std::vector<Sequence> seqs(spec.batch);
    const std::size_t positions = spec.steps + 1;
    for (std::size_t b = 0; b < spec.batch; ++b) {
        const std::size_t len = (b + 1 == spec.batch && spec.batch > 1) ? positions - 1 : positions;
        for (std::size_t p = 0; p < len; ++p) {
            switch (spec.kind) {
                case ObservationKind::frames: {
                    std::normal_distribution<double> n(0.0, 1.0);
                    for (std::size_t f = 0; f < cfg.observation_width; ++f) {
                        seqs[b].values.push_back(static_cast<float>(n(rng)));
                    }
                    break;
                }
                case ObservationKind::bits: {
                    std::bernoulli_distribution coin(0.5);
                    for (std::size_t f = 0; f < cfg.observation_width; ++f) {
                        seqs[b].values.push_back(coin(rng) ? 1.0f : 0.0f);
                    }
                    break;
                }
                case ObservationKind::tokens: {
                    std::uniform_int_distribution<std::int32_t> id(2, static_cast<std::int32_t>(cfg.observation_width) - 1);
                    seqs[b].ids.push_back(p == 0 ? 0 : (p + 1 == len ? 1 : id(rng)));
                    break;
                }
            }
        }
    }
    return make_batch(cfg.kind, cfg.observation_width, seqs);
}

std::vector<GradCheckResult> model_gradient_suite(std::uint64_t seed, const GradCheckOptions& options) {
    std::vector<GradCheckResult> out;
    const LossWeights weights{0.5, 0.5, 0.7};
    for (auto kind : {ObservationKind::frames, ObservationKind::bits, ObservationKind::tokens}) {
        TinyModelSpec spec;
        spec.kind = kind;
        SequenceModel<double> model(tiny_model_config(spec), seed);
        const auto batch = tiny_batch(spec, seed);
        Rng rng = make_rng(seed, Stream::train_noise);
        const auto noise = standard_normal_noise<double>(rng, batch.steps(), batch.batch_size, spec.z_dim);

        // Backward states at the unperturbed parameters.
        std::vector<A> frozen_b;
        {
            ad::NoGradGuard no_grad;
            const auto state = unroll_posterior(model, batch, noise);
            for (std::size_t t = 0; t < state.steps; ++t) frozen_b.push_back(state.backward.b[t].value());
        }

        std::vector<T> inputs;
        for (const auto& e : model.parameters().entries()) inputs.push_back(e.tensor);
        auto loss = [&]() -> T {
            const auto state = unroll_posterior(model, batch, noise);
            if (ad::grad_enabled()) return compute_loss(state, weights).objective;
            // Numeric side: the auxiliary term sees the backward states as constants,
            // both as its target and wherever its track reads the posterior.
            LossWeights without_aux = weights;
            without_aux.alpha = 0.0;
            T objective = compute_loss(state, without_aux).objective;
            double aux = 0.0;
            LstmState<double> fwd = model.initial_forward_state(batch.batch_size);
            for (std::size_t t = 0; t < state.steps; ++t) {
                const T b = T::constant(frozen_b[t]);
                const auto q = DiagGaussian<double>::from_packed(model.posterior_net(ad::concat(fwd.h, b)));
                const auto z = rsample(q, noise[t]);
                fwd = forward_step(model.forward_cell, model.forward_input(batch, t), z, fwd, state.step_masks[t]);
                const auto lp = log_prob(DiagGaussian<double>::from_packed(model.auxiliary_net(z)), b);
                for (std::size_t r = 0; r < batch.batch_size; ++r) {
                    if (state.step_masks[t][r]) aux += lp.value().data[r];
                }
            }
            return T::constant(A::scalar(objective.item() - weights.alpha * aux / static_cast<double>(batch.batch_size)));
        };
        out.push_back(check_gradients("model_objective_" + std::string(to_string(kind)), inputs, loss, options));
    }
    return out;
}

}  // namespace latentseq
