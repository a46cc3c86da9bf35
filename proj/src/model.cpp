#include "latentseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "latentseq/errors.hpp"

namespace latentseq {

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string(name) + " must be >= 1");
    };
    positive(observation_width, "observation width");
    positive(hidden_size, "hidden_size");
    positive(backward_hidden_size, "backward_hidden_size");
    positive(z_dim, "z_dim");
    positive(head_hidden, "head_hidden");
    if (kind == ObservationKind::tokens) positive(embed_dim, "embed_dim");
}

template <std::floating_point Real>
HeadNet<Real> HeadNet<Real>::create(ParameterSet<Real>& params, const std::string& prefix, std::size_t input_size,
                                    std::size_t hidden_size, std::size_t output_size, Rng& rng) {
    auto uniform = [&](ad::Shape shape, std::size_t fan_in) {
        const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-k, k);
        ad::Array<Real> a(std::move(shape));
        for (auto& v : a.data) v = static_cast<Real>(dist(rng));
        return a;
    };
    HeadNet net;
    net.hidden_weights = params.add(prefix + ".hidden_weights", uniform({input_size, hidden_size}, input_size));
    net.hidden_bias = params.add(prefix + ".hidden_bias", uniform({hidden_size}, input_size));
    net.output_weights = params.add(prefix + ".output_weights", uniform({hidden_size, output_size}, hidden_size));
    net.output_bias = params.add(prefix + ".output_bias", uniform({output_size}, hidden_size));
    return net;
}

template <std::floating_point Real>
ad::Tensor<Real> HeadNet<Real>::operator()(const ad::Tensor<Real>& x) const {
    const std::size_t rows = x.shape().at(0);
    const auto pre = ad::matmul(x, hidden_weights) + ad::broadcast(hidden_bias, rows);
    const auto hidden = ad::clip(ad::leaky_relu(pre, kHeadLeakiness), -kHeadClip, kHeadClip);
    return ad::matmul(hidden, output_weights) + ad::broadcast(output_bias, rows);
}

template <std::floating_point Real>
SequenceModel<Real>::SequenceModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
    config_.validate();
    Rng rng = make_rng(init_seed, Stream::init);
    const std::size_t in = input_width();
    const std::size_t h = config_.hidden_size;
    const std::size_t hb = config_.backward_hidden_size;
    const std::size_t z = config_.z_dim;
    const std::size_t hh = config_.head_hidden;

    if (config_.kind == ObservationKind::tokens) {
        std::uniform_real_distribution<double> dist(-0.1, 0.1);
        auto table = [&] {
            ad::Array<Real> a(ad::Shape{config_.observation_width, config_.embed_dim});
            for (auto& v : a.data) v = static_cast<Real>(dist(rng));
            return a;
        };
        forward_embedding = params_.add("forward.embedding", table());
        backward_embedding = params_.add("backward.embedding", table());
    }
    forward_cell = LstmCell<Real>::create(params_, "forward.lstm", in + z, h, rng);
    forward_h0 = params_.add("forward.h0", ad::Array<Real>(ad::Shape{h}));
    forward_c0 = params_.add("forward.c0", ad::Array<Real>(ad::Shape{h}));
    backward_cell = LstmCell<Real>::create(params_, "backward.lstm", in, hb, rng);
    backward_h0 = params_.add("backward.h0", ad::Array<Real>(ad::Shape{hb}));
    backward_c0 = params_.add("backward.c0", ad::Array<Real>(ad::Shape{hb}));
    prior_net = HeadNet<Real>::create(params_, "prior", h, hh, 2 * z, rng);
    posterior_net = HeadNet<Real>::create(params_, "posterior", h + hb, hh, 2 * z, rng);
    output_net = HeadNet<Real>::create(params_, "output", h, hh, output_width(), rng);
    auxiliary_net = HeadNet<Real>::create(params_, "auxiliary", z, hh, 2 * hb, rng);
    backward_output_net = HeadNet<Real>::create(params_, "backward_output", hb, hh, output_width(), rng);
}

template <std::floating_point Real>
bool SequenceModel<Real>::is_backward_network_parameter(std::string_view name) {
    return name.starts_with("backward.");
}

template <std::floating_point Real>
std::size_t SequenceModel<Real>::input_width() const {
    return config_.kind == ObservationKind::tokens ? config_.embed_dim : config_.observation_width;
}

template <std::floating_point Real>
std::size_t SequenceModel<Real>::output_width() const {
    return config_.kind == ObservationKind::frames ? 2 * config_.observation_width : config_.observation_width;
}

template <std::floating_point Real>
ad::Tensor<Real> SequenceModel<Real>::forward_input(const SequenceBatch& batch, std::size_t position) const {
    if (config_.kind == ObservationKind::tokens) {
        const auto ids = batch.ids_at(position);
        return ad::embedding<Real>(forward_embedding, ids);
    }
    return ad::Tensor<Real>::constant(batch.values_at<Real>(position));
}

template <std::floating_point Real>
ad::Tensor<Real> SequenceModel<Real>::backward_input(const SequenceBatch& batch, std::size_t position) const {
    if (config_.kind == ObservationKind::tokens) {
        const auto ids = batch.ids_at(position);
        return ad::embedding<Real>(backward_embedding, ids);
    }
    return ad::Tensor<Real>::constant(batch.values_at<Real>(position));
}

template <std::floating_point Real>
LstmState<Real> SequenceModel<Real>::initial_forward_state(std::size_t rows) const {
    return {ad::broadcast(forward_h0, rows), ad::broadcast(forward_c0, rows)};
}

template <std::floating_point Real>
LstmState<Real> SequenceModel<Real>::initial_backward_state(std::size_t rows) const {
    return {ad::broadcast(backward_h0, rows), ad::broadcast(backward_c0, rows)};
}

template <std::floating_point Real>
ad::Tensor<Real> SequenceModel<Real>::observation_log_prob(const ad::Tensor<Real>& head_output,
                                                           const SequenceBatch& batch, std::size_t position) const {
    switch (config_.kind) {
        case ObservationKind::frames: {
            const auto target = ad::Tensor<Real>::constant(batch.values_at<Real>(position));
            return log_prob(DiagGaussian<Real>::from_packed(head_output), target);
        }
        case ObservationKind::bits: {
            const auto target = ad::Tensor<Real>::constant(batch.values_at<Real>(position));
            return log_prob(Bernoulli<Real>{head_output}, target);
        }
        case ObservationKind::tokens: {
            const auto ids = batch.ids_at(position);
            return log_prob(Categorical<Real>{head_output}, std::span<const std::int32_t>(ids));
        }
    }
    throw std::logic_error("unreachable observation kind");
}

template <std::floating_point To, std::floating_point From>
SequenceModel<To> convert_model(const SequenceModel<From>& source) {
    SequenceModel<To> out(source.config(), 0);
    auto& dst = out.parameters().entries();
    const auto& src = source.parameters().entries();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i].tensor.mutable_value() = src[i].tensor.value().template cast<To>();
    }
    return out;
}

template <std::floating_point Real>
std::vector<ad::Array<Real>> standard_normal_noise(Rng& rng, std::size_t steps, std::size_t rows, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<ad::Array<Real>> out;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        ad::Array<Real> a(ad::Shape{rows, dim});
        for (auto& v : a.data) v = static_cast<Real>(normal(rng));
        out.push_back(std::move(a));
    }
    return out;
}

template <std::floating_point Real>
UnrolledState<Real> unroll_posterior(const SequenceModel<Real>& model, const SequenceBatch& batch,
                                     const std::vector<ad::Array<Real>>& noise, bool isolate_auxiliary) {
    if (batch.batch_size == 0) throw std::invalid_argument("unroll_posterior: empty batch");
    if (batch.kind != model.config().kind) throw std::invalid_argument("unroll_posterior: batch kind mismatch");
    const std::size_t rows = batch.batch_size;
    const std::size_t positions = batch.max_length;
    const std::size_t steps = batch.steps();
    if (noise.size() < steps) {
        throw std::invalid_argument("unroll_posterior: " + std::to_string(noise.size()) + " noise arrays for " +
                                    std::to_string(steps) + " steps");
    }

    UnrolledState<Real> state;
    state.steps = steps;

    std::vector<ad::Tensor<Real>> back_inputs;
    std::vector<StepMask> position_masks;
    for (std::size_t p = 0; p < positions; ++p) {
        back_inputs.push_back(model.backward_input(batch, p));
        position_masks.push_back(batch.position_mask(p));
    }
    state.backward = backward_unroll<Real>(model.backward_cell, back_inputs, position_masks,
                                           model.initial_backward_state(rows));

    // The detached track repeats the forward recursion with every posterior reading
    // stop_gradient(b). Its values equal the main track's bit for bit; the auxiliary
    // term is taken from it so that its gradient never reaches the backward network.
    const bool detached = isolate_auxiliary && ad::grad_enabled();
    LstmState<Real> fwd = model.initial_forward_state(rows);
    LstmState<Real> fwd_detached = fwd;
    state.forward.h.push_back(fwd.h);
    state.forward.c.push_back(fwd.c);
    for (std::size_t t = 0; t < steps; ++t) {
        const StepMask& mask = position_masks[t + 1];
        const auto& b = state.backward.b[t];
        const auto b_const = ad::stop_gradient(b);
        const auto input = model.forward_input(batch, t);

        auto prior = DiagGaussian<Real>::from_packed(model.prior_net(fwd.h));
        auto posterior = DiagGaussian<Real>::from_packed(model.posterior_net(ad::concat(fwd.h, b)));
        auto z = rsample(posterior, noise[t]);
        ad::Tensor<Real> z_aux = z;
        if (detached) {
            const auto q = DiagGaussian<Real>::from_packed(model.posterior_net(ad::concat(fwd_detached.h, b_const)));
            z_aux = rsample(q, noise[t]);
            fwd_detached = forward_step(model.forward_cell, input, z_aux, fwd_detached, mask);
        }

        fwd = forward_step(model.forward_cell, input, z, fwd, mask);
        auto out = model.output_net(fwd.h);
        auto rec = model.observation_log_prob(out, batch, t + 1);
        auto kl = kl_diag_gauss(posterior, prior);

        auto auxiliary = DiagGaussian<Real>::from_packed(model.auxiliary_net(z_aux));
        auto aux = log_prob(auxiliary, b_const);

        auto back_out = model.backward_output_net(b);
        auto bwd = model.observation_log_prob(back_out, batch, t);

        state.forward.h.push_back(fwd.h);
        state.forward.c.push_back(fwd.c);
        state.step_masks.push_back(mask);
        state.z.push_back(std::move(z));
        state.prior.push_back(std::move(prior));
        state.posterior.push_back(std::move(posterior));
        state.output_params.push_back(std::move(out));
        state.auxiliary.push_back(std::move(auxiliary));
        state.backward_output_params.push_back(std::move(back_out));
        state.rec.push_back(std::move(rec));
        state.kl.push_back(std::move(kl));
        state.aux.push_back(std::move(aux));
        state.bwd.push_back(std::move(bwd));
    }
    return state;
}

template <std::floating_point Real>
LossBreakdown<Real> compute_loss(const UnrolledState<Real>& state, const LossWeights& weights) {
    LossBreakdown<Real> out;
    const std::size_t rows = state.steps > 0 ? state.step_masks.front().size() : 0;
    out.sequences = rows;
    out.sequence_elbo.assign(rows, 0.0);

    double rec = 0.0, kl = 0.0, aux = 0.0, bwd = 0.0;
    ad::Tensor<Real> total;
    for (std::size_t t = 0; t < state.steps; ++t) {
        const StepMask& mask = state.step_masks[t];
        for (std::size_t b = 0; b < rows; ++b) {
            if (!mask[b]) continue;
            ++out.valid_steps;
            const double r = state.rec[t].value().data[b];
            const double k = state.kl[t].value().data[b];
            rec += r;
            kl += k;
            aux += state.aux[t].value().data[b];
            bwd += state.bwd[t].value().data[b];
            out.sequence_elbo[b] += r - k;
        }

        ad::Tensor<Real> step = state.rec[t];
        if (weights.alpha != 0.0) step = step + ad::scale(state.aux[t], weights.alpha);
        if (weights.beta != 0.0) step = step + ad::scale(state.bwd[t], weights.beta);
        if (weights.kl_weight != 0.0) step = step - ad::scale(state.kl[t], weights.kl_weight);
        ad::Array<Real> m(ad::Shape{rows});
        for (std::size_t b = 0; b < rows; ++b) m.data[b] = mask[b] ? Real{1} : Real{0};
        const auto step_sum = ad::sum(step * ad::Tensor<Real>::constant(std::move(m)));
        total = total.defined() ? total + step_sum : step_sum;
    }

    const double n = rows > 0 ? static_cast<double>(rows) : 1.0;
    out.reconstruction = rec / n;
    out.kl = kl / n;
    out.aux = aux / n;
    out.backward_recon = bwd / n;
    out.weighted_total = -(out.reconstruction + weights.alpha * out.aux + weights.beta * out.backward_recon -
                           weights.kl_weight * out.kl);
    if (out.valid_steps > 0) {
        const double s = static_cast<double>(out.valid_steps);
        out.reconstruction_per_step = rec / s;
        out.kl_per_step = kl / s;
        out.aux_per_step = aux / s;
        out.backward_recon_per_step = bwd / s;
    }
    out.objective = total.defined() ? ad::scale(total, -1.0 / n) : ad::Tensor<Real>::constant(ad::Array<Real>());
    return out;
}

template <std::floating_point Real>
std::vector<double> log_importance_weights(const SequenceModel<Real>& model, const SequenceBatch& batch,
                                           const std::vector<ad::Array<Real>>& noise) {
    ad::NoGradGuard no_grad;
    const auto state = unroll_posterior(model, batch, noise, false);
    std::vector<double> weights(batch.batch_size, 0.0);
    for (std::size_t t = 0; t < state.steps; ++t) {
        const auto log_p = log_prob(state.prior[t], state.z[t]);
        const auto log_q = log_prob(state.posterior[t], state.z[t]);
        for (std::size_t b = 0; b < batch.batch_size; ++b) {
            if (!state.step_masks[t][b]) continue;
            weights[b] += static_cast<double>(state.rec[t].value().data[b]) + log_p.value().data[b] -
                          log_q.value().data[b];
        }
    }
    return weights;
}

std::vector<double> log_mean_exp(const std::vector<std::vector<double>>& weights) {
    if (weights.empty()) throw std::invalid_argument("log_mean_exp: no replicas");
    const std::size_t rows = weights.front().size();
    std::vector<double> out(rows);
    for (std::size_t b = 0; b < rows; ++b) {
        double mx = -std::numeric_limits<double>::infinity();
        for (const auto& w : weights) mx = std::max(mx, w.at(b));
        if (!std::isfinite(mx)) {
            out[b] = mx;
            continue;
        }
        double acc = 0.0;
        for (const auto& w : weights) acc += std::exp(w[b] - mx);
        out[b] = mx + std::log(acc / static_cast<double>(weights.size()));
    }
    return out;
}

template <std::floating_point Real>
std::vector<double> iwae_bound(const SequenceModel<Real>& model, const SequenceBatch& batch, std::size_t samples,
                               std::uint64_t seed, std::size_t threads) {
    if (samples < 1) throw std::invalid_argument("iwae_bound: sample count must be >= 1");
    const std::size_t steps = batch.steps();
    const std::size_t z_dim = model.config().z_dim;
    auto replica = [&](std::size_t k) {
        Rng rng = make_rng(seed, Stream::eval_noise, k);
        const auto noise = standard_normal_noise<Real>(rng, steps, batch.batch_size, z_dim);
        return log_importance_weights<Real>(model, batch, noise);
    };
    std::vector<std::vector<double>> weights(samples);
    if (threads <= 1) {
        for (std::size_t k = 0; k < samples; ++k) weights[k] = replica(k);
    } else {
        for (std::size_t start = 0; start < samples; start += threads) {
            std::vector<std::future<std::vector<double>>> pending;
            const std::size_t end = std::min(samples, start + threads);
            for (std::size_t k = start; k < end; ++k) pending.push_back(std::async(std::launch::async, replica, k));
            for (std::size_t k = start; k < end; ++k) weights[k] = pending[k - start].get();
        }
    }
    return log_mean_exp(weights);
}

namespace {

// Chooses one observation for row `row` of a head output.
template <std::floating_point Real>
void decode_row(ObservationKind kind, const ad::Array<Real>& head, std::size_t row, Decode decode, Rng& rng,
                std::vector<float>& values_out, std::int32_t& id_out) {
    const std::size_t cols = head.cols();
    const Real* r = head.data.data() + row * cols;
    switch (kind) {
        case ObservationKind::frames: {
            const std::size_t width = cols / 2;
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t f = 0; f < width; ++f) {
                double v = r[f];
                if (decode == Decode::sample) {
                    const double ls = std::clamp(static_cast<double>(r[width + f]), kLogSigmaMin, kLogSigmaMax);
                    v += std::exp(ls) * normal(rng);
                }
                values_out.push_back(static_cast<float>(v));
            }
            break;
        }
        case ObservationKind::bits: {
            std::uniform_real_distribution<double> uniform(0.0, 1.0);
            for (std::size_t f = 0; f < cols; ++f) {
                const double logit = r[f];
                bool bit = logit > 0.0;
                if (decode == Decode::sample) bit = uniform(rng) < 1.0 / (1.0 + std::exp(-logit));
                values_out.push_back(bit ? 1.0f : 0.0f);
            }
            break;
        }
        case ObservationKind::tokens: {
            if (decode == Decode::argmax) {
                id_out = static_cast<std::int32_t>(std::max_element(r, r + cols) - r);
            } else {
                const double mx = *std::max_element(r, r + cols);
                std::vector<double> p(cols);
                for (std::size_t c = 0; c < cols; ++c) p[c] = std::exp(r[c] - mx);
                std::discrete_distribution<std::int32_t> dist(p.begin(), p.end());
                id_out = dist(rng);
            }
            break;
        }
    }
}

template <std::floating_point Real>
std::size_t sequence_length(const ModelConfig& cfg, const Sequence& s) {
    return cfg.kind == ObservationKind::tokens ? s.ids.size() : s.values.size() / cfg.observation_width;
}

// Builds a one-position input tensor from each row's element at `position`.
template <std::floating_point Real>
ad::Tensor<Real> rows_input(const SequenceModel<Real>& model, const std::vector<Sequence>& rows,
                            std::size_t position) {
    const auto& cfg = model.config();
    if (cfg.kind == ObservationKind::tokens) {
        std::vector<std::int32_t> ids(rows.size(), 0);
        for (std::size_t b = 0; b < rows.size(); ++b) {
            if (position < rows[b].ids.size()) ids[b] = rows[b].ids[position];
        }
        return ad::embedding<Real>(model.forward_embedding, ids);
    }
    const std::size_t w = cfg.observation_width;
    ad::Array<Real> a(ad::Shape{rows.size(), w});
    for (std::size_t b = 0; b < rows.size(); ++b) {
        if (position * w + w > rows[b].values.size()) continue;
        for (std::size_t f = 0; f < w; ++f) a.data[b * w + f] = static_cast<Real>(rows[b].values[position * w + f]);
    }
    return ad::Tensor<Real>::constant(std::move(a));
}

template <std::floating_point Real>
void append_decoded(const ModelConfig& cfg, Sequence& s, const ad::Array<Real>& head, std::size_t row,
                    Decode decode, Rng& rng, bool& ended) {
    std::vector<float> values;
    std::int32_t id = -1;
    decode_row(cfg.kind, head, row, decode, rng, values, id);
    if (cfg.kind == ObservationKind::tokens) {
        s.ids.push_back(id);
        ended = cfg.end_id >= 0 && id == cfg.end_id;
    } else {
        s.values.insert(s.values.end(), values.begin(), values.end());
    }
}

}  // namespace

template <std::floating_point Real>
std::vector<Sequence> unroll_prior(const SequenceModel<Real>& model, const SequenceBatch& prefix,
                                   const GenerationOptions& options, Rng& rng) {
    if (options.steps < 1) throw std::invalid_argument("unroll_prior: steps must be >= 1");
    const auto& cfg = model.config();
    ad::NoGradGuard no_grad;
    const std::size_t rows = prefix.batch_size;
    std::vector<Sequence> out(rows);
    std::vector<std::size_t> target(rows);
    std::vector<bool> active(rows, true);
    for (std::size_t b = 0; b < rows; ++b) {
        const std::size_t len = prefix.lengths[b];
        if (len == 0) throw std::invalid_argument("unroll_prior: every prefix row needs at least one position");
        for (std::size_t t = 0; t < len; ++t) {
            if (cfg.kind == ObservationKind::tokens) {
                out[b].ids.push_back(prefix.ids[b * prefix.max_length + t]);
            } else {
                const auto* src = prefix.values.data() + (b * prefix.max_length + t) * prefix.width;
                out[b].values.insert(out[b].values.end(), src, src + prefix.width);
            }
        }
        target[b] = len + options.steps;
    }

    LstmState<Real> state = model.initial_forward_state(rows);
    for (std::size_t s = 0;; ++s) {
        StepMask mask(rows, 0);
        bool any = false;
        for (std::size_t b = 0; b < rows; ++b) {
            mask[b] = active[b] && s < sequence_length<Real>(cfg, out[b]) && s + 1 < target[b];
            any = any || mask[b];
        }
        if (!any) break;

        const auto prior = DiagGaussian<Real>::from_packed(model.prior_net(state.h));
        auto eps = standard_normal_noise<Real>(rng, 1, rows, cfg.z_dim).front();
        for (auto& v : eps.data) v = static_cast<Real>(v * options.latent_noise_scale);
        const auto z = rsample(prior, eps);
        state = forward_step(model.forward_cell, rows_input(model, out, s), z, state, mask);
        const auto head = model.output_net(state.h).value();
        for (std::size_t b = 0; b < rows; ++b) {
            if (!mask[b] || s + 1 < prefix.lengths[b]) continue;
            bool ended = false;
            append_decoded(cfg, out[b], head, b, options.decode, rng, ended);
            if (ended) active[b] = false;
        }
    }
    return out;
}

template <std::floating_point Real>
LatentEncoding encode_posterior_means(const SequenceModel<Real>& model, const Sequence& sequence) {
    ad::NoGradGuard no_grad;
    const auto& cfg = model.config();
    const std::vector<Sequence> one{sequence};
    const auto batch = make_batch(cfg.kind, cfg.observation_width, one);
    const std::vector<ad::Array<Real>> zeros(batch.steps(), ad::Array<Real>(ad::Shape{1, cfg.z_dim}));
    const auto state = unroll_posterior<Real>(model, batch, zeros);
    LatentEncoding enc;
    enc.z_dim = cfg.z_dim;
    for (const auto& z : state.z) {
        for (Real v : z.value().data) enc.values.push_back(static_cast<double>(v));
    }
    return enc;
}

template <std::floating_point Real>
Sequence decode_latents(const SequenceModel<Real>& model, const LatentEncoding& encoding, const Sequence& start,
                        std::size_t max_steps, Decode decode, Rng& rng) {
    const auto& cfg = model.config();
    if (encoding.steps() == 0) throw std::invalid_argument("decode_latents: empty encoding");
    if (encoding.z_dim != cfg.z_dim) throw std::invalid_argument("decode_latents: encoding z_dim mismatch");
    if (sequence_length<Real>(cfg, start) == 0) throw std::invalid_argument("decode_latents: empty start sequence");
    ad::NoGradGuard no_grad;

    std::vector<Sequence> row(1);
    if (cfg.kind == ObservationKind::tokens) {
        row[0].ids.push_back(start.ids.front());
    } else {
        row[0].values.assign(start.values.begin(), start.values.begin() + cfg.observation_width);
    }
    LstmState<Real> state = model.initial_forward_state(1);
    const StepMask mask{1};
    for (std::size_t s = 0; s < max_steps; ++s) {
        const std::size_t zi = std::min(s, encoding.steps() - 1);
        ad::Array<Real> z(ad::Shape{1, cfg.z_dim});
        for (std::size_t d = 0; d < cfg.z_dim; ++d) z.data[d] = static_cast<Real>(encoding.values[zi * cfg.z_dim + d]);
        state = forward_step(model.forward_cell, rows_input(model, row, s), ad::Tensor<Real>::constant(std::move(z)),
                             state, mask);
        const auto head = model.output_net(state.h).value();
        bool ended = false;
        append_decoded(cfg, row[0], head, 0, decode, rng, ended);
        if (ended) break;
    }
    return row[0];
}

#define LATENTSEQ_INSTANTIATE_MODEL(R)                                                                             \
    template struct HeadNet<R>;                                                                                    \
    template class SequenceModel<R>;                                                                               \
    template std::vector<ad::Array<R>> standard_normal_noise<R>(Rng&, std::size_t, std::size_t, std::size_t);     \
    template UnrolledState<R> unroll_posterior<R>(const SequenceModel<R>&, const SequenceBatch&,                   \
                                                  const std::vector<ad::Array<R>>&, bool);                            \
    template LossBreakdown<R> compute_loss<R>(const UnrolledState<R>&, const LossWeights&);                        \
    template std::vector<double> log_importance_weights<R>(const SequenceModel<R>&, const SequenceBatch&,          \
                                                           const std::vector<ad::Array<R>>&);                         \
    template std::vector<double> iwae_bound<R>(const SequenceModel<R>&, const SequenceBatch&, std::size_t,         \
                                               std::uint64_t, std::size_t);                                        \
    template std::vector<Sequence> unroll_prior<R>(const SequenceModel<R>&, const SequenceBatch&,                  \
                                                   const GenerationOptions&, Rng&);                                \
    template LatentEncoding encode_posterior_means<R>(const SequenceModel<R>&, const Sequence&);                   \
    template Sequence decode_latents<R>(const SequenceModel<R>&, const LatentEncoding&, const Sequence&,           \
                                        std::size_t, Decode, Rng&);

LATENTSEQ_INSTANTIATE_MODEL(float)
LATENTSEQ_INSTANTIATE_MODEL(double)

template SequenceModel<double> convert_model<double, float>(const SequenceModel<float>&);
template SequenceModel<float> convert_model<float, double>(const SequenceModel<double>&);
template SequenceModel<float> convert_model<float, float>(const SequenceModel<float>&);
template SequenceModel<double> convert_model<double, double>(const SequenceModel<double>&);

}  // namespace latentseq
