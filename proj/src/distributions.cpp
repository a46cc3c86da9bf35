#include "latentseq/distributions.hpp"

#include <cmath>
#include <numbers>

namespace latentseq {

namespace {

template <std::floating_point Real>
ad::Tensor<Real> filled_like(const ad::Tensor<Real>& like, double value) {
    return ad::Tensor<Real>::constant(ad::Array<Real>(like.shape(), static_cast<Real>(value)));
}

}  // namespace

template <std::floating_point Real>
DiagGaussian<Real> DiagGaussian<Real>::from_packed(const ad::Tensor<Real>& packed) {
    if (packed.shape().empty() || packed.shape().back() % 2 != 0) {
        throw ad::ShapeError("DiagGaussian::from_packed: last axis must be even, got " + ad::to_string(packed.shape()));
    }
    const std::size_t d = packed.shape().back() / 2;
    return {ad::slice(packed, 0, d), ad::slice(packed, d, 2 * d)};
}

template <std::floating_point Real>
ad::Tensor<Real> DiagGaussian<Real>::clamped_log_sigma() const {
    return ad::clip(log_sigma, kLogSigmaMin, kLogSigmaMax);
}

template <std::floating_point Real>
ad::Tensor<Real> DiagGaussian<Real>::sigma() const {
    return ad::exp(clamped_log_sigma());
}

template <std::floating_point Real>
ad::Tensor<Real> rsample(const DiagGaussian<Real>& d, const ad::Array<Real>& eps) {
    if (eps.shape != d.mu.shape()) {
        throw ad::ShapeError("rsample: noise shape " + ad::to_string(eps.shape) + " vs mean shape " +
                             ad::to_string(d.mu.shape()));
    }
    return d.mu + d.sigma() * ad::Tensor<Real>::constant(eps);
}

template <std::floating_point Real>
ad::Tensor<Real> log_prob(const DiagGaussian<Real>& d, const ad::Tensor<Real>& x) {
    if (x.shape() != d.mu.shape()) {
        throw ad::ShapeError("log_prob(gaussian): shape mismatch " + ad::to_string(x.shape()) + " vs " +
                             ad::to_string(d.mu.shape()));
    }
    const auto ls = d.clamped_log_sigma();
    const auto standardized = (x - d.mu) * ad::exp(ad::scale(ls, -1.0));
    const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
    const auto per_dim =
        ad::add_scalar(ad::scale(ls, -1.0) - ad::scale(standardized * standardized, 0.5), -half_log_two_pi);
    return ad::sum_last(per_dim);
}

template <std::floating_point Real>
ad::Tensor<Real> log_prob(const Bernoulli<Real>& d, const ad::Tensor<Real>& x) {
    if (x.shape() != d.logits.shape()) {
        throw ad::ShapeError("log_prob(bernoulli): shape mismatch " + ad::to_string(x.shape()) + " vs " +
                             ad::to_string(d.logits.shape()));
    }
    return ad::sum_last(x * d.logits - ad::softplus(d.logits));
}

template <std::floating_point Real>
ad::Tensor<Real> log_prob(const Categorical<Real>& d, std::span<const std::int32_t> ids) {
    return ad::pick(ad::log_softmax(d.logits), ids);
}

template <std::floating_point Real>
ad::Tensor<Real> kl_diag_gauss(const DiagGaussian<Real>& q, const DiagGaussian<Real>& p) {
    if (q.mu.shape() != p.mu.shape()) {
        throw ad::ShapeError("kl_diag_gauss: shape mismatch " + ad::to_string(q.mu.shape()) + " vs " +
                             ad::to_string(p.mu.shape()));
    }
    const auto ls_q = q.clamped_log_sigma();
    const auto ls_p = p.clamped_log_sigma();
    const auto var_q = ad::exp(ad::scale(ls_q, 2.0));
    const auto var_p = ad::exp(ad::scale(ls_p, 2.0));
    const auto diff = q.mu - p.mu;
    const auto ratio = ad::div(var_q + diff * diff, ad::scale(var_p, 2.0));
    const auto per_dim = (ls_p - ls_q) + (ratio - filled_like(ratio, 0.5));
    return ad::sum_last(per_dim);
}

#define LATENTSEQ_INSTANTIATE_DISTRIBUTIONS(R)                                                   \
    template struct DiagGaussian<R>;                                                             \
    template ad::Tensor<R> rsample<R>(const DiagGaussian<R>&, const ad::Array<R>&);              \
    template ad::Tensor<R> log_prob<R>(const DiagGaussian<R>&, const ad::Tensor<R>&);            \
    template ad::Tensor<R> log_prob<R>(const Bernoulli<R>&, const ad::Tensor<R>&);               \
    template ad::Tensor<R> log_prob<R>(const Categorical<R>&, std::span<const std::int32_t>);    \
    template ad::Tensor<R> kl_diag_gauss<R>(const DiagGaussian<R>&, const DiagGaussian<R>&);

LATENTSEQ_INSTANTIATE_DISTRIBUTIONS(float)
LATENTSEQ_INSTANTIATE_DISTRIBUTIONS(double)

}  // namespace latentseq
