#pragma once

#include <cstdint>
#include <span>

#include "latentseq/autodiff.hpp"

namespace latentseq {

// log_sigma is clamped to this range before every use.
inline constexpr double kLogSigmaMin = -8.0;
inline constexpr double kLogSigmaMax = 8.0;

template <std::floating_point Real>
struct DiagGaussian {
    ad::Tensor<Real> mu;
    ad::Tensor<Real> log_sigma;

    // Splits a head output [..., 2D] into mean [..., :D] and log std [..., D:].
    static DiagGaussian from_packed(const ad::Tensor<Real>& packed);

    [[nodiscard]] ad::Tensor<Real> clamped_log_sigma() const;
    [[nodiscard]] ad::Tensor<Real> sigma() const;
};

template <std::floating_point Real>
struct Bernoulli {
    ad::Tensor<Real> logits;
};

template <std::floating_point Real>
struct Categorical {
    ad::Tensor<Real> logits;
};

// mu + sigma * eps, differentiable in mu and log_sigma.
template <std::floating_point Real>
ad::Tensor<Real> rsample(const DiagGaussian<Real>& d, const ad::Array<Real>& eps);

// Log densities summed over the last (event) axis: [B, D] -> [B].
template <std::floating_point Real>
ad::Tensor<Real> log_prob(const DiagGaussian<Real>& d, const ad::Tensor<Real>& x);
template <std::floating_point Real>
ad::Tensor<Real> log_prob(const Bernoulli<Real>& d, const ad::Tensor<Real>& x);
template <std::floating_point Real>
ad::Tensor<Real> log_prob(const Categorical<Real>& d, std::span<const std::int32_t> ids);

// Analytic KL(q || p) between diagonal Gaussians, summed over the last axis.
template <std::floating_point Real>
ad::Tensor<Real> kl_diag_gauss(const DiagGaussian<Real>& q, const DiagGaussian<Real>& p);

}  // namespace latentseq
