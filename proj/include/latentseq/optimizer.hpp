#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "latentseq/autodiff.hpp"
#include "latentseq/config.hpp"
#include "latentseq/errors.hpp"
#include "latentseq/parameters.hpp"

namespace latentseq {

template <std::floating_point Real>
struct AdamState {
    std::vector<ad::Array<Real>> first_moment;   // one per parameter, same shape
    std::vector<ad::Array<Real>> second_moment;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_parameters(const ParameterSet<Real>& params);
};

class NonFiniteGradient : public NumericalError {
public:
    explicit NonFiniteGradient(std::string parameter)
        : NumericalError("non-finite gradient in parameter '" + parameter + "'"), parameter_(std::move(parameter)) {}
    [[nodiscard]] const std::string& parameter() const { return parameter_; }

private:
    std::string parameter_;
};

// One bias-corrected Adam update from the gradients held by `params`. Parameters
// without an accumulated gradient are treated as having a zero gradient. If any
// gradient is non-finite nothing is modified and NonFiniteGradient is thrown.
template <std::floating_point Real>
void adam_step(ParameterSet<Real>& params, AdamState<Real>& state, double learning_rate);

// min(cap, start + increment * update) when enabled, otherwise 1.
double kl_weight_at(std::uint64_t update, const KlAnneal& schedule);

}  // namespace latentseq
