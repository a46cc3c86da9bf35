#include "latentseq/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace latentseq {

template <std::floating_point Real>
AdamState<Real> AdamState<Real>::for_parameters(const ParameterSet<Real>& params) {
    AdamState state;
    for (const auto& e : params.entries()) {
        state.first_moment.emplace_back(e.tensor.shape());
        state.second_moment.emplace_back(e.tensor.shape());
    }
    return state;
}

template <std::floating_point Real>
void adam_step(ParameterSet<Real>& params, AdamState<Real>& state, double learning_rate) {
    auto& entries = params.entries();
    if (state.first_moment.size() != entries.size() || state.second_moment.size() != entries.size()) {
        throw std::invalid_argument("adam_step: optimizer state does not match the parameter set");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& t = entries[i].tensor;
        if (state.first_moment[i].shape != t.shape() || state.second_moment[i].shape != t.shape()) {
            throw std::invalid_argument("adam_step: moment shape mismatch for '" + entries[i].name + "'");
        }
        if (!t.has_grad()) continue;
        for (Real g : t.node()->grad) {
            if (!std::isfinite(g)) throw NonFiniteGradient(entries[i].name);
        }
    }

    ++state.step;
    const double n = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, n);
    const double correction2 = 1.0 - std::pow(state.beta2, n);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& t = entries[i].tensor;
        auto& value = t.mutable_value().data;
        auto& m = state.first_moment[i].data;
        auto& v = state.second_moment[i].data;
        const std::vector<Real>* grad = t.has_grad() ? &t.node()->grad : nullptr;
        for (std::size_t j = 0; j < value.size(); ++j) {
            const double g = grad ? static_cast<double>((*grad)[j]) : 0.0;
            const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            m[j] = static_cast<Real>(mj);
            v[j] = static_cast<Real>(vj);
            const double update = learning_rate * (mj / correction1) / (std::sqrt(vj / correction2) + state.epsilon);
            value[j] = static_cast<Real>(value[j] - update);
        }
    }
}

double kl_weight_at(std::uint64_t update, const KlAnneal& schedule) {
    if (!schedule.enabled) return 1.0;
    return std::min(schedule.cap, schedule.start + schedule.increment * static_cast<double>(update));
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParameterSet<float>&, AdamState<float>&, double);
template void adam_step<double>(ParameterSet<double>&, AdamState<double>&, double);

}  // namespace latentseq
