#include "latentseq/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace latentseq {

template <std::floating_point Real>
ad::Tensor<Real> ParameterSet<Real>::add(std::string name, ad::Array<Real> value) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    auto t = ad::Tensor<Real>::parameter(std::move(value));
    entries_.push_back({std::move(name), t});
    return t;
}

template <std::floating_point Real>
std::size_t ParameterSet<Real>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

template <std::floating_point Real>
const ad::Tensor<Real>& ParameterSet<Real>::find(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw std::out_of_range("unknown parameter: " + std::string(name));
}

template <std::floating_point Real>
bool ParameterSet<Real>::contains(std::string_view name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

template <std::floating_point Real>
void ParameterSet<Real>::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

template <std::floating_point Real>
double ParameterSet<Real>::grad_norm() const {
    double sq = 0.0;
    for (const auto& e : entries_) {
        if (!e.tensor.has_grad()) continue;
        for (Real g : e.tensor.node()->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    return std::sqrt(sq);
}

template <std::floating_point Real>
double ParameterSet<Real>::clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (max_norm > 0.0 && norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& e : entries_) {
            if (!e.tensor.has_grad()) continue;
            for (Real& g : e.tensor.mutable_grad()) g = static_cast<Real>(static_cast<double>(g) * factor);
        }
    }
    return norm;
}

template <std::floating_point Real>
std::vector<ad::Array<Real>> ParameterSet<Real>::snapshot() const {
    std::vector<ad::Array<Real>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor.value());
    return out;
}

template <std::floating_point Real>
void ParameterSet<Real>::restore(const std::vector<ad::Array<Real>>& values) {
    if (values.size() != entries_.size()) throw std::invalid_argument("restore: parameter count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].shape != entries_[i].tensor.shape()) {
            throw ad::ShapeError("restore: shape mismatch for " + entries_[i].name);
        }
        entries_[i].tensor.mutable_value() = values[i];
    }
}

template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace latentseq
