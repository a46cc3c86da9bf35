#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "latentseq/autodiff.hpp"

namespace latentseq {

// Ordered, named collection of trainable leaf tensors. Order is registration
// order and is what checkpoints and optimizers iterate over.
template <std::floating_point Real>
class ParameterSet {
public:
    struct Entry {
        std::string name;
        ad::Tensor<Real> tensor;
    };

    ad::Tensor<Real> add(std::string name, ad::Array<Real> value);

    [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
    [[nodiscard]] std::vector<Entry>& entries() { return entries_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] std::size_t scalar_count() const;

    // Throws std::out_of_range naming the missing parameter.
    [[nodiscard]] const ad::Tensor<Real>& find(std::string_view name) const;
    [[nodiscard]] bool contains(std::string_view name) const;

    void zero_grad();
    [[nodiscard]] double grad_norm() const;
    // Scales all gradients so their global norm is at most max_norm; returns the pre-clip norm.
    double clip_grad_norm(double max_norm);

    [[nodiscard]] std::vector<ad::Array<Real>> snapshot() const;
    void restore(const std::vector<ad::Array<Real>>& values);

private:
    std::vector<Entry> entries_;
};

}  // namespace latentseq
