#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latentseq/autodiff.hpp"
#include "latentseq/data.hpp"
#include "latentseq/model.hpp"

namespace latentseq {

// Central differences. Relative error is |a - n| / max(|a|, |n|, denominator_floor),
// so gradients far below the floor are compared in absolute terms.
struct GradCheckOptions {
    double epsilon = 1e-4;
    double tolerance = 1e-3;
    double denominator_floor = 1e-6;
};

struct GradCheckResult {
    std::string name;
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    std::string worst;  // "input[index]: analytic vs numeric" of the largest error
    bool passed = true;
};

// Compares the backward() gradient of `loss` w.r.t. each input against central
// differences. `loss` must rebuild the graph from the current input values.
GradCheckResult check_gradients(const std::string& name, const std::vector<ad::Tensor<double>>& inputs,
                                const std::function<ad::Tensor<double>()>& loss, const GradCheckOptions& options = {});

// Every differentiable op, distribution term and recurrent step on random inputs.
std::vector<GradCheckResult> op_gradient_suite(std::uint64_t seed, const GradCheckOptions& options = {});

struct TinyModelSpec {
    ObservationKind kind = ObservationKind::frames;
    std::size_t z_dim = 2;
    std::size_t hidden = 4;
    std::size_t steps = 3;
    std::size_t batch = 2;
};

// Random model and batch for gradient checks; the last row is one position shorter.
SequenceBatch tiny_batch(const TinyModelSpec& spec, std::uint64_t seed);
ModelConfig tiny_model_config(const TinyModelSpec& spec);

// Full training objective (alpha, beta and kl weight all nonzero) on a tiny model
// of each observation kind, w.r.t. every parameter. The numeric side holds the
// auxiliary target b[t] at its unperturbed value, matching the stop-gradient.
std::vector<GradCheckResult> model_gradient_suite(std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace latentseq
