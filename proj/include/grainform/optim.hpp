#ifndef GRAINFORM_OPTIM_HPP
#define GRAINFORM_OPTIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "grainform/nn.hpp"

namespace grainform {

enum class OptimizerKind { Sgd, Adam, Rmsprop, Adadelta, Nadam };

OptimizerKind optimizer_kind_from_name(const std::string& name);
std::string optimizer_name(OptimizerKind kind);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double learning_rate = 0.01;
    double beta1 = 0.9;    // adam / nadam first moment
    double beta2 = 0.999;  // adam / nadam second moment
    double rho = 0.9;      // rmsprop / adadelta decay
    double epsilon = 1e-8;

    void validate() const;
};

// Canonical defaults per update rule.
OptimizerConfig default_optimizer_config(OptimizerKind kind);

// Per-parameter-tensor accumulators. slot_a holds the first moment (adam,
// nadam) or the squared-gradient accumulator (rmsprop, adadelta); slot_b
// holds the second moment (adam, nadam) or the squared-update accumulator
// (adadelta). SGD keeps no buffers.
struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t step = 0;
    std::vector<Matrix> weight_slot_a, weight_slot_b;
    std::vector<std::vector<double>> bias_slot_a, bias_slot_b;
};

OptimizerState make_optimizer(const OptimizerConfig& config, const DenseNetwork& net);

// In-place parameter update; increments state.step by one.
void apply_step(OptimizerState& state, DenseNetwork& net, const GradientSet& grads);

}  // namespace grainform

#endif
