#include "grainform/optim.hpp"

#include <cmath>

namespace grainform {

OptimizerKind optimizer_kind_from_name(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "rmsprop") return OptimizerKind::Rmsprop;
    if (name == "adadelta") return OptimizerKind::Adadelta;
    if (name == "nadam") return OptimizerKind::Nadam;
    throw ValidationError("unknown optimizer: " + name);
}

std::string optimizer_name(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Rmsprop: return "rmsprop";
        case OptimizerKind::Adadelta: return "adadelta";
        case OptimizerKind::Nadam: return "nadam";
    }
    return "?";
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("optimizer: learning_rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0) throw ValidationError("optimizer: beta1 must be in [0,1)");
    if (beta2 < 0.0 || beta2 >= 1.0) throw ValidationError("optimizer: beta2 must be in [0,1)");
    if (rho < 0.0 || rho >= 1.0) throw ValidationError("optimizer: rho must be in [0,1)");
    if (!(epsilon > 0.0)) throw ValidationError("optimizer: epsilon must be > 0");
}

OptimizerConfig default_optimizer_config(OptimizerKind kind) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    switch (kind) {
        case OptimizerKind::Sgd:
            cfg.learning_rate = 0.01;
            break;
        case OptimizerKind::Adam:
        case OptimizerKind::Nadam:
            cfg.learning_rate = 0.001;
            cfg.beta1 = 0.9;
            cfg.beta2 = 0.999;
            cfg.epsilon = 1e-8;
            break;
        case OptimizerKind::Rmsprop:
            cfg.learning_rate = 0.001;
            cfg.rho = 0.9;
            cfg.epsilon = 1e-8;
            break;
        case OptimizerKind::Adadelta:
            cfg.learning_rate = 1.0;
            cfg.rho = 0.95;
            cfg.epsilon = 1e-7;
            break;
    }
    return cfg;
}

OptimizerState make_optimizer(const OptimizerConfig& config, const DenseNetwork& net) {
    config.validate();
    OptimizerState state;
    state.config = config;
    state.step = 0;
    if (config.kind == OptimizerKind::Sgd) return state;
    const bool needs_b = true;  // all stateful kinds here keep two buffers
    for (const DenseLayer& layer : net.layers) {
        state.weight_slot_a.emplace_back(layer.weights.rows(), layer.weights.cols());
        state.bias_slot_a.emplace_back(layer.bias.size(), 0.0);
        if (needs_b) {
            state.weight_slot_b.emplace_back(layer.weights.rows(), layer.weights.cols());
            state.bias_slot_b.emplace_back(layer.bias.size(), 0.0);
        }
    }
    return state;
}

namespace {

// One scalar parameter update. a and b are the two accumulator slots.
struct ScalarRule {
    const OptimizerConfig& cfg;
    std::uint64_t t;  // step number, starting at 1
    double bias_corr1 = 0.0;
    double bias_corr2 = 0.0;

    ScalarRule(const OptimizerConfig& config, std::uint64_t step) : cfg(config), t(step) {
        if (cfg.kind == OptimizerKind::Adam || cfg.kind == OptimizerKind::Nadam) {
            bias_corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
            bias_corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        }
    }

    double update(double g, double& a, double& b) const {
        switch (cfg.kind) {
            case OptimizerKind::Sgd:
                return -cfg.learning_rate * g;
            case OptimizerKind::Adam: {
                a = cfg.beta1 * a + (1.0 - cfg.beta1) * g;
                b = cfg.beta2 * b + (1.0 - cfg.beta2) * g * g;
                const double m_hat = a / bias_corr1;
                const double v_hat = b / bias_corr2;
                return -cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
            }
            case OptimizerKind::Nadam: {
                a = cfg.beta1 * a + (1.0 - cfg.beta1) * g;
                b = cfg.beta2 * b + (1.0 - cfg.beta2) * g * g;
                const double m_hat = a / (1.0 - std::pow(cfg.beta1, static_cast<double>(t + 1)));
                const double v_hat = b / bias_corr2;
                const double m_bar = cfg.beta1 * m_hat + (1.0 - cfg.beta1) * g / bias_corr1;
                return -cfg.learning_rate * m_bar / (std::sqrt(v_hat) + cfg.epsilon);
            }
            case OptimizerKind::Rmsprop: {
                a = cfg.rho * a + (1.0 - cfg.rho) * g * g;
                return -cfg.learning_rate * g / (std::sqrt(a) + cfg.epsilon);
            }
            case OptimizerKind::Adadelta: {
                a = cfg.rho * a + (1.0 - cfg.rho) * g * g;
                const double delta = -std::sqrt(b + cfg.epsilon) / std::sqrt(a + cfg.epsilon) * g;
                b = cfg.rho * b + (1.0 - cfg.rho) * delta * delta;
                return cfg.learning_rate * delta;
            }
        }
        return 0.0;
    }
};

}  // namespace

void apply_step(OptimizerState& state, DenseNetwork& net, const GradientSet& grads) {
    if (grads.weight_grads.size() != net.layers.size() ||
        grads.bias_grads.size() != net.layers.size())
        throw ValidationError("apply_step: gradient layer count does not match network");
    const bool stateless = state.config.kind == OptimizerKind::Sgd;
    if (!stateless && state.weight_slot_a.size() != net.layers.size())
        throw ValidationError("apply_step: optimizer state does not match network");

    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        if (!grads.weight_grads[k].same_shape(net.layers[k].weights) ||
            grads.bias_grads[k].size() != net.layers[k].bias.size())
            throw ValidationError("apply_step: gradient shape mismatch at layer " + std::to_string(k));
        if (!grads.weight_grads[k].all_finite())
            throw DivergedError("diverged: non-finite weight gradient at layer " + std::to_string(k));
        for (double g : grads.bias_grads[k]) {
            if (!std::isfinite(g))
                throw DivergedError("diverged: non-finite bias gradient at layer " + std::to_string(k));
        }
    }

    const ScalarRule rule(state.config, state.step + 1);
    double dummy_a = 0.0, dummy_b = 0.0;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        DenseLayer& layer = net.layers[k];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            double& a = stateless ? dummy_a : state.weight_slot_a[k].data()[i];
            double& b = stateless ? dummy_b : state.weight_slot_b[k].data()[i];
            layer.weights.data()[i] += rule.update(grads.weight_grads[k].data()[i], a, b);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            double& a = stateless ? dummy_a : state.bias_slot_a[k][i];
            double& b = stateless ? dummy_b : state.bias_slot_b[k][i];
            layer.bias[i] += rule.update(grads.bias_grads[k][i], a, b);
        }
    }
    ++state.step;
}

}  // namespace grainform
