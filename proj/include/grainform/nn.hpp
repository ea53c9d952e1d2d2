#ifndef GRAINFORM_NN_HPP
#define GRAINFORM_NN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "grainform/matrix.hpp"

namespace grainform {

enum class Activation : std::uint8_t { Relu = 0, Softmax = 1 };

// Architecture description: input width, hidden/trunk widths, class count.
struct NetworkSpec {
    std::size_t input_dim = 1024;
    std::vector<std::size_t> layer_widths = {64, 120, 100, 50};
    std::size_t output_classes = 5;

    void validate() const;
    // Full chain of layer output widths: layer_widths then output_classes.
    std::vector<std::size_t> all_widths() const;
};

struct DenseLayer {
    Matrix weights;             // out x in
    std::vector<double> bias;   // out
    Activation activation = Activation::Relu;
};

struct DenseNetwork {
    NetworkSpec spec;
    std::vector<DenseLayer> layers;

    void validate() const;
    bool operator==(const DenseNetwork& other) const;
};

// Everything backward needs from one forward pass over a batch.
struct ForwardTrace {
    std::vector<Matrix> pre_activations;   // per layer, batch x out
    std::vector<Matrix> post_activations;  // per layer, batch x out
    const Matrix& probabilities() const { return post_activations.back(); }
};

struct GradientSet {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
};

// Elementwise max(0, x). Rejects non-finite input.
std::vector<double> relu(const std::vector<double>& x);

// Max-shifted softmax; safe for large logits.
std::vector<double> softmax(const std::vector<double>& z);

// -log(probs[label]) with the probability clamped below at 1e-12.
double sparse_ce_loss(const std::vector<double>& probs, std::size_t label);

// Uniform Glorot weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
// Deterministic per seed.
DenseNetwork init_network(const NetworkSpec& spec, std::uint64_t seed);

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch);

// Gradients of the mean batch loss (softmax + sparse cross-entropy).
GradientSet backward(const DenseNetwork& net, const Matrix& batch,
                     const ForwardTrace& trace, const std::vector<std::size_t>& labels);

double mean_batch_loss(const ForwardTrace& trace, const std::vector<std::size_t>& labels);

// Argmax of the final probabilities; ties break toward the lowest index.
std::size_t predict(const DenseNetwork& net, const std::vector<double>& features);

// Class probabilities for one input.
std::vector<double> predict_proba(const DenseNetwork& net, const std::vector<double>& features);

// Versioned binary model format, see save_network for the layout.
void save_network(const DenseNetwork& net, const std::string& path);
DenseNetwork load_network(const std::string& path);

}  // namespace grainform

#endif
