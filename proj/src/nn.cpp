#include "grainform/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "grainform/rng.hpp"

namespace grainform {

void NetworkSpec::validate() const {
    if (input_dim < 1) throw ValidationError("NetworkSpec: input_dim must be >= 1");
    if (layer_widths.empty()) throw ValidationError("NetworkSpec: layer_widths must be non-empty");
    for (std::size_t w : layer_widths) {
        if (w < 1) throw ValidationError("NetworkSpec: all layer widths must be >= 1");
    }
    if (output_classes < 2) throw ValidationError("NetworkSpec: output_classes must be >= 2");
}

std::vector<std::size_t> NetworkSpec::all_widths() const {
    std::vector<std::size_t> w = layer_widths;
    w.push_back(output_classes);
    return w;
}

void DenseNetwork::validate() const {
    spec.validate();
    const auto widths = spec.all_widths();
    if (layers.size() != widths.size())
        throw ValidationError("DenseNetwork: layer count does not match spec");
    std::size_t in = spec.input_dim;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const DenseLayer& l = layers[k];
        if (l.weights.rows() != widths[k] || l.weights.cols() != in)
            throw ValidationError("DenseNetwork: layer " + std::to_string(k) + " has bad shape");
        if (l.bias.size() != widths[k])
            throw ValidationError("DenseNetwork: layer " + std::to_string(k) + " has bad bias size");
        const Activation want = (k + 1 == layers.size()) ? Activation::Softmax : Activation::Relu;
        if (l.activation != want)
            throw ValidationError("DenseNetwork: layer " + std::to_string(k) + " has wrong activation");
        in = widths[k];
    }
}

bool DenseNetwork::operator==(const DenseNetwork& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        if (!(layers[k].weights == other.layers[k].weights)) return false;
        if (layers[k].bias != other.layers[k].bias) return false;
        if (layers[k].activation != other.layers[k].activation) return false;
    }
    return true;
}

std::vector<double> relu(const std::vector<double>& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw ValidationError("relu: non-finite input");
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    return out;
}

std::vector<double> softmax(const std::vector<double>& z) {
    if (z.empty()) throw ValidationError("softmax: empty input");
    double zmax = z[0];
    for (double v : z) {
        if (!std::isfinite(v)) throw ValidationError("softmax: non-finite input");
        zmax = std::max(zmax, v);
    }
    std::vector<double> out(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - zmax);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double sparse_ce_loss(const std::vector<double>& probs, std::size_t label) {
    if (label >= probs.size())
        throw ValidationError("sparse_ce_loss: label " + std::to_string(label) + " out of range");
    return -std::log(std::max(probs[label], 1e-12));
}

DenseNetwork init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    DenseNetwork net;
    net.spec = spec;
    Rng rng(seed);
    const auto widths = spec.all_widths();
    std::size_t in = spec.input_dim;
    for (std::size_t k = 0; k < widths.size(); ++k) {
        DenseLayer layer;
        const std::size_t out = widths[k];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        layer.weights = Matrix(out, in);
        for (double& w : layer.weights.data()) w = rng.uniform(-limit, limit);
        layer.bias.assign(out, 0.0);
        layer.activation = (k + 1 == widths.size()) ? Activation::Softmax : Activation::Relu;
        net.layers.push_back(std::move(layer));
        in = out;
    }
    return net;
}

ForwardTrace forward(const DenseNetwork& net, const Matrix& batch) {
    if (batch.cols() != net.spec.input_dim)
        throw ValidationError("forward: batch has " + std::to_string(batch.cols()) +
                              " columns, expected " + std::to_string(net.spec.input_dim));
    ForwardTrace trace;
    const std::size_t b = batch.rows();
    const Matrix* input = &batch;
    for (const DenseLayer& layer : net.layers) {
        const std::size_t out_dim = layer.weights.rows();
        const std::size_t in_dim = layer.weights.cols();
        Matrix z(b, out_dim);
        for (std::size_t r = 0; r < b; ++r) {
            const double* x = input->row(r);
            double* zr = z.row(r);
            for (std::size_t j = 0; j < out_dim; ++j) {
                const double* w = layer.weights.row(j);
                double acc = layer.bias[j];
                for (std::size_t i = 0; i < in_dim; ++i) acc += w[i] * x[i];
                zr[j] = acc;
            }
        }
        Matrix a(b, out_dim);
        if (layer.activation == Activation::Relu) {
            for (std::size_t i = 0; i < z.size(); ++i)
                a.data()[i] = z.data()[i] > 0.0 ? z.data()[i] : 0.0;
        } else {
            for (std::size_t r = 0; r < b; ++r) {
                std::vector<double> row(z.row(r), z.row(r) + out_dim);
                const auto p = softmax(row);
                std::copy(p.begin(), p.end(), a.row(r));
            }
        }
        trace.pre_activations.push_back(std::move(z));
        trace.post_activations.push_back(std::move(a));
        input = &trace.post_activations.back();
    }
    return trace;
}

double mean_batch_loss(const ForwardTrace& trace, const std::vector<std::size_t>& labels) {
    const Matrix& probs = trace.probabilities();
    if (labels.size() != probs.rows())
        throw ValidationError("mean_batch_loss: label count does not match batch size");
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        std::vector<double> row(probs.row(r), probs.row(r) + probs.cols());
        total += sparse_ce_loss(row, labels[r]);
    }
    return total / static_cast<double>(labels.size());
}

GradientSet backward(const DenseNetwork& net, const Matrix& batch,
                     const ForwardTrace& trace, const std::vector<std::size_t>& labels) {
    const std::size_t b = batch.rows();
    const std::size_t n_layers = net.layers.size();
    const Matrix& probs = trace.probabilities();
    if (labels.size() != b) throw ValidationError("backward: label count does not match batch");
    for (std::size_t label : labels) {
        if (label >= net.spec.output_classes)
            throw ValidationError("backward: label " + std::to_string(label) + " out of range");
    }

    GradientSet grads;
    grads.weight_grads.resize(n_layers);
    grads.bias_grads.resize(n_layers);

    // Output delta: (probs - one_hot) / b. Combined softmax + CE gradient.
    Matrix delta(b, net.spec.output_classes);
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t c = 0; c < net.spec.output_classes; ++c)
            delta(r, c) = probs(r, c) * inv_b;
        delta(r, labels[r]) -= inv_b;
    }

    for (std::size_t k = n_layers; k-- > 0;) {
        const DenseLayer& layer = net.layers[k];
        const std::size_t out_dim = layer.weights.rows();
        const std::size_t in_dim = layer.weights.cols();
        const Matrix& input = (k == 0) ? batch : trace.post_activations[k - 1];

        Matrix wg(out_dim, in_dim);
        std::vector<double> bg(out_dim, 0.0);
        for (std::size_t r = 0; r < b; ++r) {
            const double* d = delta.row(r);
            const double* x = input.row(r);
            for (std::size_t j = 0; j < out_dim; ++j) {
                const double dj = d[j];
                if (dj == 0.0) continue;
                double* wrow = wg.row(j);
                for (std::size_t i = 0; i < in_dim; ++i) wrow[i] += dj * x[i];
                bg[j] += dj;
            }
        }
        grads.weight_grads[k] = std::move(wg);
        grads.bias_grads[k] = std::move(bg);

        if (k > 0) {
            // Propagate through the weights, gated by the ReLU mask of layer k-1.
            const Matrix& pre_prev = trace.pre_activations[k - 1];
            Matrix next_delta(b, in_dim);
            for (std::size_t r = 0; r < b; ++r) {
                const double* d = delta.row(r);
                double* nd = next_delta.row(r);
                for (std::size_t j = 0; j < out_dim; ++j) {
                    const double dj = d[j];
                    if (dj == 0.0) continue;
                    const double* wrow = net.layers[k].weights.row(j);
                    for (std::size_t i = 0; i < in_dim; ++i) nd[i] += dj * wrow[i];
                }
                const double* pre = pre_prev.row(r);
                for (std::size_t i = 0; i < in_dim; ++i) {
                    if (pre[i] <= 0.0) nd[i] = 0.0;
                }
            }
            delta = std::move(next_delta);
        }
    }
    return grads;
}

std::vector<double> predict_proba(const DenseNetwork& net, const std::vector<double>& features) {
    if (features.size() != net.spec.input_dim)
        throw ValidationError("predict: feature vector has " + std::to_string(features.size()) +
                              " entries, expected " + std::to_string(net.spec.input_dim));
    Matrix batch(1, features.size());
    std::copy(features.begin(), features.end(), batch.row(0));
    const ForwardTrace trace = forward(net, batch);
    const Matrix& probs = trace.probabilities();
    return std::vector<double>(probs.row(0), probs.row(0) + probs.cols());
}

std::size_t predict(const DenseNetwork& net, const std::vector<double>& features) {
    const auto probs = predict_proba(net, features);
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return best;
}

// Model file layout:
//   magic "GFN1"
//   u32 layer count (little-endian)
//   per layer: u32 out_dim, u32 in_dim, u8 activation (0=relu, 1=softmax),
//              out*in f64 weights row-major, out f64 biases.
namespace {

constexpr char kMagic[4] = {'G', 'F', 'N', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError(std::string("truncated model: missing ") + what);
    return value;
}

}  // namespace

void save_network(const DenseNetwork& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(kMagic, 4);
    write_le<std::uint32_t>(f, static_cast<std::uint32_t>(net.layers.size()));
    for (const DenseLayer& layer : net.layers) {
        write_le<std::uint32_t>(f, static_cast<std::uint32_t>(layer.weights.rows()));
        write_le<std::uint32_t>(f, static_cast<std::uint32_t>(layer.weights.cols()));
        write_le<std::uint8_t>(f, static_cast<std::uint8_t>(layer.activation));
        f.write(reinterpret_cast<const char*>(layer.weights.data().data()),
                static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(layer.bias.data()),
                static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
    }
    if (!f) throw IoError("write failed: " + path);
}

DenseNetwork load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open model file: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a model file: " + path);
    const auto n_layers = read_le<std::uint32_t>(f, "layer count");
    if (n_layers < 2) throw IoError("model file declares fewer than 2 layers: " + path);

    DenseNetwork net;
    std::size_t prev_out = 0;
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        const auto out_dim = read_le<std::uint32_t>(f, "layer header");
        const auto in_dim = read_le<std::uint32_t>(f, "layer header");
        const auto act = read_le<std::uint8_t>(f, "activation code");
        if (out_dim == 0 || in_dim == 0 || act > 1)
            throw IoError("corrupt layer header in model file: " + path);
        if (k > 0 && in_dim != prev_out)
            throw IoError("model file layer " + std::to_string(k) + " does not chain: " + path);
        DenseLayer layer;
        layer.weights = Matrix(out_dim, in_dim);
        f.read(reinterpret_cast<char*>(layer.weights.data().data()),
               static_cast<std::streamsize>(layer.weights.size() * sizeof(double)));
        layer.bias.resize(out_dim);
        f.read(reinterpret_cast<char*>(layer.bias.data()),
               static_cast<std::streamsize>(layer.bias.size() * sizeof(double)));
        if (!f) throw IoError("truncated model: layer " + std::to_string(k) + " payload in " + path);
        layer.activation = static_cast<Activation>(act);
        net.layers.push_back(std::move(layer));
        prev_out = out_dim;
        if (k == 0) net.spec.input_dim = in_dim;
    }
    net.spec.layer_widths.clear();
    for (std::size_t k = 0; k + 1 < net.layers.size(); ++k)
        net.spec.layer_widths.push_back(net.layers[k].weights.rows());
    net.spec.output_classes = net.layers.back().weights.rows();
    net.validate();
    return net;
}

}  // namespace grainform
