#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "grainform/nn.hpp"
#include "grainform/rng.hpp"

using namespace grainform;

namespace {

Matrix random_batch(Rng& rng, std::size_t rows, std::size_t cols, double lo = 0.0,
                    double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

// Finite-difference oracle: central difference of the mean batch loss with
// respect to one parameter.
double fd_gradient(DenseNetwork& net, const Matrix& batch, const std::vector<std::size_t>& labels,
                   double* param, double h = 1e-5) {
    const double saved = *param;
    *param = saved + h;
    const double up = mean_batch_loss(forward(net, batch), labels);
    *param = saved - h;
    const double down = mean_batch_loss(forward(net, batch), labels);
    *param = saved;
    return (up - down) / (2.0 * h);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

}  // namespace

TEST_CASE("relu clamps negatives and passes nonnegatives") {
    CHECK(relu({-3.0}) == std::vector<double>{0.0});
    CHECK(relu({2.5}) == std::vector<double>{2.5});
    CHECK(relu({-1.0, 0.0, 4.2}) == std::vector<double>{0.0, 0.0, 4.2});
    CHECK_THROWS_AS(relu({std::nan("")}), ValidationError);
}

TEST_CASE("relu is idempotent") {
    Rng rng(7);
    std::vector<double> x(64);
    for (double& v : x) v = rng.uniform(-50.0, 50.0);
    CHECK(relu(relu(x)) == relu(x));
}

TEST_CASE("softmax basics") {
    const auto half = softmax({0.0, 0.0});
    CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(half[1] == doctest::Approx(0.5).epsilon(1e-15));

    // Shift invariance keeps huge equal logits finite and uniform.
    const auto third = softmax({1000.0, 1000.0, 1000.0});
    for (double p : third) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const auto p = softmax({1.0, 2.0, 3.0});
    CHECK(p[0] == doctest::Approx(0.090030573170380462).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.24472847105479764).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.66524095577482178).epsilon(1e-12));

    CHECK_THROWS_AS(softmax({}), ValidationError);
}

TEST_CASE("softmax rows sum to 1 and shifting logits changes nothing") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> z(5);
        for (double& v : z) v = rng.uniform(-100.0, 100.0);
        const auto p = softmax(z);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

        const double shift = rng.uniform(-500.0, 500.0);
        std::vector<double> zs = z;
        for (double& v : zs) v += shift;
        const auto ps = softmax(zs);
        for (std::size_t i = 0; i < p.size(); ++i)
            CHECK(std::abs(p[i] - ps[i]) < 1e-12);
    }
}

TEST_CASE("sparse cross-entropy") {
    CHECK(sparse_ce_loss({0.0, 1.0, 0.0}, 1) == 0.0);
    CHECK(sparse_ce_loss({0.2, 0.2, 0.2, 0.2, 0.2}, 3) ==
          doctest::Approx(1.6094379124341003).epsilon(1e-12));
    CHECK(sparse_ce_loss({0.7, 0.3}, 1) == doctest::Approx(1.2039728043259361).epsilon(1e-12));
    CHECK_THROWS_AS(sparse_ce_loss({0.5, 0.5}, 2), ValidationError);
    // Clamp keeps the loss finite on an exact zero.
    CHECK(std::isfinite(sparse_ce_loss({1.0, 0.0}, 1)));
    CHECK(sparse_ce_loss({0.5, 0.5}, 0) > 0.0);
}

TEST_CASE("init_network shapes, zero biases, determinism") {
    NetworkSpec spec;
    spec.input_dim = 1024;
    spec.layer_widths = {64, 120, 100, 50};
    spec.output_classes = 5;
    const DenseNetwork net = init_network(spec, 42);
    REQUIRE(net.layers.size() == 5);
    const std::size_t want_rows[] = {64, 120, 100, 50, 5};
    const std::size_t want_cols[] = {1024, 64, 120, 100, 50};
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(net.layers[k].weights.rows() == want_rows[k]);
        CHECK(net.layers[k].weights.cols() == want_cols[k]);
        for (double b : net.layers[k].bias) CHECK(b == 0.0);
        const double limit = std::sqrt(6.0 / double(want_rows[k] + want_cols[k]));
        for (double w : net.layers[k].weights.data()) {
            CHECK(std::abs(w) <= limit);
        }
    }
    CHECK(net.layers.back().activation == Activation::Softmax);
    CHECK(init_network(spec, 42) == net);
    CHECK_FALSE(init_network(spec, 43) == net);
}

TEST_CASE("forward on zero weights gives uniform probabilities") {
    NetworkSpec spec;
    spec.input_dim = 6;
    spec.layer_widths = {4};
    spec.output_classes = 3;
    DenseNetwork net = init_network(spec, 1);
    for (auto& layer : net.layers) {
        std::fill(layer.weights.data().begin(), layer.weights.data().end(), 0.0);
    }
    Rng rng(2);
    const Matrix batch = random_batch(rng, 5, 6);
    const ForwardTrace trace = forward(net, batch);
    CHECK(trace.probabilities().rows() == 5);
    CHECK(trace.probabilities().cols() == 3);
    for (double p : trace.probabilities().data())
        CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("forward matches a hand-built single layer") {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.layer_widths = {2};
    spec.output_classes = 2;
    DenseNetwork net = init_network(spec, 1);
    // First layer passes the input through (identity, relu keeps it),
    // output layer is the identity into softmax.
    for (auto& layer : net.layers) {
        std::fill(layer.weights.data().begin(), layer.weights.data().end(), 0.0);
        layer.weights(0, 0) = 1.0;
        layer.weights(1, 1) = 1.0;
    }
    Matrix batch(1, 2);
    batch(0, 0) = 1.0;
    batch(0, 1) = 0.0;
    const ForwardTrace trace = forward(net, batch);
    CHECK(trace.probabilities()(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(trace.probabilities()(0, 1) == doctest::Approx(0.2689414213699951).epsilon(1e-12));

    CHECK_THROWS_AS(forward(net, Matrix(1, 3)), ValidationError);
}

TEST_CASE("backward matches central finite differences on every parameter") {
    NetworkSpec spec;
    spec.input_dim = 10;
    spec.layer_widths = {7, 5};
    spec.output_classes = 4;
    Rng rng(123);
    DenseNetwork net = init_network(spec, 9);
    // Zero-init biases can leave pre-activations exactly on the relu kink
    // (all-dead rows), where the finite-difference oracle is invalid. Small
    // random biases keep every kink at a safe distance.
    for (auto& layer : net.layers)
        for (double& b : layer.bias) b = rng.uniform(-0.05, 0.05);
    const Matrix batch = random_batch(rng, 6, 10);
    std::vector<std::size_t> labels;
    for (int i = 0; i < 6; ++i) labels.push_back(rng.next_below(4));

    const ForwardTrace trace = forward(net, batch);
    const GradientSet grads = backward(net, batch, trace, labels);

    std::size_t checked = 0, bad = 0;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        for (std::size_t i = 0; i < net.layers[k].weights.size(); ++i) {
            const double fd = fd_gradient(net, batch, labels, &net.layers[k].weights.data()[i]);
            const double err = rel_err(grads.weight_grads[k].data()[i], fd);
            CHECK(err < 1e-4);
            if (err >= 1e-6) ++bad;
            ++checked;
        }
        for (std::size_t i = 0; i < net.layers[k].bias.size(); ++i) {
            const double fd = fd_gradient(net, batch, labels, &net.layers[k].bias[i]);
            const double err = rel_err(grads.bias_grads[k][i], fd);
            CHECK(err < 1e-4);
            if (err >= 1e-6) ++bad;
            ++checked;
        }
    }
    CHECK(bad * 100 <= checked);  // >= 99% under the tight tolerance
}

TEST_CASE("backward: confident correct predictions give vanishing gradients") {
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.layer_widths = {3};
    spec.output_classes = 2;
    DenseNetwork net = init_network(spec, 5);
    // Huge output weights drive the softmax to near one-hot.
    std::fill(net.layers[0].weights.data().begin(), net.layers[0].weights.data().end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) net.layers[0].weights(i, i) = 1.0;
    std::fill(net.layers[1].weights.data().begin(), net.layers[1].weights.data().end(), 0.0);
    net.layers[1].weights(0, 0) = 100.0;
    net.layers[1].weights(1, 1) = 100.0;
    Matrix batch(2, 3);
    batch(0, 0) = 1.0;
    batch(1, 1) = 1.0;
    const std::vector<std::size_t> labels = {0, 1};
    const ForwardTrace trace = forward(net, batch);
    CHECK(mean_batch_loss(trace, labels) < 1e-12);
    const GradientSet grads = backward(net, batch, trace, labels);
    for (const auto& wg : grads.weight_grads)
        for (double g : wg.data()) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("backward: duplicating the batch leaves mean gradients unchanged") {
    NetworkSpec spec;
    spec.input_dim = 5;
    spec.layer_widths = {4};
    spec.output_classes = 3;
    Rng rng(31);
    DenseNetwork net = init_network(spec, 8);
    const Matrix batch = random_batch(rng, 3, 5);
    std::vector<std::size_t> labels = {0, 2, 1};

    Matrix doubled(6, 5);
    for (std::size_t r = 0; r < 6; ++r)
        std::copy(batch.row(r % 3), batch.row(r % 3) + 5, doubled.row(r));
    std::vector<std::size_t> doubled_labels = {0, 2, 1, 0, 2, 1};

    const GradientSet g1 = backward(net, batch, forward(net, batch), labels);
    const GradientSet g2 = backward(net, doubled, forward(net, doubled), doubled_labels);
    for (std::size_t k = 0; k < g1.weight_grads.size(); ++k) {
        for (std::size_t i = 0; i < g1.weight_grads[k].size(); ++i)
            CHECK(g1.weight_grads[k].data()[i] ==
                  doctest::Approx(g2.weight_grads[k].data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("predict takes the argmax, ties to the lowest index") {
    NetworkSpec spec;
    spec.input_dim = 4;
    spec.layer_widths = {4};
    spec.output_classes = 2;
    DenseNetwork net = init_network(spec, 3);
    for (auto& layer : net.layers)
        std::fill(layer.weights.data().begin(), layer.weights.data().end(), 0.0);
    // Equal logits -> exact tie -> class 0.
    CHECK(predict(net, {0.3, 0.1, 0.9, 0.5}) == 0);

    // predict agrees with forward's argmax on random inputs.
    const DenseNetwork rnet = init_network(spec, 17);
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(0.0, 1.0);
        Matrix batch(1, 4);
        std::copy(x.begin(), x.end(), batch.row(0));
        const ForwardTrace trace = forward(rnet, batch);
        const Matrix& probs = trace.probabilities();
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (probs(0, c) > probs(0, best)) best = c;
        CHECK(predict(rnet, x) == best);
    }
    CHECK_THROWS_AS(predict(rnet, {1.0}), ValidationError);
}

TEST_CASE("forward is permutation-equivariant over batch rows") {
    NetworkSpec spec;
    spec.input_dim = 8;
    spec.layer_widths = {6};
    spec.output_classes = 3;
    const DenseNetwork net = init_network(spec, 77);
    Rng rng(78);
    const Matrix batch = random_batch(rng, 5, 8);
    Matrix reversed(5, 8);
    for (std::size_t r = 0; r < 5; ++r) std::copy(batch.row(4 - r), batch.row(4 - r) + 8, reversed.row(r));
    const ForwardTrace t1 = forward(net, batch);
    const ForwardTrace t2 = forward(net, reversed);
    const Matrix& p1 = t1.probabilities();
    const Matrix& p2 = t2.probabilities();
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK(p1(r, c) == p2(4 - r, c));
}

TEST_CASE("model file round-trip is bit-exact") {
    NetworkSpec spec;
    spec.input_dim = 12;
    spec.layer_widths = {5, 4};
    spec.output_classes = 3;
    const DenseNetwork net = init_network(spec, 99);
    const std::string path = (std::filesystem::temp_directory_path() / "gf_roundtrip.gfn").string();
    save_network(net, path);
    const DenseNetwork loaded = load_network(path);
    CHECK(loaded == net);

    // Predictions survive the round trip exactly.
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(12);
        for (double& v : x) v = rng.uniform(0.0, 1.0);
        CHECK(predict(net, x) == predict(loaded, x));
    }
    std::filesystem::remove(path);
}

TEST_CASE("model loader rejects bad files distinctly") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path();

    const std::string bad_magic = (dir / "gf_badmagic.gfn").string();
    {
        std::ofstream f(bad_magic, std::ios::binary);
        f << "NOPE" << std::string(64, '\0');
    }
    CHECK_THROWS_WITH_AS(load_network(bad_magic), doctest::Contains("not a model file"), IoError);

    // Header promises 5 layers but the file only carries 2.
    NetworkSpec spec;
    spec.input_dim = 4;
    spec.layer_widths = {3};
    spec.output_classes = 2;
    const std::string truncated = (dir / "gf_trunc.gfn").string();
    save_network(init_network(spec, 0), truncated);
    {
        std::fstream f(truncated, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(4);
        const std::uint32_t five = 5;
        f.write(reinterpret_cast<const char*>(&five), 4);
    }
    CHECK_THROWS_WITH_AS(load_network(truncated), doctest::Contains("truncated model"), IoError);

    CHECK_THROWS_AS(load_network((dir / "gf_missing.gfn").string()), IoError);
    fs::remove(bad_magic);
    fs::remove(truncated);
}
