#include "grainform/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "grainform/rng.hpp"

namespace grainform {

namespace {

Matrix gather_batch(const LabeledDataset& ds, const std::vector<std::size_t>& order,
                    std::size_t begin, std::size_t end, std::vector<std::size_t>& labels) {
    Matrix batch(end - begin, ds.feature_dim);
    labels.resize(end - begin);
    for (std::size_t r = 0; r < end - begin; ++r) {
        const auto& [features, label] = ds.samples[order[begin + r]];
        std::copy(features.begin(), features.end(), batch.row(r));
        labels[r] = label;
    }
    return batch;
}

}  // namespace

std::vector<std::size_t> predict_dataset(const DenseNetwork& net, const LabeledDataset& ds) {
    constexpr std::size_t kEvalBatch = 256;
    std::vector<std::size_t> preds(ds.size());
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> labels;
    for (std::size_t begin = 0; begin < ds.size(); begin += kEvalBatch) {
        const std::size_t end = std::min(begin + kEvalBatch, ds.size());
        const Matrix batch = gather_batch(ds, order, begin, end, labels);
        const ForwardTrace trace = forward(net, batch);
        const Matrix& probs = trace.probabilities();
        for (std::size_t r = 0; r < end - begin; ++r) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < probs.cols(); ++c) {
                if (probs(r, c) > probs(r, best)) best = c;
            }
            preds[begin + r] = best;
        }
    }
    return preds;
}

double dataset_accuracy(const DenseNetwork& net, const LabeledDataset& ds) {
    if (ds.size() == 0) throw ValidationError("dataset_accuracy: empty dataset");
    const auto preds = predict_dataset(net, ds);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (preds[i] == ds.samples[i].second) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

TrainedModel train_network(const LabeledDataset& train, const LabeledDataset* test,
                           const NetworkSpec& spec, const OptimizerConfig& opt_config,
                           const TrainOptions& options) {
    if (train.size() == 0) throw ValidationError("train_network: empty training set");
    if (train.feature_dim != spec.input_dim)
        throw ValidationError("train_network: dataset feature_dim " +
                              std::to_string(train.feature_dim) + " does not match input_dim " +
                              std::to_string(spec.input_dim));
    if (options.epochs < 1 || options.batch_size < 1)
        throw ValidationError("train_network: epochs and batch_size must be >= 1");
    for (const auto& [features, label] : train.samples) {
        if (label >= spec.output_classes)
            throw ValidationError("train_network: label out of range for " +
                                  std::to_string(spec.output_classes) + " classes");
    }

    const auto t0 = std::chrono::steady_clock::now();
    TrainedModel result;
    result.net = init_network(spec, options.seed);
    result.report.optimizer = optimizer_name(opt_config.kind);
    result.report.seed = options.seed;
    OptimizerState state = make_optimizer(opt_config, result.net);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> labels;

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        Rng rng(derive_seed(options.seed, epoch));
        rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < train.size(); begin += options.batch_size) {
            const std::size_t end = std::min(begin + options.batch_size, train.size());
            const Matrix batch = gather_batch(train, order, begin, end, labels);
            const ForwardTrace trace = forward(result.net, batch);
            const double loss = mean_batch_loss(trace, labels);
            if (!std::isfinite(loss))
                throw DivergedError("diverged: non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += loss * static_cast<double>(end - begin);
            const GradientSet grads = backward(result.net, batch, trace, labels);
            apply_step(state, result.net, grads);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        rec.train_accuracy = dataset_accuracy(result.net, train);
        if (test && test->size() > 0) rec.test_accuracy = dataset_accuracy(result.net, *test);
        result.report.epochs.push_back(rec);
    }

    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace grainform
