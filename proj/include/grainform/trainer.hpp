#ifndef GRAINFORM_TRAINER_HPP
#define GRAINFORM_TRAINER_HPP

#include "grainform/dataset.hpp"
#include "grainform/metrics.hpp"
#include "grainform/nn.hpp"
#include "grainform/optim.hpp"

namespace grainform {

struct TrainOptions {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

struct TrainedModel {
    DenseNetwork net;
    TrainReport report;
};

// Mini-batch training with a seeded shuffle per epoch. Throws DivergedError
// naming the epoch if the loss goes non-finite. test may be null.
TrainedModel train_network(const LabeledDataset& train, const LabeledDataset* test,
                           const NetworkSpec& spec, const OptimizerConfig& opt_config,
                           const TrainOptions& options);

// Predictions for every sample, evaluated in batches.
std::vector<std::size_t> predict_dataset(const DenseNetwork& net, const LabeledDataset& ds);

double dataset_accuracy(const DenseNetwork& net, const LabeledDataset& ds);

}  // namespace grainform

#endif
