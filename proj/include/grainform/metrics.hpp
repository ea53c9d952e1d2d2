#ifndef GRAINFORM_METRICS_HPP
#define GRAINFORM_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "grainform/errors.hpp"

namespace grainform {

// Rows are true classes, columns are predictions.
struct ConfusionMatrix {
    std::vector<std::string> class_names;
    std::vector<std::uint64_t> counts;  // C x C row-major

    std::size_t classes() const { return class_names.size(); }
    std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * classes() + p]; }
    std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * classes() + p]; }
    std::uint64_t total() const;
    std::string to_csv() const;
};

ConfusionMatrix confusion(const std::vector<std::size_t>& preds,
                          const std::vector<std::size_t>& labels,
                          const std::vector<std::string>& class_names);

// trace / total; for two classes this is (TP+TN)/(TP+FP+FN+TN).
double accuracy(const ConfusionMatrix& cm);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = -1.0;  // negative when no test set was supplied
};

struct TrainReport {
    std::string optimizer;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::vector<EpochRecord> epochs;

    std::string to_csv() const;
};

}  // namespace grainform

#endif
