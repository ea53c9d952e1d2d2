#ifndef GRAINFORM_CONFIG_HPP
#define GRAINFORM_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "grainform/hierarchy.hpp"
#include "grainform/imageprep.hpp"
#include "grainform/nn.hpp"
#include "grainform/optim.hpp"

namespace grainform {

// Everything a run needs, resolvable from a config file plus CLI overrides.
struct ExperimentConfig {
    // Data source: a class-per-directory tree, or a synthesis preset.
    std::string dataset_dir;
    std::string preset;
    std::size_t per_class = 1000;
    std::size_t canvas_px = 250;
    double px_per_mm = 20.0;

    PreprocessConfig preprocess;

    std::vector<std::size_t> widths = {64, 120, 100, 50};

    OptimizerConfig optimizer = default_optimizer_config(OptimizerKind::Sgd);
    bool learning_rate_overridden = false;

    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double train_fraction = 0.75;
    bool stratify = true;
    std::uint64_t seed = 0;

    std::vector<MergeGroup> merges;  // empty = flat model
    std::string out_dir = "out";

    void validate() const;
    NetworkSpec network_spec(std::size_t output_classes) const;
};

// Flat key = value text; '#' starts a comment. Merge groups are declared as
//   merge = GROUP: member, member
// one line per group. Unknown keys are rejected.
ExperimentConfig parse_config_file(const std::string& path);

// Applies one key = value pair (also used for CLI --set overrides).
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);

// The resolved config as a JSON object for run summaries.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace grainform

#endif
