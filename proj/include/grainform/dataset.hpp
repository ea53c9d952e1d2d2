#ifndef GRAINFORM_DATASET_HPP
#define GRAINFORM_DATASET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "grainform/image.hpp"
#include "grainform/imageprep.hpp"

namespace grainform {

struct LabeledDataset {
    std::vector<std::pair<std::vector<double>, std::size_t>> samples;
    std::vector<std::string> class_names;
    std::size_t feature_dim = 0;

    std::size_t size() const { return samples.size(); }
    std::vector<std::size_t> per_class_counts() const;
};

// Synthesis parameters for one rice class; dimensions in millimeters.
struct GrainClassParams {
    std::string name;
    double min_length_mm = 0.0, max_length_mm = 0.0;
    double min_width_mm = 0.0, max_width_mm = 0.0;
    double opacity = 1.0;

    void validate() const;
};

// Built-in class sets: "global5", "domestic6", "confusable5".
std::vector<GrainClassParams> preset_classes(const std::string& preset);

// Loads <root>/<class_name>/*.{png,jpg,jpeg,bmp}. Class names are the sorted
// subdirectory names; files are processed in sorted order. Unreadable images
// are skipped with a warning on stderr.
LabeledDataset load_directory(const std::string& root, const PreprocessConfig& config);

// Seeded split. Stratified: within each class take floor(fraction*n) for
// train after a seeded shuffle. Non-stratified: one global shuffle.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                double train_fraction,
                                                std::uint64_t seed,
                                                bool stratify = true);

// Renders one grain: a filled ellipse with axes drawn from the class ranges,
// rotated by a uniform random angle, opacity plus Gaussian texture noise
// (sigma 0.05) on black. Deterministic per seed.
GrainImage synth_grain(const GrainClassParams& params, std::uint64_t seed,
                       std::size_t canvas_px = 250, double px_per_mm = 20.0);

// per_class grains per class, run through the preprocessing chain.
LabeledDataset synth_dataset(const std::vector<GrainClassParams>& classes,
                             std::size_t per_class, std::uint64_t seed,
                             const PreprocessConfig& config,
                             std::size_t canvas_px = 250, double px_per_mm = 20.0);

// Raw grains without preprocessing, for export to a directory tree.
std::vector<GrainImage> synth_grains(const GrainClassParams& params, std::size_t count,
                                     std::uint64_t base_seed, std::size_t class_index,
                                     std::size_t canvas_px = 250, double px_per_mm = 20.0);

// Worker cap for dataset fan-out; reads GRAINFORM_THREADS, default 1.
std::size_t worker_count();

}  // namespace grainform

#endif
