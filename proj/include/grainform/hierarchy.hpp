#ifndef GRAINFORM_HIERARCHY_HPP
#define GRAINFORM_HIERARCHY_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grainform/trainer.hpp"

namespace grainform {

struct MergeGroup {
    std::string name;
    std::vector<std::string> members;  // base class names, declared order
};

// Which base classes get merged into an intermediate label for stage 1.
struct HierarchySpec {
    std::vector<std::string> base_classes;
    std::vector<MergeGroup> merges;

    void validate() const;
    // Stage-1 class names: walking base_classes in order, each merged class
    // is replaced (once, at its first member's position) by its group name.
    std::vector<std::string> stage1_classes() const;
    // Group index covering a base class, or nullopt for unmerged classes.
    std::optional<std::size_t> group_of(const std::string& base_class) const;
};

struct HierarchicalModel {
    HierarchySpec spec;
    DenseNetwork stage1;
    std::vector<DenseNetwork> stage2;  // parallel to spec.merges
};

// Base-class labels mapped to stage-1 indices.
std::vector<std::size_t> relabel_stage1(const std::vector<std::size_t>& labels,
                                        const HierarchySpec& spec);

// Only the group's samples, relabeled to within-group indices in declared
// member order.
LabeledDataset filter_group(const LabeledDataset& ds, const HierarchySpec& spec,
                            const std::string& group_name);

struct HierarchyTrainResult {
    HierarchicalModel model;
    TrainReport stage1_report;
    std::vector<TrainReport> stage2_reports;  // parallel to spec.merges
};

// Stage 1 on the relabeled data, one disambiguator per merge group on that
// group's samples. ds_test, when given, feeds per-epoch test accuracies.
HierarchyTrainResult train_hierarchy(const LabeledDataset& ds_train,
                                     const LabeledDataset* ds_test,
                                     const HierarchySpec& spec,
                                     const NetworkSpec& net_template,
                                     const OptimizerConfig& opt_config,
                                     const TrainOptions& options);

struct InferResult {
    std::size_t base_index = 0;
    std::size_t stage1_index = 0;
    std::optional<std::size_t> routed_group;  // merge group index when stage 2 ran
    std::vector<double> stage1_probs;
    std::vector<double> stage2_probs;  // empty unless routed
};

InferResult infer_detailed(const HierarchicalModel& model, const std::vector<double>& features);

// Stage-1 predict; non-merged results pass through, merged ones are resolved
// by the matching stage-2 model. Returns a base class index.
std::size_t infer(const HierarchicalModel& model, const std::vector<double>& features);

struct HierarchyAccuracy {
    double overall = 0.0;  // end-to-end infer vs base labels
    double stage1 = 0.0;   // against relabel_stage1 ground truth
    // group name -> accuracy on that group's true members; groups with no
    // samples in ds are absent.
    std::map<std::string, double> stage2;
};

HierarchyAccuracy hierarchical_accuracy(const HierarchicalModel& model, const LabeledDataset& ds);

// Persist as one model file per stage plus manifest.json in dir.
void save_hierarchy(const HierarchicalModel& model, const std::string& dir);
HierarchicalModel load_hierarchy(const std::string& dir);

}  // namespace grainform

#endif
