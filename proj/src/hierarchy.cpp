#include "grainform/hierarchy.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "grainform/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace grainform {

void HierarchySpec::validate() const {
    if (base_classes.size() < 2) throw ValidationError("hierarchy: need at least 2 base classes");
    const std::set<std::string> base(base_classes.begin(), base_classes.end());
    if (base.size() != base_classes.size())
        throw ValidationError("hierarchy: duplicate base class names");
    std::set<std::string> seen_members;
    std::set<std::string> group_names;
    for (const MergeGroup& g : merges) {
        if (g.name.empty()) throw ValidationError("hierarchy: merge group needs a name");
        if (base.count(g.name)) throw ValidationError("hierarchy: group name '" + g.name +
                                                      "' collides with a base class");
        if (!group_names.insert(g.name).second)
            throw ValidationError("hierarchy: duplicate group name '" + g.name + "'");
        if (g.members.size() < 2)
            throw ValidationError("hierarchy: group '" + g.name + "' needs at least 2 members");
        for (const std::string& m : g.members) {
            if (!base.count(m))
                throw ValidationError("hierarchy: group '" + g.name + "' member '" + m +
                                      "' is not a base class");
            if (!seen_members.insert(m).second)
                throw ValidationError("hierarchy: class '" + m + "' appears in two groups");
        }
    }
}

std::optional<std::size_t> HierarchySpec::group_of(const std::string& base_class) const {
    for (std::size_t g = 0; g < merges.size(); ++g) {
        const auto& members = merges[g].members;
        if (std::find(members.begin(), members.end(), base_class) != members.end()) return g;
    }
    return std::nullopt;
}

std::vector<std::string> HierarchySpec::stage1_classes() const {
    std::vector<std::string> out;
    std::set<std::string> emitted_groups;
    for (const std::string& name : base_classes) {
        const auto g = group_of(name);
        if (!g) {
            out.push_back(name);
        } else if (emitted_groups.insert(merges[*g].name).second) {
            out.push_back(merges[*g].name);
        }
    }
    return out;
}

std::vector<std::size_t> relabel_stage1(const std::vector<std::size_t>& labels,
                                        const HierarchySpec& spec) {
    const auto stage1 = spec.stage1_classes();
    auto stage1_index = [&](const std::string& name) {
        const auto it = std::find(stage1.begin(), stage1.end(), name);
        return static_cast<std::size_t>(it - stage1.begin());
    };
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= spec.base_classes.size())
            throw ValidationError("relabel_stage1: label out of range");
        const std::string& name = spec.base_classes[labels[i]];
        const auto g = spec.group_of(name);
        out[i] = stage1_index(g ? spec.merges[*g].name : name);
    }
    return out;
}

LabeledDataset filter_group(const LabeledDataset& ds, const HierarchySpec& spec,
                            const std::string& group_name) {
    const MergeGroup* group = nullptr;
    for (const MergeGroup& g : spec.merges) {
        if (g.name == group_name) group = &g;
    }
    if (!group) throw ValidationError("filter_group: unknown group '" + group_name + "'");

    LabeledDataset out;
    out.class_names = group->members;
    out.feature_dim = ds.feature_dim;
    for (const auto& [features, label] : ds.samples) {
        const std::string& name = ds.class_names[label];
        const auto it = std::find(group->members.begin(), group->members.end(), name);
        if (it == group->members.end()) continue;
        out.samples.emplace_back(features, static_cast<std::size_t>(it - group->members.begin()));
    }
    return out;
}

namespace {

LabeledDataset relabel_dataset(const LabeledDataset& ds, const HierarchySpec& spec) {
    LabeledDataset out;
    out.class_names = spec.stage1_classes();
    out.feature_dim = ds.feature_dim;
    std::vector<std::size_t> labels(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) labels[i] = ds.samples[i].second;
    const auto relabeled = relabel_stage1(labels, spec);
    out.samples.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        out.samples.emplace_back(ds.samples[i].first, relabeled[i]);
    return out;
}

}  // namespace

HierarchyTrainResult train_hierarchy(const LabeledDataset& ds_train, const LabeledDataset* ds_test,
                                     const HierarchySpec& spec, const NetworkSpec& net_template,
                                     const OptimizerConfig& opt_config,
                                     const TrainOptions& options) {
    spec.validate();
    if (ds_train.class_names != spec.base_classes)
        throw ValidationError("train_hierarchy: dataset classes do not match hierarchy spec");

    HierarchyTrainResult result;
    result.model.spec = spec;

    // Stage 1. Uses the caller's seed unchanged so a merge-free hierarchy
    // trains bit-identically to the flat model.
    const LabeledDataset stage1_train = relabel_dataset(ds_train, spec);
    LabeledDataset stage1_test;
    if (ds_test) stage1_test = relabel_dataset(*ds_test, spec);
    NetworkSpec stage1_spec = net_template;
    stage1_spec.output_classes = spec.stage1_classes().size();
    TrainedModel stage1 = train_network(stage1_train, ds_test ? &stage1_test : nullptr,
                                        stage1_spec, opt_config, options);
    result.model.stage1 = std::move(stage1.net);
    result.stage1_report = std::move(stage1.report);

    // One disambiguator per group.
    for (std::size_t g = 0; g < spec.merges.size(); ++g) {
        const LabeledDataset group_train = filter_group(ds_train, spec, spec.merges[g].name);
        if (group_train.size() == 0)
            throw ValidationError("train_hierarchy: group '" + spec.merges[g].name +
                                  "' has no training samples");
        LabeledDataset group_test;
        if (ds_test) group_test = filter_group(*ds_test, spec, spec.merges[g].name);
        NetworkSpec group_spec = net_template;
        group_spec.output_classes = spec.merges[g].members.size();
        TrainOptions group_options = options;
        group_options.seed = derive_seed(options.seed, g + 1);
        TrainedModel stage2 =
            train_network(group_train, ds_test && group_test.size() > 0 ? &group_test : nullptr,
                          group_spec, opt_config, group_options);
        result.model.stage2.push_back(std::move(stage2.net));
        result.stage2_reports.push_back(std::move(stage2.report));
    }
    return result;
}

InferResult infer_detailed(const HierarchicalModel& model, const std::vector<double>& features) {
    const auto stage1 = model.spec.stage1_classes();
    InferResult res;
    res.stage1_probs = predict_proba(model.stage1, features);
    res.stage1_index = 0;
    for (std::size_t c = 1; c < res.stage1_probs.size(); ++c) {
        if (res.stage1_probs[c] > res.stage1_probs[res.stage1_index]) res.stage1_index = c;
    }
    const std::string& stage1_name = stage1[res.stage1_index];

    auto base_index = [&](const std::string& name) {
        const auto it =
            std::find(model.spec.base_classes.begin(), model.spec.base_classes.end(), name);
        return static_cast<std::size_t>(it - model.spec.base_classes.begin());
    };

    for (std::size_t g = 0; g < model.spec.merges.size(); ++g) {
        if (model.spec.merges[g].name != stage1_name) continue;
        res.routed_group = g;
        res.stage2_probs = predict_proba(model.stage2[g], features);
        std::size_t winner = 0;
        for (std::size_t c = 1; c < res.stage2_probs.size(); ++c) {
            if (res.stage2_probs[c] > res.stage2_probs[winner]) winner = c;
        }
        res.base_index = base_index(model.spec.merges[g].members[winner]);
        return res;
    }
    res.base_index = base_index(stage1_name);
    return res;
}

std::size_t infer(const HierarchicalModel& model, const std::vector<double>& features) {
    return infer_detailed(model, features).base_index;
}

HierarchyAccuracy hierarchical_accuracy(const HierarchicalModel& model, const LabeledDataset& ds) {
    if (ds.size() == 0) throw ValidationError("hierarchical_accuracy: empty dataset");
    HierarchyAccuracy acc;

    std::vector<std::size_t> base_labels(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) base_labels[i] = ds.samples[i].second;
    const auto stage1_truth = relabel_stage1(base_labels, model.spec);

    std::size_t overall_correct = 0, stage1_correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const InferResult res = infer_detailed(model, ds.samples[i].first);
        if (res.base_index == base_labels[i]) ++overall_correct;
        if (res.stage1_index == stage1_truth[i]) ++stage1_correct;
    }

    // Stage-2 accuracies are measured on each group's true members alone.
    for (std::size_t g = 0; g < model.spec.merges.size(); ++g) {
        const LabeledDataset group_ds = filter_group(ds, model.spec, model.spec.merges[g].name);
        if (group_ds.size() == 0) continue;
        acc.stage2[model.spec.merges[g].name] = dataset_accuracy(model.stage2[g], group_ds);
    }

    acc.overall = static_cast<double>(overall_correct) / static_cast<double>(ds.size());
    acc.stage1 = static_cast<double>(stage1_correct) / static_cast<double>(ds.size());
    return acc;
}

void save_hierarchy(const HierarchicalModel& model, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "grainform-hierarchy-v1";
    manifest["base_classes"] = model.spec.base_classes;
    manifest["stage1_classes"] = model.spec.stage1_classes();
    manifest["stage1_model"] = "stage1.gfn";
    json merges = json::array();
    for (std::size_t g = 0; g < model.spec.merges.size(); ++g) {
        json entry;
        entry["group"] = model.spec.merges[g].name;
        entry["members"] = model.spec.merges[g].members;
        entry["model"] = "stage2_" + model.spec.merges[g].name + ".gfn";
        merges.push_back(entry);
        save_network(model.stage2[g], (fs::path(dir) / entry["model"].get<std::string>()).string());
    }
    manifest["merges"] = merges;
    save_network(model.stage1, (fs::path(dir) / "stage1.gfn").string());
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw IoError("cannot write manifest under: " + dir);
    out << manifest.dump(2) << "\n";
}

HierarchicalModel load_hierarchy(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != "grainform-hierarchy-v1")
        throw IoError("not a hierarchy manifest: " + manifest_path.string());

    HierarchicalModel model;
    model.spec.base_classes = manifest.at("base_classes").get<std::vector<std::string>>();
    for (const auto& entry : manifest.at("merges")) {
        MergeGroup group;
        group.name = entry.at("group").get<std::string>();
        group.members = entry.at("members").get<std::vector<std::string>>();
        model.spec.merges.push_back(group);
        model.stage2.push_back(
            load_network((fs::path(dir) / entry.at("model").get<std::string>()).string()));
    }
    model.spec.validate();
    model.stage1 =
        load_network((fs::path(dir) / manifest.at("stage1_model").get<std::string>()).string());
    if (model.stage1.spec.output_classes != model.spec.stage1_classes().size())
        throw IoError("stage-1 model width does not match manifest classes");
    for (std::size_t g = 0; g < model.spec.merges.size(); ++g) {
        if (model.stage2[g].spec.output_classes != model.spec.merges[g].members.size())
            throw IoError("stage-2 model width does not match group '" +
                          model.spec.merges[g].name + "'");
    }
    return model;
}

}  // namespace grainform
