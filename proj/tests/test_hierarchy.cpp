#include <doctest.h>

#include <filesystem>

#include "grainform/hierarchy.hpp"
#include "grainform/rng.hpp"

using namespace grainform;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kGlobal = {"Arborio", "Basmati", "Ipsala", "Jasmine", "Karacadag"};

HierarchySpec ak_spec() {
    HierarchySpec spec;
    spec.base_classes = kGlobal;
    spec.merges = {{"AK", {"Arborio", "Karacadag"}}};
    return spec;
}

// Gaussian clusters in 4-D; Arborio and Karacadag sit close together.
LabeledDataset cluster_dataset(std::size_t per_class, std::uint64_t seed) {
    const double centers[5][4] = {
        {0.80, 0.20, 0.20, 0.20},  // Arborio
        {0.20, 0.80, 0.20, 0.20},  // Basmati
        {0.20, 0.20, 0.80, 0.20},  // Ipsala
        {0.20, 0.20, 0.20, 0.80},  // Jasmine
        {0.70, 0.25, 0.20, 0.20},  // Karacadag, near Arborio
    };
    LabeledDataset ds;
    ds.class_names = kGlobal;
    ds.feature_dim = 4;
    Rng rng(seed);
    for (std::size_t c = 0; c < 5; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            std::vector<double> x(4);
            for (std::size_t d = 0; d < 4; ++d)
                x[d] = std::clamp(centers[c][d] + rng.normal(0.0, 0.02), 0.0, 1.0);
            ds.samples.push_back({std::move(x), c});
        }
    }
    return ds;
}

NetworkSpec small_template() {
    NetworkSpec spec;
    spec.input_dim = 4;
    spec.layer_widths = {16};
    spec.output_classes = 0;  // filled per stage
    return spec;
}

}  // namespace

TEST_CASE("hierarchy spec validation and stage-1 classes") {
    HierarchySpec spec = ak_spec();
    spec.validate();
    CHECK(spec.stage1_classes() == std::vector<std::string>{"AK", "Basmati", "Ipsala", "Jasmine"});

    HierarchySpec bad = ak_spec();
    bad.merges[0].members = {"Arborio"};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = ak_spec();
    bad.merges[0].members = {"Arborio", "Nope"};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = ak_spec();
    bad.merges.push_back({"AJ", {"Arborio", "Jasmine"}});
    CHECK_THROWS_AS(bad.validate(), ValidationError);  // Arborio in two groups
    bad = ak_spec();
    bad.merges[0].name = "Basmati";
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("relabel_stage1 maps merged members to the group index") {
    const HierarchySpec spec = ak_spec();
    // [Arborio, Basmati, Karacadag] -> [AK, Basmati, AK]
    const auto out = relabel_stage1({0, 1, 4}, spec);
    CHECK(out == std::vector<std::size_t>{0, 1, 0});
    CHECK(spec.stage1_classes().size() == 4);

    HierarchySpec flat;
    flat.base_classes = kGlobal;
    const auto identity = relabel_stage1({0, 1, 2, 3, 4}, flat);
    CHECK(identity == std::vector<std::size_t>{0, 1, 2, 3, 4});

    CHECK_THROWS_AS(relabel_stage1({5}, spec), ValidationError);
}

TEST_CASE("filter_group keeps only members, relabeled in declared order") {
    const HierarchySpec spec = ak_spec();
    const LabeledDataset ds = cluster_dataset(6, 3);
    const LabeledDataset ak = filter_group(ds, spec, "AK");
    CHECK(ak.size() == 12);
    CHECK(ak.class_names == std::vector<std::string>{"Arborio", "Karacadag"});
    for (const auto& [x, label] : ak.samples) CHECK(label < 2);
    const auto counts = ak.per_class_counts();
    CHECK(counts[0] == 6);
    CHECK(counts[1] == 6);

    CHECK_THROWS_AS(filter_group(ds, spec, "ZZ"), ValidationError);
}

TEST_CASE("train_hierarchy builds a 4-way stage 1 and a binary stage 2") {
    const LabeledDataset ds = cluster_dataset(24, 11);
    const auto [train, test] = split(ds, 0.75, 1);
    TrainOptions options;
    options.epochs = 30;
    options.batch_size = 8;
    options.seed = 5;
    const auto result = train_hierarchy(train, &test, ak_spec(), small_template(),
                                        default_optimizer_config(OptimizerKind::Adam), options);
    CHECK(result.model.stage1.spec.output_classes == 4);
    REQUIRE(result.model.stage2.size() == 1);
    CHECK(result.model.stage2[0].spec.output_classes == 2);
    CHECK(result.stage1_report.epochs.size() == 30);

    // Well-separated clusters: stage 1 should be essentially perfect and the
    // hierarchy metrics should hold their ordering.
    const HierarchyAccuracy acc = hierarchical_accuracy(result.model, test);
    CHECK(acc.stage1 >= 0.95);
    CHECK(acc.overall <= acc.stage1 + 1e-12);
    CHECK(acc.stage2.count("AK") == 1);

    // Routing soundness: stage 2 runs exactly when stage 1 says AK.
    for (const auto& [x, label] : test.samples) {
        const InferResult res = infer_detailed(result.model, x);
        const bool said_ak = res.stage1_index == 0;  // AK is stage-1 class 0
        CHECK(res.routed_group.has_value() == said_ak);
        CHECK(res.base_index < 5);
        if (!said_ak) CHECK(res.stage2_probs.empty());
    }
}

TEST_CASE("a merge-free hierarchy degenerates to the flat model") {
    const LabeledDataset ds = cluster_dataset(12, 21);
    const auto [train, test] = split(ds, 0.75, 2);
    HierarchySpec flat_spec;
    flat_spec.base_classes = kGlobal;

    TrainOptions options;
    options.epochs = 10;
    options.batch_size = 8;
    options.seed = 9;

    NetworkSpec net_spec = small_template();
    net_spec.output_classes = 5;
    const TrainedModel flat =
        train_network(train, &test, net_spec, default_optimizer_config(OptimizerKind::Sgd), options);
    const auto hier = train_hierarchy(train, &test, flat_spec, small_template(),
                                      default_optimizer_config(OptimizerKind::Sgd), options);

    CHECK(hier.model.stage1 == flat.net);
    for (const auto& [x, label] : test.samples) CHECK(infer(hier.model, x) == predict(flat.net, x));
    const HierarchyAccuracy acc = hierarchical_accuracy(hier.model, test);
    CHECK(acc.overall == acc.stage1);
    CHECK(acc.stage2.empty());
}

TEST_CASE("training is deterministic per seed") {
    const LabeledDataset ds = cluster_dataset(8, 33);
    TrainOptions options;
    options.epochs = 5;
    options.batch_size = 4;
    options.seed = 77;
    const auto opt = default_optimizer_config(OptimizerKind::Nadam);
    const auto a = train_hierarchy(ds, nullptr, ak_spec(), small_template(), opt, options);
    const auto b = train_hierarchy(ds, nullptr, ak_spec(), small_template(), opt, options);
    CHECK(a.model.stage1 == b.model.stage1);
    CHECK(a.model.stage2[0] == b.model.stage2[0]);
}

TEST_CASE("train_hierarchy rejects an empty merge group") {
    LabeledDataset ds = cluster_dataset(6, 1);
    ds.samples.erase(std::remove_if(ds.samples.begin(), ds.samples.end(),
                                    [](const auto& s) { return s.second == 0 || s.second == 4; }),
                     ds.samples.end());
    TrainOptions options;
    options.epochs = 1;
    options.batch_size = 4;
    CHECK_THROWS_WITH_AS(train_hierarchy(ds, nullptr, ak_spec(), small_template(),
                                         default_optimizer_config(OptimizerKind::Sgd), options),
                         doctest::Contains("AK"), ValidationError);
}

TEST_CASE("hierarchy save/load round trip preserves inference") {
    const LabeledDataset ds = cluster_dataset(10, 55);
    TrainOptions options;
    options.epochs = 8;
    options.batch_size = 8;
    options.seed = 3;
    const auto result = train_hierarchy(ds, nullptr, ak_spec(), small_template(),
                                        default_optimizer_config(OptimizerKind::Adam), options);

    const fs::path dir = fs::temp_directory_path() / "gf_hier_test";
    fs::remove_all(dir);
    save_hierarchy(result.model, dir.string());
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "stage1.gfn"));
    CHECK(fs::exists(dir / "stage2_AK.gfn"));

    const HierarchicalModel loaded = load_hierarchy(dir.string());
    CHECK(loaded.stage1 == result.model.stage1);
    for (const auto& [x, label] : ds.samples) CHECK(infer(loaded, x) == infer(result.model, x));
    fs::remove_all(dir);

    CHECK_THROWS_AS(load_hierarchy((fs::temp_directory_path() / "gf_no_such").string()), IoError);
}
