// grainform: rice-grain classification experiments on a dense network.
// Subcommands: synth, preprocess, train, eval, infer, report.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "grainform/config.hpp"
#include "grainform/dataset.hpp"
#include "grainform/hierarchy.hpp"
#include "grainform/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace grainform;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitIo = 3;

struct CliOverrides {
    std::string config_file;
    std::vector<std::string> sets;  // key=value pairs
};

ExperimentConfig resolve_config(const CliOverrides& cli) {
    ExperimentConfig config;
    if (!cli.config_file.empty()) config = parse_config_file(cli.config_file);
    for (const std::string& entry : cli.sets) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw ValidationError("override must be key=value: " + entry);
        apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
    }
    return config;
}

void add_config_options(CLI::App* cmd, CliOverrides& cli) {
    cmd->add_option("-c,--config", cli.config_file, "config file (key = value lines)");
    cmd->add_option("-s,--set", cli.sets,
                    "override a config entry, e.g. --set optimizer=adam (repeatable)");
}

LabeledDataset build_dataset(const ExperimentConfig& config) {
    if (!config.dataset_dir.empty()) return load_directory(config.dataset_dir, config.preprocess);
    return synth_dataset(preset_classes(config.preset), config.per_class, config.seed,
                         config.preprocess, config.canvas_px, config.px_per_mm);
}

HierarchySpec hierarchy_spec_for(const ExperimentConfig& config,
                                 const std::vector<std::string>& class_names) {
    HierarchySpec spec;
    spec.base_classes = class_names;
    spec.merges = config.merges;
    spec.validate();
    return spec;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    out << text;
}

json accuracy_block(const HierarchyAccuracy& acc) {
    json j;
    j["overall"] = acc.overall;
    j["stage1"] = acc.stage1;
    for (const auto& [group, a] : acc.stage2) j["stage2"][group] = a;
    return j;
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const ExperimentConfig& config) {
    if (config.preset.empty()) throw ValidationError("synth needs a preset");
    const auto classes = preset_classes(config.preset);
    fs::create_directories(config.out_dir);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const fs::path dir = fs::path(config.out_dir) / classes[c].name;
        fs::create_directories(dir);
        const auto grains = synth_grains(classes[c], config.per_class, config.seed, c,
                                         config.canvas_px, config.px_per_mm);
        for (std::size_t i = 0; i < grains.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "grain_%05zu.png", i);
            write_image(grains[i], (dir / name).string());
        }
        std::cout << classes[c].name << ": " << grains.size() << " images\n";
    }
    std::cout << "wrote " << classes.size() * config.per_class << " images under "
              << config.out_dir << "\n";
    return 0;
}

// ---- preprocess -----------------------------------------------------------

int cmd_preprocess(const ExperimentConfig& config, const std::string& input_dir) {
    if (!fs::is_directory(input_dir)) throw IoError("not a directory: " + input_dir);
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::recursive_directory_iterator(input_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
            inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end());
    if (inputs.empty()) throw IoError("no images under: " + input_dir);

    fs::create_directories(config.out_dir);
    std::ostringstream csv;
    csv << "path,angle_deg,box_left,box_top,box_right,box_bottom,box_w_px,box_h_px\n";
    std::size_t failures = 0;
    for (const fs::path& path : inputs) {
        try {
            const GrainImage img = read_image(path.string());
            const auto [normalized, box] = normalize_orientation(img, config.preprocess.threshold);
            const fs::path rel = fs::relative(path, input_dir);
            fs::path out_path = fs::path(config.out_dir) / rel;
            out_path.replace_extension(".png");
            fs::create_directories(out_path.parent_path());
            write_image(normalized, out_path.string());
            csv << rel.string() << "," << box.rotation_applied << "," << box.left << ","
                << box.top << "," << box.right << "," << box.bottom << "," << box.width() << ","
                << box.height() << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cerr << "warning: " << path.string() << ": " << e.what() << "\n";
        }
    }
    write_text(fs::path(config.out_dir) / "preprocess.csv", csv.str());
    std::cout << "preprocessed " << inputs.size() - failures << " of " << inputs.size()
              << " images into " << config.out_dir << "\n";
    return failures == inputs.size() ? kExitValidation : 0;
}

// ---- train ----------------------------------------------------------------

json train_once(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out_dir) {
    ExperimentConfig run = config;
    run.seed = seed;
    const LabeledDataset full = build_dataset(run);
    auto [train, test] = split(full, run.train_fraction, run.seed, run.stratify);

    TrainOptions options;
    options.epochs = run.epochs;
    options.batch_size = run.batch_size;
    options.seed = run.seed;

    fs::create_directories(out_dir);
    json summary;
    summary["config"] = json::parse(config_to_json(run));
    summary["class_names"] = full.class_names;
    summary["train_samples"] = train.size();
    summary["test_samples"] = test.size();

    if (run.merges.empty()) {
        const TrainedModel model =
            train_network(train, &test, run.network_spec(full.class_names.size()),
                          run.optimizer, options);
        save_network(model.net, (out_dir / "model.gfn").string());
        write_text(out_dir / "report.csv", model.report.to_csv());
        const auto preds = predict_dataset(model.net, test);
        std::vector<std::size_t> labels;
        for (const auto& s : test.samples) labels.push_back(s.second);
        const ConfusionMatrix cm = confusion(preds, labels, full.class_names);
        write_text(out_dir / "confusion.csv", cm.to_csv());
        summary["mode"] = "flat";
        summary["final_train_accuracy"] = model.report.epochs.back().train_accuracy;
        summary["final_test_accuracy"] = model.report.epochs.back().test_accuracy;
        summary["confusion"] = cm.counts;
        summary["wall_seconds"] = model.report.wall_seconds;
    } else {
        const HierarchySpec spec = hierarchy_spec_for(run, full.class_names);
        const HierarchyTrainResult result =
            train_hierarchy(train, &test, spec, run.network_spec(0), run.optimizer, options);
        save_hierarchy(result.model, out_dir.string());
        write_text(out_dir / "report_stage1.csv", result.stage1_report.to_csv());
        for (std::size_t g = 0; g < spec.merges.size(); ++g)
            write_text(out_dir / ("report_stage2_" + spec.merges[g].name + ".csv"),
                       result.stage2_reports[g].to_csv());
        const HierarchyAccuracy acc = hierarchical_accuracy(result.model, test);
        std::vector<std::size_t> preds, labels;
        for (const auto& s : test.samples) {
            preds.push_back(infer(result.model, s.first));
            labels.push_back(s.second);
        }
        const ConfusionMatrix cm = confusion(preds, labels, full.class_names);
        write_text(out_dir / "confusion.csv", cm.to_csv());
        summary["mode"] = "hierarchy";
        summary["accuracy"] = accuracy_block(acc);
        summary["final_test_accuracy"] = acc.overall;
        summary["confusion"] = cm.counts;
        double wall = result.stage1_report.wall_seconds;
        for (const auto& r : result.stage2_reports) wall += r.wall_seconds;
        summary["wall_seconds"] = wall;
    }
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    return summary;
}

int cmd_train(const ExperimentConfig& config, std::size_t seed_count) {
    config.validate();
    if (seed_count <= 1) {
        const json summary = train_once(config, config.seed, config.out_dir);
        std::cout << "final test accuracy: " << summary["final_test_accuracy"].get<double>()
                  << "\n";
        std::cout << "artifacts in " << config.out_dir << "\n";
        return 0;
    }
    // Seed sweep: one run per seed under out_dir/seed_<k>, mean +- stdev on top.
    std::vector<double> accs;
    for (std::size_t k = 0; k < seed_count; ++k) {
        const std::uint64_t seed = config.seed + k;
        const json summary =
            train_once(config, seed, fs::path(config.out_dir) / ("seed_" + std::to_string(seed)));
        accs.push_back(summary["final_test_accuracy"].get<double>());
        std::cout << "seed " << seed << ": test accuracy " << accs.back() << "\n";
    }
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    const double stdev = std::sqrt(var / static_cast<double>(accs.size()));
    json sweep;
    sweep["seeds"] = seed_count;
    sweep["base_seed"] = config.seed;
    sweep["test_accuracies"] = accs;
    sweep["mean_test_accuracy"] = mean;
    sweep["stdev_test_accuracy"] = stdev;
    write_text(fs::path(config.out_dir) / "sweep.json", sweep.dump(2) + "\n");
    std::cout << "mean test accuracy over " << seed_count << " seeds: " << mean << " +- " << stdev
              << "\n";
    return 0;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const ExperimentConfig& config, const std::string& model_path) {
    const LabeledDataset ds = build_dataset(config);

    json out;
    out["config"] = json::parse(config_to_json(config));
    std::vector<std::size_t> preds, labels;
    for (const auto& s : ds.samples) labels.push_back(s.second);

    if (fs::is_directory(model_path)) {
        const HierarchicalModel model = load_hierarchy(model_path);
        if (model.spec.base_classes != ds.class_names)
            throw ValidationError("model classes do not match dataset classes");
        if (model.stage1.spec.input_dim != ds.feature_dim)
            throw ValidationError("model expects input_dim " +
                                  std::to_string(model.stage1.spec.input_dim) + ", dataset has " +
                                  std::to_string(ds.feature_dim));
        for (const auto& s : ds.samples) preds.push_back(infer(model, s.first));
        out["accuracy"] = accuracy_block(hierarchical_accuracy(model, ds));
    } else {
        const DenseNetwork net = load_network(model_path);
        if (net.spec.input_dim != ds.feature_dim)
            throw ValidationError("model expects input_dim " +
                                  std::to_string(net.spec.input_dim) + ", dataset has " +
                                  std::to_string(ds.feature_dim));
        if (net.spec.output_classes != ds.class_names.size())
            throw ValidationError("model has " + std::to_string(net.spec.output_classes) +
                                  " classes, dataset has " +
                                  std::to_string(ds.class_names.size()));
        preds = predict_dataset(net, ds);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i)
            if (preds[i] == labels[i]) ++correct;
        out["accuracy"]["overall"] =
            static_cast<double>(correct) / static_cast<double>(ds.size());
    }

    const ConfusionMatrix cm = confusion(preds, labels, ds.class_names);
    out["confusion"] = cm.counts;
    out["class_names"] = ds.class_names;
    out["samples"] = ds.size();
    fs::create_directories(config.out_dir);
    write_text(fs::path(config.out_dir) / "metrics.json", out.dump(2) + "\n");
    write_text(fs::path(config.out_dir) / "confusion.csv", cm.to_csv());
    std::cout << "accuracy: " << out["accuracy"]["overall"].get<double>() << " over " << ds.size()
              << " samples; results in " << config.out_dir << "\n";
    return 0;
}

// ---- infer ----------------------------------------------------------------

void print_distribution(const char* title, const std::vector<std::string>& names,
                        const std::vector<double>& probs) {
    std::cout << title << ":\n";
    for (std::size_t c = 0; c < names.size(); ++c)
        std::cout << "  " << names[c] << ": " << probs[c] << "\n";
}

int cmd_infer(const ExperimentConfig& config, const std::string& model_path,
              const std::string& image_path) {
    std::vector<std::vector<double>> planes;
    const GrainImage img =
        read_image(image_path, config.preprocess.rgb ? &planes : nullptr);
    const auto features =
        preprocess(img, config.preprocess, config.preprocess.rgb ? &planes : nullptr);

    if (fs::is_directory(model_path)) {
        const HierarchicalModel model = load_hierarchy(model_path);
        const InferResult res = infer_detailed(model, features);
        std::cout << "predicted class: " << model.spec.base_classes[res.base_index] << "\n";
        print_distribution("stage-1 probabilities", model.spec.stage1_classes(), res.stage1_probs);
        if (res.routed_group) {
            const MergeGroup& group = model.spec.merges[*res.routed_group];
            print_distribution(("stage-2 probabilities (" + group.name + ")").c_str(),
                               group.members, res.stage2_probs);
        } else {
            std::cout << "stage 2 not invoked\n";
        }
    } else {
        const DenseNetwork net = load_network(model_path);
        const auto probs = predict_proba(net, features);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.size(); ++c)
            if (probs[c] > probs[best]) best = c;
        std::cout << "predicted class index: " << best << "\n";
        std::cout << "probabilities:\n";
        for (std::size_t c = 0; c < probs.size(); ++c)
            std::cout << "  class " << c << ": " << probs[c] << "\n";
    }
    return 0;
}

// ---- report ---------------------------------------------------------------

int cmd_report(const std::vector<std::string>& paths) {
    std::vector<json> summaries;
    for (const std::string& arg : paths) {
        std::vector<fs::path> files;
        if (fs::is_directory(arg)) {
            for (const auto& entry : fs::recursive_directory_iterator(arg))
                if (entry.path().filename() == "summary.json") files.push_back(entry.path());
            std::sort(files.begin(), files.end());
        } else {
            files.push_back(arg);
        }
        for (const fs::path& f : files) {
            std::ifstream in(f);
            if (!in) throw IoError("cannot open: " + f.string());
            json j;
            in >> j;
            j["_path"] = f.string();
            summaries.push_back(std::move(j));
        }
    }
    if (summaries.empty()) throw IoError("no summary.json files found");

    std::cout << "run,optimizer,seed,test_accuracy\n";
    std::vector<double> accs;
    for (const json& s : summaries) {
        const double acc = s.value("final_test_accuracy", -1.0);
        accs.push_back(acc);
        std::cout << s["_path"].get<std::string>() << ","
                  << s["config"].value("optimizer", "?") << "," << s["config"].value("seed", 0)
                  << "," << acc << "\n";
    }
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    std::cout << "mean," << mean << ",stdev," << std::sqrt(var / static_cast<double>(accs.size()))
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rice-grain classification with a dense network"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::string input_dir, model_path, image_path;
    std::vector<std::string> report_paths;
    std::size_t seed_count = 1;

    CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset tree");
    add_config_options(synth, cli);

    CLI::App* preprocess = app.add_subcommand("preprocess", "orientation-normalize images + CSV");
    add_config_options(preprocess, cli);
    preprocess->add_option("input", input_dir, "directory of images")->required();

    CLI::App* train = app.add_subcommand("train", "train a flat or hierarchical model");
    add_config_options(train, cli);
    train->add_option("--seeds", seed_count, "run this many consecutive seeds, report mean/stdev");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a model on a dataset");
    add_config_options(eval, cli);
    eval->add_option("--model", model_path, "model file or hierarchy directory")->required();

    CLI::App* infer_cmd = app.add_subcommand("infer", "classify one image");
    add_config_options(infer_cmd, cli);
    infer_cmd->add_option("--model", model_path, "model file or hierarchy directory")->required();
    infer_cmd->add_option("image", image_path, "image to classify")->required();

    CLI::App* report = app.add_subcommand("report", "summarize one or more training runs");
    report->add_option("paths", report_paths, "summary.json files or directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) return cmd_report(report_paths);
        const ExperimentConfig config = resolve_config(cli);
        if (synth->parsed()) return cmd_synth(config);
        if (preprocess->parsed()) return cmd_preprocess(config, input_dir);
        if (train->parsed()) return cmd_train(config, seed_count);
        if (eval->parsed()) return cmd_eval(config, model_path);
        if (infer_cmd->parsed()) return cmd_infer(config, model_path, image_path);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
