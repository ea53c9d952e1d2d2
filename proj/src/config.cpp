#include "grainform/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace grainform {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "on" || value == "1") return true;
    if (value == "false" || value == "off" || value == "0") return false;
    throw ValidationError("config: " + key + " must be true or false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset_dir.empty() == preset.empty())
        throw ValidationError("config: exactly one of dataset_dir or preset must be set");
    if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("config: batch must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("config: train_fraction must be in (0,1)");
    if (widths.empty()) throw ValidationError("config: widths must be non-empty");
    optimizer.validate();
}

NetworkSpec ExperimentConfig::network_spec(std::size_t output_classes) const {
    NetworkSpec spec;
    spec.input_dim = preprocess.feature_dim();
    spec.layer_widths = widths;
    spec.output_classes = output_classes;
    return spec;
}

void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value) {
    try {
        if (key == "dataset_dir") {
            config.dataset_dir = value;
        } else if (key == "preset") {
            config.preset = value;
        } else if (key == "per_class") {
            config.per_class = std::stoul(value);
        } else if (key == "canvas_px") {
            config.canvas_px = std::stoul(value);
        } else if (key == "px_per_mm") {
            config.px_per_mm = std::stod(value);
        } else if (key == "fixed_flipping") {
            config.preprocess.fixed_flipping = parse_bool(value, key);
        } else if (key == "threshold") {
            config.preprocess.threshold = std::stod(value);
        } else if (key == "out_side") {
            config.preprocess.out_side = std::stoul(value);
        } else if (key == "channels") {
            if (value == "gray") config.preprocess.rgb = false;
            else if (value == "rgb") config.preprocess.rgb = true;
            else throw ValidationError("config: channels must be gray or rgb");
        } else if (key == "widths") {
            config.widths.clear();
            for (const auto& w : split_list(value)) config.widths.push_back(std::stoul(w));
        } else if (key == "optimizer") {
            const double lr = config.optimizer.learning_rate;
            config.optimizer = default_optimizer_config(optimizer_kind_from_name(value));
            if (config.learning_rate_overridden) config.optimizer.learning_rate = lr;
        } else if (key == "learning_rate") {
            config.optimizer.learning_rate = std::stod(value);
            config.learning_rate_overridden = true;
        } else if (key == "beta1") {
            config.optimizer.beta1 = std::stod(value);
        } else if (key == "beta2") {
            config.optimizer.beta2 = std::stod(value);
        } else if (key == "rho") {
            config.optimizer.rho = std::stod(value);
        } else if (key == "epsilon") {
            config.optimizer.epsilon = std::stod(value);
        } else if (key == "epochs") {
            config.epochs = std::stoul(value);
        } else if (key == "batch") {
            config.batch_size = std::stoul(value);
        } else if (key == "train_fraction") {
            config.train_fraction = std::stod(value);
        } else if (key == "stratify") {
            config.stratify = parse_bool(value, key);
        } else if (key == "seed") {
            config.seed = std::stoull(value);
        } else if (key == "out_dir") {
            config.out_dir = value;
        } else if (key == "merge") {
            const auto colon = value.find(':');
            if (colon == std::string::npos)
                throw ValidationError("config: merge needs the form GROUP: member, member");
            MergeGroup group;
            group.name = trim(value.substr(0, colon));
            group.members = split_list(value.substr(colon + 1));
            if (group.name.empty() || group.members.size() < 2)
                throw ValidationError("config: merge needs a name and at least 2 members");
            config.merges.push_back(std::move(group));
        } else {
            throw ValidationError("config: unknown key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw ValidationError("config: bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw ValidationError("config: value out of range for key '" + key + "'");
    }
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    ExperimentConfig config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(lineno) +
                                  " is not key = value");
        apply_config_entry(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

std::string config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    if (!config.dataset_dir.empty()) j["dataset_dir"] = config.dataset_dir;
    if (!config.preset.empty()) {
        j["preset"] = config.preset;
        j["per_class"] = config.per_class;
        j["canvas_px"] = config.canvas_px;
        j["px_per_mm"] = config.px_per_mm;
    }
    j["fixed_flipping"] = config.preprocess.fixed_flipping;
    j["threshold"] = config.preprocess.threshold;
    j["out_side"] = config.preprocess.out_side;
    j["channels"] = config.preprocess.rgb ? "rgb" : "gray";
    j["widths"] = config.widths;
    j["optimizer"] = optimizer_name(config.optimizer.kind);
    j["learning_rate"] = config.optimizer.learning_rate;
    j["beta1"] = config.optimizer.beta1;
    j["beta2"] = config.optimizer.beta2;
    j["rho"] = config.optimizer.rho;
    j["epsilon"] = config.optimizer.epsilon;
    j["epochs"] = config.epochs;
    j["batch"] = config.batch_size;
    j["train_fraction"] = config.train_fraction;
    j["stratify"] = config.stratify;
    j["seed"] = config.seed;
    j["out_dir"] = config.out_dir;
    nlohmann::json merges = nlohmann::json::array();
    for (const auto& g : config.merges) {
        merges.push_back({{"group", g.name}, {"members", g.members}});
    }
    j["merges"] = merges;
    return j.dump(2);
}

}  // namespace grainform
