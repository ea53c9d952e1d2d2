#include "grainform/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "grainform/rng.hpp"

namespace fs = std::filesystem;

namespace grainform {

std::vector<std::size_t> LabeledDataset::per_class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const auto& [features, label] : samples) ++counts[label];
    return counts;
}

void GrainClassParams::validate() const {
    if (name.empty()) throw ValidationError("grain class needs a name");
    if (!(min_length_mm > 0.0 && min_length_mm <= max_length_mm))
        throw ValidationError(name + ": bad length range");
    if (!(min_width_mm > 0.0 && min_width_mm <= max_width_mm))
        throw ValidationError(name + ": bad width range");
    if (!(opacity > 0.0 && opacity <= 1.0))
        throw ValidationError(name + ": opacity must be in (0,1]");
}

std::vector<GrainClassParams> preset_classes(const std::string& preset) {
    if (preset == "global5") {
        // Opacities form a geometric ladder (ratio ~1.5): the resize step
        // normalizes shape away, so brightness carries the class identity,
        // and equal brightness ratios keep every adjacent pair equally easy.
        return {
            {"Arborio", 6.0, 7.5, 3.0, 4.0, 1.0},
            {"Basmati", 8.5, 11.5, 3.5, 4.5, 0.67},
            {"Ipsala", 9.0, 11.0, 4.0, 5.5, 0.44},
            {"Jasmine", 6.5, 10.0, 2.5, 3.5, 0.30},
            {"Karacadag", 4.5, 6.0, 3.0, 4.0, 0.20},
        };
    }
    if (preset == "domestic6") {
        // Average dimensions +-10% as ranges; Panjin and Yanbian are kept
        // deliberately close in opacity and size.
        auto around = [](double v) { return std::pair<double, double>{0.9 * v, 1.1 * v}; };
        std::vector<GrainClassParams> out;
        const struct {
            const char* name;
            double len, wid, opacity;
        } rows[] = {
            {"GuangdongSimiao", 6.74, 1.74, 0.95},
            {"NortheasternGlutinous", 4.45, 2.86, 0.60},
            {"PanjinCrabField", 4.82, 2.83, 0.72},
            {"WannianGong", 6.81, 2.20, 0.50},
            {"Wuchang", 6.63, 2.44, 0.85},
            {"Yanbian", 4.59, 2.62, 0.70},
        };
        for (const auto& r : rows) {
            const auto [lmin, lmax] = around(r.len);
            const auto [wmin, wmax] = around(r.wid);
            out.push_back({r.name, lmin, lmax, wmin, wmax, r.opacity});
        }
        return out;
    }
    if (preset == "confusable5") {
        // global5 with the Arborio/Karacadag ranges overlapped and their
        // brightness ratio shrunk to ~1.2 (the other classes keep ~1.5
        // spacing), so that pair is the one genuinely confusable split.
        return {
            {"Arborio", 5.5, 7.0, 3.0, 4.0, 0.28},
            {"Basmati", 8.5, 11.5, 3.5, 4.5, 1.0},
            {"Ipsala", 9.0, 11.0, 4.0, 5.5, 0.64},
            {"Jasmine", 6.5, 10.0, 2.5, 3.5, 0.41},
            {"Karacadag", 5.0, 6.5, 3.0, 4.0, 0.23},
        };
    }
    throw ValidationError("unknown preset: " + preset +
                          " (expected global5, domestic6, or confusable5)");
}

std::size_t worker_count() {
    const char* env = std::getenv("GRAINFORM_THREADS");
    if (!env) return 1;
    const long n = std::strtol(env, nullptr, 10);
    return n > 0 ? static_cast<std::size_t>(n) : 1;
}

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

// Runs fn(i) for i in [0, n) across worker_count() threads. Each index is
// independent, so the result is identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

LabeledDataset load_directory(const std::string& root, const PreprocessConfig& config) {
    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);

    std::vector<std::string> class_names;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_names.push_back(entry.path().filename().string());
    }
    std::sort(class_names.begin(), class_names.end());
    if (class_names.empty()) throw IoError("dataset root has no class subdirectories: " + root);

    std::vector<std::pair<fs::path, std::size_t>> files;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        std::vector<fs::path> paths;
        for (const auto& entry : fs::directory_iterator(fs::path(root) / class_names[c])) {
            if (entry.is_regular_file() && is_image_file(entry.path())) paths.push_back(entry.path());
        }
        std::sort(paths.begin(), paths.end());
        for (auto& p : paths) files.emplace_back(std::move(p), c);
    }

    LabeledDataset ds;
    ds.class_names = class_names;
    ds.feature_dim = config.feature_dim();
    std::vector<std::vector<double>> features(files.size());
    std::vector<std::uint8_t> ok(files.size(), 0);
    std::vector<std::string> warnings(files.size());
    parallel_for(files.size(), [&](std::size_t i) {
        try {
            std::vector<std::vector<double>> planes;
            GrainImage img = read_image(files[i].first.string(), config.rgb ? &planes : nullptr);
            features[i] = preprocess(img, config, config.rgb ? &planes : nullptr);
            ok[i] = 1;
        } catch (const std::exception& e) {
            warnings[i] = e.what();
        }
    });
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (ok[i]) {
            ds.samples.emplace_back(std::move(features[i]), files[i].second);
        } else {
            ++skipped;
            std::cerr << "warning: skipping " << files[i].first.string() << ": " << warnings[i]
                      << "\n";
        }
    }
    if (skipped > 0) {
        std::cerr << "loaded " << ds.samples.size() << " of " << files.size() << " images ("
                  << skipped << " skipped)\n";
    }
    if (ds.samples.empty()) throw IoError("no readable images under: " + root);
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double train_fraction,
                                                std::uint64_t seed, bool stratify) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("split: train_fraction must be in (0,1)");

    LabeledDataset train, test;
    train.class_names = test.class_names = ds.class_names;
    train.feature_dim = test.feature_dim = ds.feature_dim;

    if (!stratify) {
        std::vector<std::size_t> order(ds.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, 0));
        rng.shuffle(order);
        const std::size_t n_train =
            static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.size())));
        for (std::size_t i = 0; i < order.size(); ++i)
            (i < n_train ? train : test).samples.push_back(ds.samples[order[i]]);
        return {std::move(train), std::move(test)};
    }

    std::vector<std::vector<std::size_t>> by_class(ds.class_names.size());
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.samples[i].second].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() < 2)
            throw ValidationError("split: class '" + ds.class_names[c] +
                                  "' has fewer than 2 samples");
        Rng rng(derive_seed(seed, c + 1));
        rng.shuffle(by_class[c]);
        const std::size_t n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(by_class[c].size())));
        for (std::size_t i = 0; i < by_class[c].size(); ++i)
            (i < n_train ? train : test).samples.push_back(ds.samples[by_class[c][i]]);
    }
    return {std::move(train), std::move(test)};
}

GrainImage synth_grain(const GrainClassParams& params, std::uint64_t seed,
                       std::size_t canvas_px, double px_per_mm) {
    params.validate();
    if (px_per_mm * params.max_length_mm > static_cast<double>(canvas_px))
        throw ValidationError(params.name + ": grain would clip canvas (" +
                              std::to_string(px_per_mm * params.max_length_mm) + " px > " +
                              std::to_string(canvas_px) + ")");

    Rng rng(seed);
    const double length_mm = rng.uniform(params.min_length_mm, params.max_length_mm);
    const double width_mm = rng.uniform(params.min_width_mm, params.max_width_mm);
    const double angle_deg = rng.uniform(0.0, 360.0);

    const double a = 0.5 * length_mm * px_per_mm;  // semi-major, px
    const double b = 0.5 * width_mm * px_per_mm;   // semi-minor, px
    const double phi = angle_deg * M_PI / 180.0;
    const double c = std::cos(phi), s = std::sin(phi);
    const double cx = (static_cast<double>(canvas_px) - 1.0) / 2.0;
    const double cy = cx;

    // Extent of the rotated ellipse along each canvas axis.
    const double ext_x = std::sqrt(a * a * c * c + b * b * s * s);
    const double ext_y = std::sqrt(a * a * s * s + b * b * c * c);
    if (cx - ext_x < 0.5 || cx + ext_x > static_cast<double>(canvas_px) - 1.5 ||
        cy - ext_y < 0.5 || cy + ext_y > static_cast<double>(canvas_px) - 1.5)
        throw ValidationError(params.name + ": grain would clip canvas");

    GrainImage img(canvas_px, canvas_px, 0.0);
    img.label = params.name;
    {
        std::ostringstream prov;
        prov << "synth:" << params.name << ":seed=" << seed << ":len_mm=" << length_mm
             << ":wid_mm=" << width_mm << ":angle=" << angle_deg;
        img.provenance = prov.str();
    }
    for (std::size_t y = 0; y < canvas_px; ++y) {
        for (std::size_t x = 0; x < canvas_px; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            const double u = (c * dx + s * dy) / a;
            const double v = (-s * dx + c * dy) / b;
            if (u * u + v * v <= 1.0) {
                const double noisy = params.opacity + rng.normal(0.0, 0.05);
                img.at(x, y) = std::clamp(noisy, 0.0, 1.0);
            }
        }
    }
    return img;
}

std::vector<GrainImage> synth_grains(const GrainClassParams& params, std::size_t count,
                                     std::uint64_t base_seed, std::size_t class_index,
                                     std::size_t canvas_px, double px_per_mm) {
    std::vector<GrainImage> out(count);
    parallel_for(count, [&](std::size_t i) {
        out[i] = synth_grain(params, derive_seed(base_seed, class_index, i), canvas_px, px_per_mm);
    });
    return out;
}

LabeledDataset synth_dataset(const std::vector<GrainClassParams>& classes, std::size_t per_class,
                             std::uint64_t seed, const PreprocessConfig& config,
                             std::size_t canvas_px, double px_per_mm) {
    if (per_class < 2) throw ValidationError("synth_dataset: per_class must be >= 2");
    if (classes.empty()) throw ValidationError("synth_dataset: no classes given");

    LabeledDataset ds;
    for (const auto& p : classes) ds.class_names.push_back(p.name);
    ds.feature_dim = config.feature_dim();
    ds.samples.resize(classes.size() * per_class);
    parallel_for(ds.samples.size(), [&](std::size_t i) {
        const std::size_t c = i / per_class;
        const std::size_t k = i % per_class;
        GrainImage img =
            synth_grain(classes[c], derive_seed(seed, c, k), canvas_px, px_per_mm);
        std::vector<std::vector<double>> planes;
        if (config.rgb) planes.assign(3, img.pixels);  // synthetic grains are gray
        ds.samples[i] = {preprocess(img, config, config.rgb ? &planes : nullptr), c};
    });
    return ds;
}

}  // namespace grainform
