#ifndef GRAINFORM_IMAGE_HPP
#define GRAINFORM_IMAGE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "grainform/errors.hpp"

namespace grainform {

// Grayscale raster, intensities in [0,1], row-major.
struct GrainImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;
    std::string label;       // class name, empty if unknown
    std::string provenance;  // source path or synthesis record

    GrainImage() = default;
    GrainImage(std::size_t w, std::size_t h, double fill = 0.0)
        : width(w), height(h), pixels(w * h, fill) {}

    double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

    void validate() const {
        if (width < 8 || height < 8)
            throw ValidationError("GrainImage: dimensions must be at least 8x8");
        if (pixels.size() != width * height)
            throw ValidationError("GrainImage: pixel buffer size mismatch");
        for (double p : pixels) {
            if (!(p >= 0.0 && p <= 1.0))
                throw ValidationError("GrainImage: pixel out of [0,1]");
        }
    }
};

// PNG/JPEG/BMP decode to grayscale; also returns the color planes (r,g,b in
// [0,1]) when planes is non-null, for the rgb channel mode.
GrainImage read_image(const std::string& path,
                      std::vector<std::vector<double>>* planes = nullptr);

// Writes an 8-bit grayscale PNG (or BMP/JPEG by extension).
void write_image(const GrainImage& img, const std::string& path);

}  // namespace grainform

#endif
