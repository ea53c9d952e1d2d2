#ifndef GRAINFORM_IMAGEPREP_HPP
#define GRAINFORM_IMAGEPREP_HPP

#include <utility>
#include <vector>

#include "grainform/image.hpp"

namespace grainform {

struct ForegroundMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> on;  // 1 = grain, 0 = background

    bool at(std::size_t x, std::size_t y) const { return on[y * width + x] != 0; }
    std::size_t count() const;
};

// Axis-aligned pixel box, inclusive coordinates.
struct AlignedBox {
    std::size_t left = 0, top = 0, right = 0, bottom = 0;
    double rotation_applied = 0.0;  // degrees in [0, 180)

    std::size_t width() const { return right - left + 1; }
    std::size_t height() const { return bottom - top + 1; }
    std::size_t area() const { return width() * height(); }
};

// How images are turned into feature vectors.
struct PreprocessConfig {
    bool fixed_flipping = true;
    double threshold = 0.1;
    std::size_t out_side = 32;
    bool rgb = false;  // concatenate r,g,b planes instead of grayscale

    std::size_t feature_dim() const { return out_side * out_side * (rgb ? 3 : 1); }
};

// Threshold, then keep only the largest 4-connected component.
ForegroundMask segment(const GrainImage& img, double threshold);

// Smallest axis-aligned box containing every foreground pixel.
AlignedBox tight_bbox(const ForegroundMask& mask);

// Rotates counterclockwise about the image center with bilinear
// interpolation. The canvas grows so nothing clips; exposed area is black.
GrainImage rotate(const GrainImage& img, double angle_deg);

// Searches [0, 180) for the rotation minimizing the tight bounding box area
// (1 degree sweep, then 0.1 degree refinement), then lays the grain
// horizontal (box width >= height). Returns the rotated image and its box.
// exact_angle_out, when given, receives the full rotation actually applied
// (not folded mod 180), which the rgb path needs to rotate color planes.
std::pair<GrainImage, AlignedBox> normalize_orientation(const GrainImage& img,
                                                        double threshold = 0.1,
                                                        double* exact_angle_out = nullptr);

// Crop to the tight box padded 10% per side, bilinear-resample to
// out_side x out_side, emit row-major intensities.
std::vector<double> standardize(const GrainImage& img, std::size_t out_side,
                                double threshold = 0.1);

// The full chain: optional orientation normalization, then standardize.
// In rgb mode the geometry is computed on the grayscale image and the same
// transform is applied to each color plane.
std::vector<double> preprocess(const GrainImage& img, const PreprocessConfig& config,
                               const std::vector<std::vector<double>>* planes = nullptr,
                               AlignedBox* box_out = nullptr);

// Search used inside normalize_orientation, exposed for the CLI debug output:
// best angle in degrees over [0, 180) before the horizontal flip.
double minimal_box_angle(const ForegroundMask& mask);

// Bounding-box extent (w, h) of the mask's foreground points rotated by
// angle_deg about the image center, in continuous pixel units.
std::pair<double, double> rotated_extent(const ForegroundMask& mask, double angle_deg);

// Crop + resize helper shared by the grayscale and color paths.
std::vector<double> crop_resize(const std::vector<double>& pixels, std::size_t width,
                                std::size_t height, const AlignedBox& box,
                                std::size_t out_side);

}  // namespace grainform

#endif
