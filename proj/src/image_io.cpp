// Raster codecs. OpenCV is used strictly for decode/encode; all geometry
// lives in imageprep.cpp.
#include "grainform/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace grainform {

GrainImage read_image(const std::string& path, std::vector<std::vector<double>>* planes) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot read image: " + path);

    GrainImage img(static_cast<std::size_t>(bgr.cols), static_cast<std::size_t>(bgr.rows));
    img.provenance = path;
    if (planes) planes->assign(3, std::vector<double>(img.width * img.height));

    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            const double b = row[x][0] / 255.0;
            const double g = row[x][1] / 255.0;
            const double r = row[x][2] / 255.0;
            // Rec. 601 luma.
            img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) =
                0.299 * r + 0.587 * g + 0.114 * b;
            if (planes) {
                const std::size_t i = static_cast<std::size_t>(y) * img.width +
                                      static_cast<std::size_t>(x);
                (*planes)[0][i] = r;
                (*planes)[1][i] = g;
                (*planes)[2][i] = b;
            }
        }
    }
    return img;
}

void write_image(const GrainImage& img, const std::string& path) {
    cv::Mat gray(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC1);
    for (std::size_t y = 0; y < img.height; ++y) {
        unsigned char* row = gray.ptr<unsigned char>(static_cast<int>(y));
        for (std::size_t x = 0; x < img.width; ++x) {
            const double v = img.at(x, y);
            row[x] = static_cast<unsigned char>(std::lround(std::min(1.0, std::max(0.0, v)) * 255.0));
        }
    }
    if (!cv::imwrite(path, gray)) throw IoError("cannot write image: " + path);
}

}  // namespace grainform
