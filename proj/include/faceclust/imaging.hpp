#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace faceclust {

// Side length of the extracted, normalized face crop.
inline constexpr int kFaceSize = 224;

struct Rect {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    long long area() const { return static_cast<long long>(w) * h; }
    bool operator==(const Rect&) const = default;
};

double iou(const Rect& a, const Rect& b);

// Row-major grayscale raster with real intensities in [0, 255].
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0);
    GrayImage(int width, int height, std::vector<double> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels_mut() noexcept { return pixels_; }

    bool contains(const Rect& r) const;
    GrayImage crop(const Rect& r) const;

    bool operator==(const GrayImage&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

// Exact prefix sums: sum(x, y) covers every source pixel (i <= x, j <= y).
// Integer-valued inputs accumulate exactly in double up to 2^53.
class IntegralImage {
public:
    IntegralImage() = default;
    explicit IntegralImage(const GrayImage& img, bool squared = false);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    double sum(int x, int y) const { return sums_[static_cast<std::size_t>(y) * width_ + x]; }
    std::span<const double> sums() const noexcept { return sums_; }

    // Four-lookup rectangle sum: D - B - C + A.
    double rect_sum(const Rect& r) const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> sums_;
};

inline IntegralImage integral_image(const GrayImage& img) { return IntegralImage(img); }

struct FeatureVector {
    std::vector<double> values;
    std::string provenance;
};

// Decodes PNG or JPEG bytes to Rec.601 luma. `name` appears in decode errors.
GrayImage decode_to_gray(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");
GrayImage load_gray(const std::filesystem::path& path);

// Bilinear interpolation with pixel-center alignment and edge clamping.
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

FeatureVector flatten(const GrayImage& img, std::string provenance = {});
GrayImage reshape(const FeatureVector& v, int width, int height);

// Rounds to the nearest integer intensity, matching what an 8-bit file stores.
GrayImage quantize8(const GrayImage& img);

// 8-bit grayscale PNG. Output bytes depend only on the pixel values.
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void save_png(const GrayImage& img, const std::filesystem::path& path);

// Files with a .png/.jpg/.jpeg extension (case-insensitive), sorted by path.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace faceclust
