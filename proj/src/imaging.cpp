#include "faceclust/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <jpeglib.h>

#include "faceclust/error.hpp"

namespace faceclust {

double iou(const Rect& a, const Rect& b) {
    const int ix0 = std::max(a.x, b.x);
    const int iy0 = std::max(a.y, b.y);
    const int ix1 = std::min(a.x + a.w, b.x + b.w);
    const int iy1 = std::min(a.y + a.h, b.y + b.h);
    if (ix1 <= ix0 || iy1 <= iy0) return 0.0;
    const double inter = static_cast<double>(ix1 - ix0) * (iy1 - iy0);
    return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
    require(width >= 0 && height >= 0, "image dimensions must be nonnegative");
}

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    require(width >= 0 && height >= 0, "image dimensions must be nonnegative");
    require(pixels_.size() == static_cast<std::size_t>(width) * height,
            "pixel count does not match image dimensions");
}

bool GrayImage::contains(const Rect& r) const {
    return r.w >= 1 && r.h >= 1 && r.x >= 0 && r.y >= 0 && r.x + r.w <= width_ &&
           r.y + r.h <= height_;
}

GrayImage GrayImage::crop(const Rect& r) const {
    require(contains(r), "crop rectangle outside image");
    GrayImage out(r.w, r.h);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x) out.at(x, y) = at(r.x + x, r.y + y);
    return out;
}

IntegralImage::IntegralImage(const GrayImage& img, bool squared)
    : width_(img.width()), height_(img.height()),
      sums_(static_cast<std::size_t>(img.width()) * img.height(), 0.0) {
    // ii(x,y) = p(x,y) + ii(x-1,y) + ii(x,y-1) - ii(x-1,y-1)
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            const double p = squared ? img.at(x, y) * img.at(x, y) : img.at(x, y);
            const double left = x > 0 ? sum(x - 1, y) : 0.0;
            const double up = y > 0 ? sum(x, y - 1) : 0.0;
            const double diag = (x > 0 && y > 0) ? sum(x - 1, y - 1) : 0.0;
            sums_[static_cast<std::size_t>(y) * width_ + x] = p + left + up - diag;
        }
    }
}

double IntegralImage::rect_sum(const Rect& r) const {
    if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x + r.w > width_ || r.y + r.h > height_)
        fail(ErrorCode::Argument, "rect_sum: rectangle outside integral image");
    const int x0 = r.x - 1, y0 = r.y - 1;
    const int x1 = r.x + r.w - 1, y1 = r.y + r.h - 1;
    const double a = (x0 >= 0 && y0 >= 0) ? sum(x0, y0) : 0.0;
    const double b = y0 >= 0 ? sum(x1, y0) : 0.0;
    const double c = x0 >= 0 ? sum(x0, y1) : 0.0;
    return sum(x1, y1) - b - c + a;
}

namespace {

double luma(double r, double g, double b) {
    if (r == g && g == b) return r;
    return std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 255.0);
}

bool is_png(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return bytes.size() >= 8 && std::equal(sig, sig + 8, bytes.begin());
}

bool is_jpeg(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

GrayImage decode_png(std::span<const std::uint8_t> bytes, const std::string& name) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        fail(ErrorCode::Decode, name + ": malformed PNG: " + image.message);
    // Gray files are read as gray so 8-bit values come back unchanged.
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        fail(ErrorCode::Decode, name + ": malformed PNG: " + msg);
    }
    const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = color ? luma(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]) : buf[i];
    return GrayImage(w, h, std::move(px));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

void jpeg_silence(j_common_ptr, int) {}

GrayImage decode_jpeg(std::span<const std::uint8_t> bytes, const std::string& name) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_silence;

    // Everything that must survive the longjmp lives outside this frame's
    // automatic non-trivial objects.
    std::vector<std::uint8_t> rgb;
    int w = 0, h = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        fail(ErrorCode::Decode, name + ": malformed JPEG: " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    std::vector<double> px(static_cast<std::size_t>(w) * h);
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = luma(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
    return GrayImage(w, h, std::move(px));
}

}  // namespace

GrayImage decode_to_gray(std::span<const std::uint8_t> bytes, const std::string& name) {
    if (is_png(bytes)) return decode_png(bytes, name);
    if (is_jpeg(bytes)) return decode_jpeg(bytes, name);
    fail(ErrorCode::Decode, name + ": not a PNG or JPEG payload");
}

GrayImage load_gray(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, path.string() + ": cannot open");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_to_gray(bytes, path.string());
}

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
    require(out_w >= 1 && out_h >= 1, "resize: target dimensions must be >= 1");
    require(!img.empty(), "resize: empty source image");
    if (out_w == img.width() && out_h == img.height()) return img;

    const double sx = static_cast<double>(img.width()) / out_w;
    const double sy = static_cast<double>(img.height()) / out_h;
    GrayImage out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double ty = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double tx = fx - x0;
            const double top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
            const double bottom = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
            out.at(x, y) = top * (1.0 - ty) + bottom * ty;
        }
    }
    return out;
}

FeatureVector flatten(const GrayImage& img, std::string provenance) {
    return {std::vector<double>(img.pixels().begin(), img.pixels().end()), std::move(provenance)};
}

GrayImage reshape(const FeatureVector& v, int width, int height) {
    return GrayImage(width, height, v.values);
}

GrayImage quantize8(const GrayImage& img) {
    std::vector<double> px(img.pixels().begin(), img.pixels().end());
    for (double& p : px) p = std::clamp(std::round(p), 0.0, 255.0);
    return GrayImage(img.width(), img.height(), std::move(px));
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
    require(!img.empty(), "encode_png: empty image");
    std::vector<std::uint8_t> gray(img.pixels().size());
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = static_cast<std::uint8_t>(std::clamp(std::round(img.pixels()[i]), 0.0, 255.0));

    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, gray.data(), 0, nullptr))
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, gray.data(), 0, nullptr))
        fail(ErrorCode::Io, std::string("PNG encode failed: ") + image.message);
    out.resize(size);
    return out;
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, path.string() + ": cannot write");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, path.string() + ": write failed");
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) fail(ErrorCode::Io, dir.string() + ": not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace faceclust
