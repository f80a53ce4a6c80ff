#include <doctest.h>

#include <csetjmp>
#include <cstdio>
#include <fstream>

#include <jpeglib.h>

#include "faceclust/error.hpp"
#include "faceclust/imaging.hpp"
#include "faceclust/io.hpp"
#include "support.hpp"

using namespace faceclust;

namespace {

double naive_sum(const GrayImage& img, const Rect& r) {
    double s = 0.0;
    for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x) s += img.at(x, y);
    return s;
}

std::vector<std::uint8_t> encode_rgb_jpeg(int w, int h, const std::vector<std::uint8_t>& rgb, int quality) {
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    unsigned char* buf = nullptr;
    unsigned long size = 0;
    jpeg_mem_dest(&cinfo, &buf, &size);
    cinfo.image_width = static_cast<JDIMENSION>(w);
    cinfo.image_height = static_cast<JDIMENSION>(h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(rgb.data() + cinfo.next_scanline * 3 * static_cast<std::size_t>(w));
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<std::uint8_t> out(buf, buf + size);
    jpeg_destroy_compress(&cinfo);
    std::free(buf);
    return out;
}

}  // namespace

TEST_CASE("rect_sum matches a double loop on random images") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 1 + static_cast<int>(rng.index(40)), h = 1 + static_cast<int>(rng.index(40));
        const GrayImage img = testing::random_image(w, h, rng);
        const IntegralImage ii(img);
        for (int q = 0; q < 10; ++q) {
            const int x = static_cast<int>(rng.index(static_cast<std::size_t>(w)));
            const int y = static_cast<int>(rng.index(static_cast<std::size_t>(h)));
            const Rect r{x, y, 1 + static_cast<int>(rng.index(static_cast<std::size_t>(w - x))),
                         1 + static_cast<int>(rng.index(static_cast<std::size_t>(h - y)))};
            CHECK(ii.rect_sum(r) == naive_sum(img, r));
        }
    }
}

TEST_CASE("integral image entries are monotone for nonnegative input") {
    Rng rng(3);
    const GrayImage img = testing::random_image(17, 9, rng);
    const IntegralImage ii(img);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 17; ++x) {
            if (x > 0) CHECK(ii.sum(x, y) >= ii.sum(x - 1, y));
            if (y > 0) CHECK(ii.sum(x, y) >= ii.sum(x, y - 1));
        }
    CHECK(ii.sum(16, 8) == naive_sum(img, {0, 0, 17, 9}));
}

TEST_CASE("integral image of a tiny hand example") {
    const GrayImage img(2, 2, std::vector<double>{1, 2, 3, 4});
    const IntegralImage ii(img);
    CHECK(ii.sum(0, 0) == 1);
    CHECK(ii.sum(1, 0) == 3);
    CHECK(ii.sum(0, 1) == 4);
    CHECK(ii.sum(1, 1) == 10);
    CHECK(ii.rect_sum({1, 1, 1, 1}) == 4);
}

TEST_CASE("squared integral image sums squares") {
    const GrayImage img(2, 1, std::vector<double>{3, 4});
    CHECK(IntegralImage(img, true).rect_sum({0, 0, 2, 1}) == 25);
}

TEST_CASE("rect_sum rejects rectangles outside the image") {
    const IntegralImage ii(GrayImage(4, 4, 1.0));
    CHECK_THROWS_AS(ii.rect_sum({3, 3, 2, 1}), Error);
    CHECK_THROWS_AS(ii.rect_sum({-1, 0, 1, 1}), Error);
    CHECK_THROWS_AS(ii.rect_sum({0, 0, 0, 1}), Error);
}

TEST_CASE("iou") {
    CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
    CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == 0.0);
    CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
}

TEST_CASE("png round trip preserves 8-bit pixels") {
    Rng rng(5);
    const GrayImage img = testing::random_image(13, 7, rng);
    const auto bytes = encode_png(img);
    const GrayImage back = decode_to_gray(bytes, "roundtrip.png");
    CHECK(back == img);
    CHECK(encode_png(img) == bytes);
}

TEST_CASE("jpeg decodes to Rec.601 luma") {
    const int w = 16, h = 16;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
        rgb[i] = 200;
        rgb[i + 1] = 100;
        rgb[i + 2] = 50;
    }
    const GrayImage img = decode_to_gray(encode_rgb_jpeg(w, h, rgb, 100), "flat.jpg");
    CHECK(img.width() == w);
    CHECK(img.height() == h);
    const double expected = 0.299 * 200 + 0.587 * 100 + 0.114 * 50;
    for (double p : img.pixels()) CHECK(p == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("corrupt input names the file") {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8};
    try {
        decode_to_gray(junk, "broken.png");
        FAIL("expected a decode error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Decode);
        CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
    }
    auto png = encode_png(GrayImage(8, 8, 10.0));
    png.resize(png.size() / 2);
    CHECK_THROWS_AS(decode_to_gray(png, "truncated.png"), Error);
}

TEST_CASE("load_gray reports a missing file") {
    testing::TempDir dir("imaging_missing");
    try {
        load_gray(dir / "absent.png");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("absent.png") != std::string::npos);
    }
}

TEST_CASE("resize: identity, constant preservation and output shape") {
    Rng rng(9);
    const GrayImage img = testing::random_image(10, 6, rng);
    CHECK(resize_bilinear(img, 10, 6) == img);
    const GrayImage flat = resize_bilinear(GrayImage(31, 17, 77.0), 224, 224);
    CHECK(flat.width() == 224);
    CHECK(flat.height() == 224);
    for (double p : flat.pixels()) CHECK(p == doctest::Approx(77.0));
}

TEST_CASE("resize: 2x upsampling with center alignment") {
    const GrayImage img(2, 1, std::vector<double>{0, 100});
    const GrayImage up = resize_bilinear(img, 4, 1);
    // Output centers map to source x = -0.25, 0.25, 0.75, 1.25 (clamped).
    CHECK(up.at(0, 0) == doctest::Approx(0.0));
    CHECK(up.at(1, 0) == doctest::Approx(25.0));
    CHECK(up.at(2, 0) == doctest::Approx(75.0));
    CHECK(up.at(3, 0) == doctest::Approx(100.0));
}

TEST_CASE("resize: downsampling by 2 averages pixel pairs") {
    const GrayImage img(4, 1, std::vector<double>{0, 10, 20, 30});
    const GrayImage down = resize_bilinear(img, 2, 1);
    CHECK(down.at(0, 0) == doctest::Approx(5.0));
    CHECK(down.at(1, 0) == doctest::Approx(25.0));
}

TEST_CASE("flatten and reshape are inverse") {
    Rng rng(2);
    const GrayImage img = testing::random_image(5, 3, rng);
    const FeatureVector v = flatten(img, "x.png");
    CHECK(v.values.size() == 15);
    CHECK(v.provenance == "x.png");
    CHECK(v.values[5] == img.at(0, 1));
    CHECK(reshape(v, 5, 3) == img);
    CHECK_THROWS_AS(reshape(v, 4, 4), Error);
}

TEST_CASE("quantize8 rounds and clamps") {
    const GrayImage img(4, 1, std::vector<double>{-3.0, 1.4, 1.5, 300.0});
    const GrayImage q = quantize8(img);
    CHECK(q.at(0, 0) == 0.0);
    CHECK(q.at(1, 0) == 1.0);
    CHECK(q.at(2, 0) == 2.0);
    CHECK(q.at(3, 0) == 255.0);
}

TEST_CASE("crop extracts the rectangle") {
    const GrayImage img(3, 3, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8});
    const GrayImage c = img.crop({1, 1, 2, 2});
    CHECK(c == GrayImage(2, 2, std::vector<double>{4, 5, 7, 8}));
    CHECK_THROWS_AS(img.crop({2, 2, 2, 2}), Error);
}

TEST_CASE("list_images filters by extension and sorts") {
    testing::TempDir dir("imaging_list");
    for (const char* name : {"b.PNG", "a.jpg", "c.jpeg", "notes.txt", "d.gif"})
        write_file_atomic(dir / name, "x");
    std::filesystem::create_directories(dir / "sub.png");
    const auto files = list_images(dir.path());
    REQUIRE(files.size() == 3);
    CHECK(files[0].filename() == "a.jpg");
    CHECK(files[1].filename() == "b.PNG");
    CHECK(files[2].filename() == "c.jpeg");
}
