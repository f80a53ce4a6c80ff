// Writes synthetic corpora for demos and end-to-end tests.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "faceclust/error.hpp"
#include "faceclust/io.hpp"
#include "synth/synth.hpp"

namespace fs = std::filesystem;
using namespace faceclust;

namespace {

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04zu.png", prefix, i);
    return buf;
}

void write_windows(const fs::path& dir, std::size_t positives, std::size_t negatives, int size, std::uint64_t seed) {
    fs::create_directories(dir / "positives");
    fs::create_directories(dir / "negatives");
    Rng rng(seed);
    for (std::size_t i = 0; i < positives; ++i)
        save_png(quantize8(synth::face_window(size, rng)), dir / "positives" / numbered("pos", i));
    for (std::size_t i = 0; i < negatives; ++i)
        save_png(quantize8(synth::nonface_window(size, rng)), dir / "negatives" / numbered("neg", i));
}

void write_scenes(const fs::path& dir, std::size_t per_identity, int width, int height, std::uint64_t seed) {
    fs::create_directories(dir);
    Rng rng(seed);
    std::ostringstream truth;
    truth << "path,identity,x,y,w,h\n";
    const std::size_t total = per_identity * synth::kTemplates;
    for (std::size_t i = 0; i < total; ++i) {
        const int t = static_cast<int>(i % synth::kTemplates);
        const auto scene = synth::planted_scene(width, height, t, rng);
        const std::string name = numbered("scene", i);
        save_png(quantize8(scene.image), dir / name);
        truth << name << ',' << t << ',' << scene.face.x << ',' << scene.face.y << ',' << scene.face.w << ','
              << scene.face.h << '\n';
    }
    write_file_atomic(dir / "truth.csv", truth.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic corpus generator", "faceclust-synth"};
    app.require_subcommand(1);

    std::string out;
    std::uint64_t seed = 0;
    std::size_t positives = 200, negatives = 400;
    int size = 24;
    auto* windows = app.add_subcommand("windows", "face and non-face training windows");
    windows->add_option("dir", out, "output directory")->required();
    windows->add_option("--positives", positives, "face windows")->capture_default_str();
    windows->add_option("--negatives", negatives, "non-face windows")->capture_default_str();
    windows->add_option("--size", size, "window side")->capture_default_str();
    windows->add_option("--seed", seed, "seed")->capture_default_str();

    std::size_t per_identity = 30;
    int width = 128, height = 128;
    auto* scenes = app.add_subcommand("scenes", "scenes with one planted face each, plus truth.csv");
    scenes->add_option("dir", out, "output directory")->required();
    scenes->add_option("--per-identity", per_identity, "scenes per face identity")->capture_default_str();
    scenes->add_option("--width", width, "scene width")->capture_default_str();
    scenes->add_option("--height", height, "scene height")->capture_default_str();
    scenes->add_option("--seed", seed, "seed")->capture_default_str();

    std::string blank_path;
    int level = 128;
    auto* blank = app.add_subcommand("blank", "one uniform gray image");
    blank->add_option("path", blank_path, "output PNG")->required();
    blank->add_option("--width", width, "image width")->capture_default_str();
    blank->add_option("--height", height, "image height")->capture_default_str();
    blank->add_option("--value", level, "gray level")->check(CLI::Range(0, 255))->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*windows) write_windows(out, positives, negatives, size, seed);
        if (*scenes) write_scenes(out, per_identity, width, height, seed);
        if (*blank) save_png(GrayImage(width, height, static_cast<double>(level)), blank_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
