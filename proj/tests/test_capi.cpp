// Exercises the shared library through its C header only. The synthetic
// generator is used for fixtures.
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "faceclust/faceclust.h"
#include "faceclust/io.hpp"
#include "support.hpp"
#include "synth/synth.hpp"

namespace fs = std::filesystem;

namespace {

// Takes ownership of a library string.
std::string take(char* s) {
    REQUIRE(s != nullptr);
    std::string out(s);
    fc_string_free(s);
    return out;
}

struct Config {
    fc_config* ptr = nullptr;
    Config() { REQUIRE(fc_config_create(&ptr) == FC_OK); }
    ~Config() { fc_config_destroy(ptr); }
    void set(const char* key, const std::string& value) {
        INFO(key);
        REQUIRE(fc_config_set(ptr, key, value.c_str()) == FC_OK);
    }
};

void write_fixtures(const fs::path& root) {
    faceclust::Rng rng(21);
    fs::create_directories(root / "pos");
    fs::create_directories(root / "neg");
    fs::create_directories(root / "scenes");
    for (int i = 0; i < 150; ++i)
        faceclust::save_png(faceclust::quantize8(faceclust::synth::face_window(24, rng)),
                            root / "pos" / ("p" + std::to_string(i) + ".png"));
    for (int i = 0; i < 600; ++i)
        faceclust::save_png(faceclust::quantize8(faceclust::synth::nonface_window(24, rng)),
                            root / "neg" / ("n" + std::to_string(i) + ".png"));
    for (int i = 0; i < 24; ++i) {
        const auto s = faceclust::synth::planted_scene(128, 128, i % faceclust::synth::kTemplates, rng);
        faceclust::save_png(faceclust::quantize8(s.image), root / "scenes" / ("s" + std::to_string(10 + i) + ".png"));
    }
}

}  // namespace

TEST_CASE("status names and exit codes") {
    CHECK(std::string(fc_version()) == "1.0.0");
    CHECK(std::string(fc_status_name(FC_OK)) == "ok");
    CHECK(std::string(fc_status_name(FC_ERR_NO_FACE)) == "no_face");
    CHECK(fc_exit_code(FC_OK) == 0);
    CHECK(fc_exit_code(FC_ERR_VALIDATION) == 1);
    CHECK(fc_exit_code(FC_ERR_ARGUMENT) == 1);
    CHECK(fc_exit_code(FC_ERR_DECODE) == 2);
    CHECK(fc_exit_code(FC_ERR_TRAINING_FAILURE) == 2);
    CHECK(fc_exit_code(FC_ERR_NO_FACE) == 3);
}

TEST_CASE("config through the C interface") {
    Config c;
    c.set("seed", "9");
    char* v = nullptr;
    REQUIRE(fc_config_get(c.ptr, "seed", &v) == FC_OK);
    CHECK(take(v) == "9");
    CHECK(fc_config_set(c.ptr, "bogus.key", "1") == FC_ERR_VALIDATION);
    CHECK(std::string(fc_last_error()).find("bogus.key") != std::string::npos);
    CHECK(fc_config_set(c.ptr, nullptr, "1") == FC_ERR_ARGUMENT);
    c.set("jobs", "0");
    CHECK(fc_config_validate(c.ptr) == FC_ERR_VALIDATION);
    c.set("jobs", "2");
    CHECK(fc_config_validate(c.ptr) == FC_OK);
    CHECK(std::string(fc_last_error()).empty());

    char* help = nullptr;
    REQUIRE(fc_config_help(&help) == FC_OK);
    CHECK(take(help).find("pca.variance_fraction") != std::string::npos);

    testing::TempDir dir("capi_config");
    faceclust::write_file_atomic(dir / "c.conf", "cluster.k_max = 6\n");
    REQUIRE(fc_config_load(c.ptr, (dir / "c.conf").c_str()) == FC_OK);
    REQUIRE(fc_config_get(c.ptr, "cluster.k_max", &v) == FC_OK);
    CHECK(take(v) == "6");
    CHECK(fc_config_load(c.ptr, (dir / "absent.conf").c_str()) == FC_ERR_VALIDATION);
}

TEST_CASE("image handles") {
    const std::vector<uint8_t> px{0, 10, 20, 30, 40, 50};
    fc_image* img = nullptr;
    REQUIRE(fc_image_from_gray(px.data(), 3, 2, &img) == FC_OK);
    int w = 0, h = 0;
    REQUIRE(fc_image_size(img, &w, &h) == FC_OK);
    CHECK(w == 3);
    CHECK(h == 2);
    fc_image_destroy(img);
    CHECK(fc_image_from_gray(px.data(), 0, 2, &img) == FC_ERR_ARGUMENT);
    CHECK(fc_image_load("/nonexistent/x.png", &img) != FC_OK);
    CHECK(std::string(fc_last_error()).find("x.png") != std::string::npos);
}

TEST_CASE("model loaders reject bad files") {
    testing::TempDir dir("capi_models");
    faceclust::write_file_atomic(dir / "bad.json", "{\"schema_version\": 1}");
    fc_pca* pca = nullptr;
    fc_kmeans* km = nullptr;
    fc_mlp* mlp = nullptr;
    fc_cascade* cascade = nullptr;
    CHECK(fc_pca_load((dir / "bad.json").c_str(), &pca) == FC_ERR_FORMAT);
    CHECK(fc_kmeans_load((dir / "bad.json").c_str(), &km) == FC_ERR_FORMAT);
    CHECK(fc_mlp_load((dir / "bad.json").c_str(), &mlp) == FC_ERR_FORMAT);
    CHECK(fc_cascade_load((dir / "bad.json").c_str(), &cascade) == FC_ERR_FORMAT);
    CHECK(fc_pca_load((dir / "absent.json").c_str(), &pca) == FC_ERR_IO);
}

TEST_CASE("full pipeline through the C interface") {
    testing::TempDir dir("capi_pipeline");
    write_fixtures(dir.path());
    Config c;
    c.set("work_dir", (dir / "work").string());
    c.set("positives_dir", (dir / "pos").string());
    c.set("negatives_dir", (dir / "neg").string());
    c.set("input_dir", (dir / "scenes").string());
    c.set("scan.min_neighbors", "1");
    c.set("seed", "3");

    char* summary = nullptr;
    REQUIRE(fc_train_cascade(c.ptr, &summary) == FC_OK);
    const auto cascade_summary = nlohmann::json::parse(take(summary));
    CHECK(cascade_summary["stages"].get<int>() >= 1);

    REQUIRE(fc_detect(c.ptr, &summary) == FC_OK);
    const auto det = nlohmann::json::parse(take(summary));
    CHECK(det["images"] == 24);
    CHECK(det["faces"].get<int>() >= 20);

    const fc_status cs = fc_cluster(c.ptr, &summary);
    REQUIRE_MESSAGE(cs == FC_OK, fc_last_error());
    const auto cl = nlohmann::json::parse(take(summary));
    const std::size_t k = cl["chosen_k"].get<std::size_t>();
    CHECK(k >= 2);
    CHECK(k <= 8);

    const fc_status ms = fc_train_mlp(c.ptr, &summary);
    REQUIRE_MESSAGE(ms == FC_OK, fc_last_error());
    const auto mlp_summary = nlohmann::json::parse(take(summary));
    CHECK(mlp_summary["accuracy"].get<double>() >= 0.5);

    char* text = nullptr;
    REQUIRE(fc_report(c.ptr, &text) == FC_OK);
    CHECK(take(text).find("chosen k=" + std::to_string(k)) != std::string::npos);

    // predict on a planted scene and on a blank image
    char* line = nullptr;
    const std::string scene = (dir / "scenes" / "s10.png").string();
    const fc_status ps = fc_predict(c.ptr, scene.c_str(), &line);
    const auto pred = nlohmann::json::parse(take(line));
    CHECK(pred["image"] == scene);
    if (ps == FC_OK) {
        CHECK(pred["face"] == true);
        CHECK(pred["probabilities"].size() == k);
    } else {
        CHECK(ps == FC_ERR_NO_FACE);
    }
    faceclust::save_png(faceclust::GrayImage(100, 100, 128.0), dir / "blank.png");
    CHECK(fc_predict(c.ptr, (dir / "blank.png").c_str(), &line) == FC_ERR_NO_FACE);
    CHECK(nlohmann::json::parse(take(line))["face"] == false);

    // Low-level handles agree with the pipeline outputs.
    fc_cascade* cascade = nullptr;
    REQUIRE(fc_cascade_load((dir / "work" / "cascade.json").c_str(), &cascade) == FC_OK);
    size_t stages = 0;
    REQUIRE(fc_cascade_stage_count(cascade, &stages) == FC_OK);
    CHECK(stages == cascade_summary["stages"].get<size_t>());
    fc_image* img = nullptr;
    REQUIRE(fc_image_load(scene.c_str(), &img) == FC_OK);
    fc_scan_params params;
    fc_scan_params_default(&params);
    CHECK(params.min_neighbors == 3);
    params.min_neighbors = 1;
    size_t count = 0;
    REQUIRE(fc_cascade_detect(cascade, img, &params, nullptr, 0, &count) == FC_OK);
    std::vector<fc_box> boxes(count);
    size_t again = 0;
    REQUIRE(fc_cascade_detect(cascade, img, &params, boxes.data(), boxes.size(), &again) == FC_OK);
    CHECK(again == count);
    if (ps == FC_OK) {
        bool found = false;
        for (const auto& b : boxes) found = found || (b.x == pred["box"]["x"] && b.w == pred["box"]["w"]);
        CHECK(found);
    }
    CHECK(fc_cascade_detect(cascade, img, &params, nullptr, 3, &count) == FC_ERR_ARGUMENT);
    fc_image_destroy(img);
    fc_cascade_destroy(cascade);

    fc_pca* pca = nullptr;
    fc_kmeans* km = nullptr;
    fc_mlp* mlp = nullptr;
    REQUIRE(fc_pca_load((dir / "work" / "pca.json").c_str(), &pca) == FC_OK);
    REQUIRE(fc_kmeans_load((dir / "work" / "kmeans.json").c_str(), &km) == FC_OK);
    REQUIRE(fc_mlp_load((dir / "work" / "mlp.json").c_str(), &mlp) == FC_OK);
    size_t d = 0, r = 0;
    REQUIRE(fc_pca_dims(pca, &d, &r) == FC_OK);
    CHECK(d == 224u * 224u);
    CHECK(r >= 1);

    // Every training crop: the MLP agrees with its k-means assignment.
    const std::string assignments = faceclust::read_file(dir / "work" / "assignments.csv");
    std::istringstream in(assignments);
    std::string row;
    std::getline(in, row);
    std::size_t rows = 0, agree = 0;
    while (std::getline(in, row)) {
        const auto comma = row.find(',');
        const std::string name = row.substr(0, comma);
        const std::size_t label = std::stoul(row.substr(comma + 1));
        fc_image* face = nullptr;
        REQUIRE(fc_image_load((dir / "work" / "faces" / name).c_str(), &face) == FC_OK);
        const auto pixels = faceclust::load_gray(dir / "work" / "faces" / name).pixels();
        fc_image_destroy(face);
        std::vector<double> scores(r);
        REQUIRE(fc_pca_project(pca, pixels.data(), d, scores.data(), r) == FC_OK);
        size_t cluster = 99;
        double dist = -1;
        REQUIRE(fc_kmeans_assign(km, scores.data(), r, &cluster, &dist) == FC_OK);
        CHECK(cluster == label);
        CHECK(dist >= 0.0);
        std::vector<double> probs(k);
        size_t mlp_cluster = 99;
        REQUIRE(fc_mlp_predict(mlp, scores.data(), r, probs.data(), probs.size(), &mlp_cluster) == FC_OK);
        double total = 0;
        for (double p : probs) total += p;
        CHECK(total == doctest::Approx(1.0));
        agree += mlp_cluster == label;
        ++rows;
    }
    CHECK(rows == det["faces"].get<size_t>());
    CHECK(static_cast<double>(agree) / rows >= 0.9);
    std::vector<double> wrong(r + 1);
    size_t cluster = 0;
    CHECK(fc_kmeans_assign(km, wrong.data(), r + 1, &cluster, nullptr) == FC_ERR_ARGUMENT);
    CHECK(fc_pca_project(pca, wrong.data(), 3, wrong.data(), r) == FC_ERR_ARGUMENT);
    fc_pca_destroy(pca);
    fc_kmeans_destroy(km);
    fc_mlp_destroy(mlp);
}

TEST_CASE("detect reports unreadable images but still summarizes") {
    testing::TempDir dir("capi_decode");
    fs::create_directories(dir / "in");
    faceclust::write_file_atomic(dir / "in" / "junk.png", "junk");
    faceclust::save_png(faceclust::GrayImage(64, 64, 90.0), dir / "in" / "flat.png");
    Config c;
    c.set("input_dir", (dir / "in").string());
    c.set("work_dir", (dir / "work").string());
    CHECK(fc_detect(c.ptr, nullptr) == FC_ERR_VALIDATION);  // no cascade yet

    faceclust::Rng rng(1);
    fs::create_directories(dir / "pos");
    fs::create_directories(dir / "neg");
    for (int i = 0; i < 40; ++i) {
        faceclust::save_png(faceclust::quantize8(faceclust::synth::face_window(24, rng)),
                            dir / "pos" / (std::to_string(i) + ".png"));
        faceclust::save_png(faceclust::quantize8(faceclust::synth::nonface_window(24, rng)),
                            dir / "neg" / (std::to_string(i) + ".png"));
    }
    c.set("positives_dir", (dir / "pos").string());
    c.set("negatives_dir", (dir / "neg").string());
    c.set("cascade.position_stride", "4");
    c.set("cascade.size_stride", "4");
    REQUIRE(fc_train_cascade(c.ptr, nullptr) == FC_OK);
    char* summary = nullptr;
    CHECK(fc_detect(c.ptr, &summary) == FC_ERR_DECODE);
    const auto j = nlohmann::json::parse(take(summary));
    CHECK(j["images"] == 2);
    CHECK(j["unreadable"] == 1);
    CHECK(fc_exit_code(FC_ERR_DECODE) == 2);
}
