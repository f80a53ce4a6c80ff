#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "faceclust/error.hpp"
#include "faceclust/haar.hpp"
#include "faceclust/serialize.hpp"
#include "support.hpp"
#include "synth/synth.hpp"

using namespace faceclust;

namespace {

// Per-pixel evaluation straight from the band layout, no integral image.
double naive_haar(const GrayImage& img, const HaarFeature& f, const Rect& window, double scale) {
    const int hb = horizontal_bands(f.kind), vb = vertical_bands(f.kind);
    const int ox = window.x + static_cast<int>(std::floor(f.x * scale));
    const int oy = window.y + static_cast<int>(std::floor(f.y * scale));
    const int bw = static_cast<int>(std::floor((f.w / hb) * scale));
    const int bh = static_cast<int>(std::floor((f.h / vb) * scale));
    double dark = 0, light = 0, nd = 0, nl = 0;
    for (int row = 0; row < vb; ++row)
        for (int col = 0; col < hb; ++col) {
            bool is_dark = false;
            switch (f.kind) {
                case HaarKind::TwoRectHorizontal:
                case HaarKind::TwoRectVertical: is_dark = row == 0 && col == 0; break;
                case HaarKind::ThreeRectHorizontal: is_dark = col == 1; break;
                case HaarKind::ThreeRectVertical: is_dark = row == 1; break;
                case HaarKind::FourRectChecker: is_dark = row == col; break;
            }
            for (int y = oy + row * bh; y < oy + (row + 1) * bh; ++y)
                for (int x = ox + col * bw; x < ox + (col + 1) * bw; ++x) {
                    (is_dark ? dark : light) += img.at(x, y);
                    (is_dark ? nd : nl) += 1;
                }
        }
    return dark / nd - light / nl;
}

// Closed-form count: every origin times every band size that fits.
std::size_t counted_features(int base) {
    std::size_t total = 0;
    for (HaarKind k : kAllHaarKinds) {
        const int hb = horizontal_bands(k), vb = vertical_bands(k);
        for (int y = 0; y < base; ++y)
            for (int x = 0; x < base; ++x) total += static_cast<std::size_t>((base - x) / hb) * ((base - y) / vb);
    }
    return total;
}

std::vector<GrayImage> windows(std::size_t n, bool faces, Rng& rng) {
    std::vector<GrayImage> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(faces ? synth::face_window(kBaseWindow, rng) : synth::nonface_window(kBaseWindow, rng));
    return out;
}

}  // namespace

TEST_CASE("feature enumeration count at 24x24 is the classic 162336") {
    const auto all = enumerate_features(24, 1, 1, kAllHaarKinds);
    CHECK(all.size() == 162336);
    CHECK(all.size() == counted_features(24));
    CHECK(enumerate_features(10, 1, 1, kAllHaarKinds).size() == counted_features(10));
}

TEST_CASE("feature enumeration order and strides") {
    const auto f = enumerate_features(24, 1, 1, kAllHaarKinds);
    CHECK(f.front() == HaarFeature{HaarKind::TwoRectHorizontal, 0, 0, 2, 1});
    CHECK(f[1] == HaarFeature{HaarKind::TwoRectHorizontal, 0, 0, 4, 1});
    const auto strided = enumerate_features(24, 2, 2, kAllHaarKinds);
    CHECK(strided.size() < f.size());
    for (const auto& s : strided) {
        CHECK(s.x % 2 == 0);
        CHECK(s.y % 2 == 0);
        CHECK(std::find(f.begin(), f.end(), s) != f.end());
    }
    CHECK_THROWS_AS(enumerate_features(24, 0, 1, kAllHaarKinds), Error);
}

TEST_CASE("every enumerated feature fits the base window") {
    for (const auto& f : enumerate_features(24, 1, 1, kAllHaarKinds)) {
        REQUIRE(f.x + f.w <= 24);
        REQUIRE(f.y + f.h <= 24);
        REQUIRE(f.w % horizontal_bands(f.kind) == 0);
        REQUIRE(f.h % vertical_bands(f.kind) == 0);
    }
}

TEST_CASE("haar value: dark band conventions on hand images") {
    // Left column dark (0), right column light (100).
    GrayImage img(2, 1, std::vector<double>{0, 100});
    const IntegralImage ii(img);
    CHECK(haar_value(ii, {HaarKind::TwoRectHorizontal, 0, 0, 2, 1}, {0, 0, 2, 1}, 1.0) == -100.0);
    GrayImage mid(3, 1, std::vector<double>{100, 10, 100});
    CHECK(haar_value(IntegralImage(mid), {HaarKind::ThreeRectHorizontal, 0, 0, 3, 1}, {0, 0, 3, 1}, 1.0) == -90.0);
    GrayImage checker(2, 2, std::vector<double>{10, 50, 50, 10});
    CHECK(haar_value(IntegralImage(checker), {HaarKind::FourRectChecker, 0, 0, 2, 2}, {0, 0, 2, 2}, 1.0) == -40.0);
    GrayImage vert(1, 2, std::vector<double>{30, 70});
    CHECK(haar_value(IntegralImage(vert), {HaarKind::TwoRectVertical, 0, 0, 1, 2}, {0, 0, 1, 2}, 1.0) == -40.0);
}

TEST_CASE("haar value agrees with the pixel loop at several scales") {
    Rng rng(21);
    const auto features = enumerate_features(24, 1, 1, kAllHaarKinds);
    for (int trial = 0; trial < 300; ++trial) {
        const double scale = std::pow(1.25, static_cast<double>(rng.index(5)));
        const int side = static_cast<int>(std::floor(24 * scale + 1e-9));
        const GrayImage img = testing::random_image(side + 7, side + 5, rng);
        const IntegralImage ii(img);
        const Rect window{static_cast<int>(rng.index(8)), static_cast<int>(rng.index(6)), side, side};
        const HaarFeature& f = features[rng.index(features.size())];
        CHECK(haar_value(ii, f, window, scale) == doctest::Approx(naive_haar(img, f, window, scale)).epsilon(1e-12));
    }
}

TEST_CASE("uniform image gives zero feature response") {
    const IntegralImage ii(GrayImage(24, 24, 128.0));
    for (const auto& f : enumerate_features(24, 3, 3, kAllHaarKinds)) REQUIRE(haar_value(ii, f, {0, 0, 24, 24}, 1.0) == 0.0);
}

TEST_CASE("scaled footprint outside the window is rejected") {
    const IntegralImage ii(GrayImage(30, 30, 1.0));
    CHECK_THROWS_AS(haar_value(ii, {HaarKind::TwoRectHorizontal, 20, 0, 4, 1}, {0, 0, 24, 24}, 0.5), Error);
}

TEST_CASE("stump: minimal weighted error matches exhaustive search") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.index(12);
        std::vector<double> values(n), weights(n);
        std::vector<SampleLabel> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            values[i] = static_cast<double>(rng.index(6));
            weights[i] = rng.uniform(0.1, 1.0);
            labels[i] = i % 2 ? SampleLabel::Face : SampleLabel::NonFace;
        }
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (double& w : weights) w /= total;

        double best = std::numeric_limits<double>::infinity();
        for (double t = -1.0; t <= 6.0; t += 0.25)
            for (int p : {1, -1}) {
                double err = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    if (stump_predicts_face(values[i], t, p) != (labels[i] == SampleLabel::Face)) err += weights[i];
                best = std::min(best, err);
            }
        const StumpFit fit = train_stump(values, labels, weights);
        CHECK(fit.error == doctest::Approx(best).epsilon(1e-12));
        double check = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (stump_predicts_face(values[i], fit.threshold, fit.polarity) != (labels[i] == SampleLabel::Face))
                check += weights[i];
        CHECK(check == doctest::Approx(fit.error).epsilon(1e-12));
    }
}

TEST_CASE("stump separating hand example") {
    const std::vector<double> values{1, 2, 3, 4};
    const std::vector<SampleLabel> labels{SampleLabel::NonFace, SampleLabel::NonFace, SampleLabel::Face, SampleLabel::Face};
    const std::vector<double> weights(4, 0.25);
    const StumpFit fit = train_stump(values, labels, weights);
    CHECK(fit.error == 0.0);
    CHECK(fit.polarity == 1);
    CHECK(fit.threshold == 2.5);
}

TEST_CASE("stump errors") {
    const std::vector<double> v{1, 2};
    const std::vector<double> w{0.5, 0.5};
    CHECK_THROWS_AS(train_stump(v, std::vector<SampleLabel>{SampleLabel::Face, SampleLabel::Face}, w), Error);
    CHECK_THROWS_AS(train_stump(v, std::vector<SampleLabel>{SampleLabel::Face, SampleLabel::NonFace},
                                std::vector<double>{0.5, 0.2}),
                    Error);
}

TEST_CASE("adaboost keeps a normalized positive weight distribution") {
    Rng rng(8);
    auto imgs = windows(60, true, rng);
    auto neg = windows(60, false, rng);
    imgs.insert(imgs.end(), neg.begin(), neg.end());
    std::vector<SampleLabel> labels(60, SampleLabel::Face);
    labels.resize(120, SampleLabel::NonFace);
    const TrainingSet set(imgs, labels, false);
    const auto features = enumerate_features(24, 4, 4, kAllHaarKinds);
    const AdaBoostResult r = adaboost_train(set, features, 8);
    REQUIRE(r.classifier.weak.size() == 8);
    for (double s : r.weight_sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    for (double m : r.min_weights) CHECK(m > 0.0);
    for (double e : r.round_errors) CHECK(e < 0.5);
    for (const auto& w : r.classifier.weak) CHECK(w.alpha > 0.0);
}

TEST_CASE("adaboost stalls on indistinguishable classes") {
    std::vector<GrayImage> imgs(4, GrayImage(24, 24, 50.0));
    const TrainingSet set(imgs, {SampleLabel::Face, SampleLabel::Face, SampleLabel::NonFace, SampleLabel::NonFace}, false);
    try {
        adaboost_train(set, enumerate_features(24, 6, 6, kAllHaarKinds), 1);
        FAIL("expected BoostingStalled");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BoostingStalled);
    }
}

TEST_CASE("stage threshold keeps the requested share of positives") {
    CHECK(stage_threshold_for({5, 1, 3, 2, 4}, 1.0) == 1.0);
    CHECK(stage_threshold_for({5, 1, 3, 2, 4}, 0.8) == 1.0);
    CHECK(stage_threshold_for({5, 1, 3, 2, 4}, 0.6) == 2.0);
    std::vector<double> hundred(100);
    std::iota(hundred.begin(), hundred.end(), 0.0);
    CHECK(stage_threshold_for(hundred, 0.99) == 0.0);
    CHECK(stage_threshold_for(hundred, 0.95) == 4.0);
}

TEST_CASE("cascade training requires enough samples") {
    Rng rng(1);
    const auto pos = windows(19, true, rng);
    const auto neg = windows(30, false, rng);
    try {
        train_cascade(pos, neg, {});
        FAIL("expected InsufficientData");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientData);
    }
}

TEST_CASE("cascade training meets its per-stage goals and is deterministic") {
    Rng rng(12);
    const auto pos = windows(80, true, rng);
    const auto neg = windows(240, false, rng);
    CascadeGoals goals;
    goals.position_stride = 3;
    goals.size_stride = 3;
    const Cascade a = train_cascade(pos, neg, goals);
    REQUIRE(!a.stages.empty());
    REQUIRE(a.training.stages.size() == a.stages.size());
    for (const auto& r : a.training.stages) {
        CHECK(r.detection_rate >= goals.min_detection_rate);
        CHECK(r.false_positive_rate <= goals.max_false_positive_rate);
    }
    for (std::size_t s = 1; s < a.training.stages.size(); ++s)
        CHECK(a.training.stages[s].negatives_in < a.training.stages[s - 1].negatives_in);
    const Cascade b = train_cascade(pos, neg, goals);
    CHECK(a == b);
    CHECK(to_json(a) == to_json(b));

    std::size_t accepted = 0;
    for (const auto& p : pos) accepted += a.accepts(p);
    CHECK(static_cast<double>(accepted) / pos.size() >= 0.95);
}

TEST_CASE("unreachable stage goals fail with a stage report") {
    Rng rng(13);
    // Same distribution on both sides: no stump separates them.
    std::vector<GrayImage> pos, neg;
    for (int i = 0; i < 30; ++i) pos.push_back(testing::random_image(24, 24, rng));
    for (int i = 0; i < 30; ++i) neg.push_back(testing::random_image(24, 24, rng));
    CascadeGoals goals;
    goals.max_false_positive_rate = 0.01;
    goals.max_weak_per_stage = 2;
    goals.position_stride = 6;
    goals.size_stride = 6;
    try {
        train_cascade(pos, neg, goals);
        FAIL("expected TrainingFailure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TrainingFailure);
        CHECK(std::string(e.what()).find("stage 0") != std::string::npos);
    }
}

TEST_CASE("grouping merges overlapping hits and filters by neighbors") {
    ScanParams p;
    p.min_neighbors = 2;
    std::vector<Detection> raw{{{10, 10, 24, 24}, 1.0, 0.5, 1},
                               {{12, 10, 24, 24}, 1.0, 0.9, 1},
                               {{80, 80, 24, 24}, 1.0, 2.0, 1}};
    const auto g = group_detections(raw, p, 200, 200);
    REQUIRE(g.size() == 1);
    CHECK(g[0].box == Rect{11, 10, 24, 24});
    CHECK(g[0].neighbors == 2);
    CHECK(g[0].score == 0.9);

    p.min_neighbors = 0;
    const auto all = group_detections(raw, p, 200, 200);
    REQUIRE(all.size() == 2);
    CHECK(all[0].score == 2.0);
    p.min_neighbors = 3;
    CHECK(group_detections(raw, p, 200, 200).empty());
}

TEST_CASE("grouped box is the neighbor-weighted mean") {
    ScanParams p;
    p.min_neighbors = 0;
    const auto g = group_detections({{{0, 0, 20, 20}, 1.0, 0.0, 3}, {{4, 0, 20, 20}, 1.0, 0.0, 1}}, p, 100, 100);
    REQUIRE(g.size() == 1);
    CHECK(g[0].box.x == 1);
    CHECK(g[0].neighbors == 4);
}

TEST_CASE("detection: planted faces, determinism across jobs, uniform images") {
    Rng rng(30);
    const auto pos = windows(150, true, rng);
    const auto neg = windows(600, false, rng);
    const Cascade cascade = train_cascade(pos, neg, {});

    ScanParams params;
    params.min_neighbors = 1;
    std::size_t found = 0;
    for (int i = 0; i < 12; ++i) {
        const auto scene = synth::planted_scene(120, 120, i % synth::kTemplates, rng);
        const auto d1 = detect(cascade, scene.image, params, 1);
        const auto d3 = detect(cascade, scene.image, params, 3);
        CHECK(d1 == d3);
        const auto best = largest_detection(d1);
        if (best && iou(best->box, scene.face) >= 0.5) ++found;
        for (const auto& d : d1) {
            CHECK(d.neighbors >= 1);
            CHECK(d.box.x >= 0);
            CHECK(d.box.x + d.box.w <= 120);
        }
        ScanParams none = params;
        none.min_neighbors = 0;
        ScanParams three = params;
        three.min_neighbors = 3;
        CHECK(detect(cascade, scene.image, none).size() >= detect(cascade, scene.image, three).size());
    }
    CHECK(found >= 10);
    CHECK(detect(cascade, GrayImage(100, 100, 128.0), params).empty());
    CHECK(detect(cascade, GrayImage(10, 10, 128.0), params).empty());

    const Cascade reloaded = cascade_from_json(to_json(cascade));
    CHECK(reloaded == cascade);
    const auto scene = synth::planted_scene(120, 120, 1, rng);
    CHECK(detect(reloaded, scene.image, params) == detect(cascade, scene.image, params));
}

TEST_CASE("scan parameters are validated") {
    const Cascade empty;
    ScanParams p;
    p.scale_factor = 1.0;
    CHECK_THROWS_AS(scan_windows(empty, GrayImage(30, 30), p), Error);
    p = {};
    p.step_fraction = 0.0;
    CHECK_THROWS_AS(scan_windows(empty, GrayImage(30, 30), p), Error);
    p = {};
    p.iou_merge_threshold = 1.0;
    CHECK_THROWS_AS(scan_windows(empty, GrayImage(30, 30), p), Error);
}

TEST_CASE("largest detection and face extraction") {
    const GrayImage img(100, 100, 9.0);
    CHECK(!extract_face(img, {}).has_value());
    const std::vector<Detection> d{{{0, 0, 30, 30}, 1.0, 5.0, 1}, {{40, 40, 50, 50}, 1.0, 1.0, 1}};
    CHECK(largest_detection(d)->box == Rect{40, 40, 50, 50});
    const auto face = extract_face(img, d);
    REQUIRE(face.has_value());
    CHECK(face->width() == kFaceSize);
    CHECK(face->height() == kFaceSize);
}

TEST_CASE("variance normalization is recorded and round-trips") {
    Rng rng(40);
    const auto pos = windows(40, true, rng);
    const auto neg = windows(80, false, rng);
    CascadeGoals goals;
    goals.variance_normalization = true;
    goals.position_stride = 4;
    goals.size_stride = 4;
    const Cascade c = train_cascade(pos, neg, goals);
    CHECK(c.variance_normalization);
    CHECK(cascade_from_json(to_json(c)) == c);
}

TEST_CASE("malformed cascade files are rejected") {
    CHECK_THROWS_AS(cascade_from_json("{}"), Error);
    CHECK_THROWS_AS(cascade_from_json("not json"), Error);
    CHECK_THROWS_AS(cascade_from_json(R"({"schema_version": 99})"), Error);
    CHECK_THROWS_AS(cascade_from_json(R"({"schema_version":1,"base_window":24,"variance_normalization":false,
        "stages":[{"threshold":1,"weak":[{"kind":"bogus","x":0,"y":0,"w":2,"h":1,"threshold":0,"polarity":1,"alpha":1}]}],
        "training_metadata":{}})"),
                    Error);
}
