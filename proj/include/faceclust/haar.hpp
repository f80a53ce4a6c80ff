#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faceclust/imaging.hpp"

namespace faceclust {

inline constexpr int kBaseWindow = 24;

// Band layout of each kind. The dark region is the first band of two-rect
// kinds, the middle band of three-rect kinds, and the main diagonal of the
// checker.
enum class HaarKind : std::uint8_t {
    TwoRectHorizontal,
    TwoRectVertical,
    ThreeRectHorizontal,
    ThreeRectVertical,
    FourRectChecker,
};

inline constexpr HaarKind kAllHaarKinds[] = {
    HaarKind::TwoRectHorizontal, HaarKind::TwoRectVertical, HaarKind::ThreeRectHorizontal,
    HaarKind::ThreeRectVertical, HaarKind::FourRectChecker};

int horizontal_bands(HaarKind kind);
int vertical_bands(HaarKind kind);
std::string_view kind_name(HaarKind kind);
HaarKind parse_kind(std::string_view name);

// Footprint in base-window coordinates.
struct HaarFeature {
    HaarKind kind = HaarKind::TwoRectHorizontal;
    int x = 0;
    int y = 0;
    int w = 2;
    int h = 1;

    bool operator==(const HaarFeature&) const = default;
};

struct HaarRegions {
    std::vector<Rect> dark;
    std::vector<Rect> light;
};

// Feature geometry placed in `window` at `scale`: origin floor(x*s), band
// extents floor(band*s). The scaled footprint never exceeds floor(base*s).
HaarRegions scaled_regions(const HaarFeature& f, const Rect& window, double scale);

// Ordered by kind, then y, x, h, w.
std::vector<HaarFeature> enumerate_features(int base_window, int position_stride, int size_stride,
                                            std::span<const HaarKind> kinds = kAllHaarKinds);

// mean(dark) - mean(light) over the scaled footprint.
double haar_value(const IntegralImage& ii, const HaarFeature& f, const Rect& window,
                  double window_scale);

enum class SampleLabel : std::uint8_t { NonFace = 0, Face = 1 };

struct StumpFit {
    double threshold = 0.0;
    int polarity = 1;
    double error = 0.0;
};

// polarity +1: face iff value >= threshold; polarity -1: face iff value < threshold.
inline bool stump_predicts_face(double value, double threshold, int polarity) {
    return polarity > 0 ? value >= threshold : value < threshold;
}

StumpFit train_stump(std::span<const double> values, std::span<const SampleLabel> labels,
                     std::span<const double> weights);

struct WeakClassifier {
    HaarFeature feature;
    double threshold = 0.0;
    int polarity = 1;
    double alpha = 0.0;

    bool predicts_face(double value) const { return stump_predicts_face(value, threshold, polarity); }
    bool operator==(const WeakClassifier&) const = default;
};

// Integral images of one scan target. `squared` is set only when variance
// normalization is in use.
struct WindowSource {
    const IntegralImage* ii = nullptr;
    const IntegralImage* squared = nullptr;
};

// Feature response with optional division by the window's standard deviation.
double window_feature_value(const WindowSource& src, const HaarFeature& f, const Rect& window,
                            double scale, bool variance_normalization);

struct StrongClassifier {
    std::vector<WeakClassifier> weak;

    double alpha_sum() const;
    double score(const WindowSource& src, const Rect& window, double scale, bool vn) const;
    // Classic boosted decision: score >= alpha_sum / 2.
    bool predicts_face(const WindowSource& src, const Rect& window, double scale, bool vn) const;
};

// Training samples: base-window-sized images with their integral images.
class TrainingSet {
public:
    TrainingSet(std::span<const GrayImage> images, std::vector<SampleLabel> labels,
                bool variance_normalization);

    std::size_t size() const noexcept { return labels_.size(); }
    int window() const noexcept { return window_; }
    bool variance_normalization() const noexcept { return vn_; }
    std::span<const SampleLabel> labels() const noexcept { return labels_; }
    WindowSource source(std::size_t i) const;
    double feature_value(std::size_t sample, const HaarFeature& f) const;

private:
    int window_ = kBaseWindow;
    bool vn_ = false;
    std::vector<IntegralImage> ii_;
    std::vector<IntegralImage> sq_;
    std::vector<SampleLabel> labels_;
};

// Precomputed feature responses over a sample subset, one row per feature,
// with each row's sort order cached for the stump sweep.
class FeatureTable {
public:
    FeatureTable(const TrainingSet& set, std::span<const std::size_t> samples,
                 std::vector<HaarFeature> features, int jobs = 1);

    std::size_t feature_count() const noexcept { return features_.size(); }
    std::size_t sample_count() const noexcept { return samples_.size(); }
    const HaarFeature& feature(std::size_t f) const { return features_[f]; }
    std::span<const double> values(std::size_t f) const;
    std::span<const std::uint32_t> order(std::size_t f) const;
    std::span<const SampleLabel> labels() const noexcept { return labels_; }

private:
    std::vector<std::size_t> samples_;
    std::vector<HaarFeature> features_;
    std::vector<SampleLabel> labels_;
    std::vector<double> values_;
    std::vector<std::uint32_t> order_;
};

struct BoostRound {
    WeakClassifier classifier;
    double error = 0.0;
    std::size_t feature_index = 0;
};

// Discrete AdaBoost, one round per step(). Initial weights are split evenly
// between the two classes.
class Booster {
public:
    explicit Booster(const FeatureTable& table);

    // Throws BoostingStalled when no stump reaches weighted error < 0.5.
    BoostRound step();

    std::span<const double> weights() const noexcept { return weights_; }
    const StrongClassifier& classifier() const noexcept { return strong_; }
    int rounds() const noexcept { return static_cast<int>(strong_.weak.size()); }
    // Strong-classifier scores over the table's samples, updated each round.
    std::span<const double> scores() const noexcept { return scores_; }

private:
    const FeatureTable& table_;
    std::vector<double> weights_;
    std::vector<double> scores_;
    StrongClassifier strong_;
};

struct AdaBoostResult {
    StrongClassifier classifier;
    std::vector<double> round_errors;
    std::vector<double> weight_sums;
    std::vector<double> min_weights;
    // Unweighted fraction of training samples misclassified after each round.
    std::vector<double> training_errors;
};

AdaBoostResult adaboost_train(const TrainingSet& set, std::span<const HaarFeature> features,
                              int rounds, int jobs = 1);

struct Stage {
    std::vector<WeakClassifier> weak;
    double threshold = 0.0;

    double score(const WindowSource& src, const Rect& window, double scale, bool vn) const;
    bool operator==(const Stage&) const = default;
};

struct StageReport {
    int weak_count = 0;
    std::size_t negatives_in = 0;
    double detection_rate = 0.0;
    double false_positive_rate = 0.0;
    bool operator==(const StageReport&) const = default;
};

struct CascadeMetadata {
    std::uint64_t seed = 0;
    int position_stride = 1;
    int size_stride = 1;
    std::size_t feature_count = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    double min_detection_rate = 0.99;
    double max_false_positive_rate = 0.5;
    std::vector<StageReport> stages;
    bool operator==(const CascadeMetadata&) const = default;
};

struct Cascade {
    int base_window = kBaseWindow;
    bool variance_normalization = false;
    std::vector<Stage> stages;
    CascadeMetadata training;

    // A window is a face iff every stage accepts it. On acceptance `margin`
    // receives the final-stage score minus its threshold.
    bool accepts(const WindowSource& src, const Rect& window, double scale,
                 double* margin = nullptr) const;
    bool accepts(const GrayImage& window_image) const;
    bool operator==(const Cascade&) const = default;
};

struct CascadeGoals {
    double min_detection_rate = 0.99;
    double max_false_positive_rate = 0.5;
    int max_stages = 10;
    int max_weak_per_stage = 100;
    int position_stride = 2;
    int size_stride = 2;
    bool variance_normalization = false;
    std::uint64_t seed = 0;
    int jobs = 1;
};

// Stage threshold: the ceil((1-d)*N)-th lowest positive score (at least the first).
double stage_threshold_for(std::vector<double> positive_scores, double min_detection_rate);

Cascade train_cascade(std::span<const GrayImage> positives, std::span<const GrayImage> negatives,
                      const CascadeGoals& goals);

struct ScanParams {
    double scale_factor = 1.25;
    double step_fraction = 1.0 / 12.0;
    int min_neighbors = 3;
    double iou_merge_threshold = 0.3;
};

void validate(const ScanParams& params);

struct Detection {
    Rect box;
    double scale = 1.0;
    double score = 0.0;
    int neighbors = 1;
    bool operator==(const Detection&) const = default;
};

// Every window accepted by the cascade, ordered by (scale, y, x).
std::vector<Detection> scan_windows(const Cascade& cascade, const GrayImage& img,
                                    const ScanParams& params, int jobs = 1);

// Union of hits connected by IoU >= threshold; box = neighbor-weighted member
// average, score = best member, neighbors = summed member neighbors. Sorted by
// descending score.
std::vector<Detection> group_detections(std::vector<Detection> raw, const ScanParams& params,
                                        int width, int height);

std::vector<Detection> detect(const Cascade& cascade, const GrayImage& img,
                              const ScanParams& params, int jobs = 1);

// Largest-area detection; ties go to the higher score, then the earlier entry.
std::optional<Detection> largest_detection(std::span<const Detection> detections);

// Crop of largest_detection() resized to 224x224.
std::optional<GrayImage> extract_face(const GrayImage& img, std::span<const Detection> detections);

}  // namespace faceclust
