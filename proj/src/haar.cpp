#include "faceclust/haar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "faceclust/error.hpp"
#include "parallel.hpp"

namespace faceclust {

int horizontal_bands(HaarKind kind) {
    switch (kind) {
        case HaarKind::TwoRectHorizontal: return 2;
        case HaarKind::TwoRectVertical: return 1;
        case HaarKind::ThreeRectHorizontal: return 3;
        case HaarKind::ThreeRectVertical: return 1;
        case HaarKind::FourRectChecker: return 2;
    }
    return 1;
}

int vertical_bands(HaarKind kind) {
    switch (kind) {
        case HaarKind::TwoRectHorizontal: return 1;
        case HaarKind::TwoRectVertical: return 2;
        case HaarKind::ThreeRectHorizontal: return 1;
        case HaarKind::ThreeRectVertical: return 3;
        case HaarKind::FourRectChecker: return 2;
    }
    return 1;
}

std::string_view kind_name(HaarKind kind) {
    switch (kind) {
        case HaarKind::TwoRectHorizontal: return "two_rect_horizontal";
        case HaarKind::TwoRectVertical: return "two_rect_vertical";
        case HaarKind::ThreeRectHorizontal: return "three_rect_horizontal";
        case HaarKind::ThreeRectVertical: return "three_rect_vertical";
        case HaarKind::FourRectChecker: return "four_rect_checker";
    }
    return "unknown";
}

HaarKind parse_kind(std::string_view name) {
    for (HaarKind k : kAllHaarKinds)
        if (kind_name(k) == name) return k;
    fail(ErrorCode::Format, "unknown Haar feature kind '" + std::string(name) + "'");
}

HaarRegions scaled_regions(const HaarFeature& f, const Rect& window, double scale) {
    const int hb = horizontal_bands(f.kind);
    const int vb = vertical_bands(f.kind);
    const int ox = window.x + static_cast<int>(std::floor(f.x * scale));
    const int oy = window.y + static_cast<int>(std::floor(f.y * scale));
    const int bw = static_cast<int>(std::floor((f.w / hb) * scale));
    const int bh = static_cast<int>(std::floor((f.h / vb) * scale));
    if (bw < 1 || bh < 1 || ox + hb * bw > window.x + window.w || oy + vb * bh > window.y + window.h ||
        f.w % hb != 0 || f.h % vb != 0)
        fail(ErrorCode::Argument, "Haar feature footprint does not fit the window at this scale");

    auto band = [&](int col, int row) { return Rect{ox + col * bw, oy + row * bh, bw, bh}; };
    HaarRegions r;
    switch (f.kind) {
        case HaarKind::TwoRectHorizontal:
            r.dark = {band(0, 0)};
            r.light = {band(1, 0)};
            break;
        case HaarKind::TwoRectVertical:
            r.dark = {band(0, 0)};
            r.light = {band(0, 1)};
            break;
        case HaarKind::ThreeRectHorizontal:
            r.dark = {band(1, 0)};
            r.light = {band(0, 0), band(2, 0)};
            break;
        case HaarKind::ThreeRectVertical:
            r.dark = {band(0, 1)};
            r.light = {band(0, 0), band(0, 2)};
            break;
        case HaarKind::FourRectChecker:
            r.dark = {band(0, 0), band(1, 1)};
            r.light = {band(1, 0), band(0, 1)};
            break;
    }
    return r;
}

std::vector<HaarFeature> enumerate_features(int base_window, int position_stride, int size_stride,
                                            std::span<const HaarKind> kinds) {
    require(position_stride >= 1 && size_stride >= 1, "feature strides must be >= 1");
    require(base_window >= 1, "base window must be >= 1");
    std::vector<HaarFeature> out;
    for (HaarKind kind : kinds) {
        const int hb = horizontal_bands(kind);
        const int vb = vertical_bands(kind);
        for (int y = 0; y < base_window; y += position_stride)
            for (int x = 0; x < base_window; x += position_stride)
                for (int bh = 1; y + vb * bh <= base_window; bh += size_stride)
                    for (int bw = 1; x + hb * bw <= base_window; bw += size_stride)
                        out.push_back({kind, x, y, hb * bw, vb * bh});
    }
    return out;
}

namespace {

double region_mean(const IntegralImage& ii, const std::vector<Rect>& rects) {
    double sum = 0.0;
    double count = 0.0;
    for (const Rect& r : rects) {
        sum += ii.rect_sum(r);
        count += static_cast<double>(r.area());
    }
    return sum / count;
}

}  // namespace

double haar_value(const IntegralImage& ii, const HaarFeature& f, const Rect& window,
                  double window_scale) {
    const HaarRegions regions = scaled_regions(f, window, window_scale);
    return region_mean(ii, regions.dark) - region_mean(ii, regions.light);
}

namespace {

// Sweep over values sorted ascending by `order`. Candidate thresholds are the
// smallest value (everything on one side) and the midpoint of every pair of
// adjacent distinct values.
StumpFit sweep_stump(std::span<const double> values, std::span<const std::uint32_t> order,
                     std::span<const SampleLabel> labels, std::span<const double> weights,
                     double total_face, double total_nonface) {
    StumpFit best{values[order[0]], 1, std::numeric_limits<double>::infinity()};
    double below_face = 0.0;
    double below_nonface = 0.0;
    auto consider = [&](double threshold) {
        const double err_pos = below_face + (total_nonface - below_nonface);
        const double err_neg = below_nonface + (total_face - below_face);
        if (err_pos < best.error) best = {threshold, 1, err_pos};
        if (err_neg < best.error) best = {threshold, -1, err_neg};
    };
    consider(values[order[0]]);
    const std::size_t n = order.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t s = order[i];
        if (labels[s] == SampleLabel::Face)
            below_face += weights[s];
        else
            below_nonface += weights[s];
        if (i + 1 < n) {
            const double a = values[s];
            const double b = values[order[i + 1]];
            if (b > a) {
                double mid = a + (b - a) / 2.0;
                if (!(mid > a)) mid = b;
                consider(mid);
            }
        }
    }
    return best;
}

std::vector<std::uint32_t> sorted_order(std::span<const double> values) {
    std::vector<std::uint32_t> order(values.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return values[a] < values[b]; });
    return order;
}

}  // namespace

StumpFit train_stump(std::span<const double> values, std::span<const SampleLabel> labels,
                     std::span<const double> weights) {
    require(values.size() == labels.size() && values.size() == weights.size(),
            "train_stump: values, labels and weights differ in length");
    double total_face = 0.0, total_nonface = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (labels[i] == SampleLabel::Face)
            total_face += weights[i];
        else
            total_nonface += weights[i];
    }
    const bool has_face = std::find(labels.begin(), labels.end(), SampleLabel::Face) != labels.end();
    const bool has_nonface =
        std::find(labels.begin(), labels.end(), SampleLabel::NonFace) != labels.end();
    if (!has_face || !has_nonface)
        fail(ErrorCode::Degenerate, "train_stump: both face and non-face samples are required");
    if (std::abs(total_face + total_nonface - 1.0) > 1e-9)
        fail(ErrorCode::Argument, "train_stump: weights must sum to 1");
    const auto order = sorted_order(values);
    return sweep_stump(values, order, labels, weights, total_face, total_nonface);
}

double window_feature_value(const WindowSource& src, const HaarFeature& f, const Rect& window,
                            double scale, bool variance_normalization) {
    const double v = haar_value(*src.ii, f, window, scale);
    if (!variance_normalization) return v;
    require(src.squared != nullptr, "variance normalization needs a squared integral image");
    const double n = static_cast<double>(window.area());
    const double mean = src.ii->rect_sum(window) / n;
    const double var = src.squared->rect_sum(window) / n - mean * mean;
    const double sd = var > 1.0 ? std::sqrt(var) : 1.0;
    return v / sd;
}

double StrongClassifier::alpha_sum() const {
    double s = 0.0;
    for (const auto& w : weak) s += w.alpha;
    return s;
}

double StrongClassifier::score(const WindowSource& src, const Rect& window, double scale,
                               bool vn) const {
    double s = 0.0;
    for (const auto& w : weak)
        if (w.predicts_face(window_feature_value(src, w.feature, window, scale, vn))) s += w.alpha;
    return s;
}

bool StrongClassifier::predicts_face(const WindowSource& src, const Rect& window, double scale,
                                     bool vn) const {
    return score(src, window, scale, vn) >= 0.5 * alpha_sum();
}

TrainingSet::TrainingSet(std::span<const GrayImage> images, std::vector<SampleLabel> labels,
                         bool variance_normalization)
    : vn_(variance_normalization), labels_(std::move(labels)) {
    require(images.size() == labels_.size(), "training set: image and label counts differ");
    require(!images.empty(), "training set is empty");
    window_ = images.front().width();
    ii_.reserve(images.size());
    for (const auto& img : images) {
        require(img.width() == window_ && img.height() == window_,
                "training windows must all be square and the same size");
        ii_.emplace_back(img);
        if (vn_) sq_.emplace_back(img, true);
    }
}

WindowSource TrainingSet::source(std::size_t i) const {
    return {&ii_[i], vn_ ? &sq_[i] : nullptr};
}

double TrainingSet::feature_value(std::size_t sample, const HaarFeature& f) const {
    return window_feature_value(source(sample), f, Rect{0, 0, window_, window_}, 1.0, vn_);
}

FeatureTable::FeatureTable(const TrainingSet& set, std::span<const std::size_t> samples,
                           std::vector<HaarFeature> features, int jobs)
    : samples_(samples.begin(), samples.end()), features_(std::move(features)) {
    require(!samples_.empty(), "feature table needs at least one sample");
    require(!features_.empty(), "feature table needs at least one feature");
    labels_.reserve(samples_.size());
    for (std::size_t s : samples_) labels_.push_back(set.labels()[s]);
    const std::size_t n = samples_.size();
    values_.resize(features_.size() * n);
    order_.resize(features_.size() * n);
    detail::parallel_for(features_.size(), jobs, [&](std::size_t begin, std::size_t end) {
        for (std::size_t f = begin; f < end; ++f) {
            double* row = values_.data() + f * n;
            for (std::size_t i = 0; i < n; ++i) row[i] = set.feature_value(samples_[i], features_[f]);
            const auto ord = sorted_order({row, n});
            std::copy(ord.begin(), ord.end(), order_.begin() + static_cast<std::ptrdiff_t>(f * n));
        }
    });
}

std::span<const double> FeatureTable::values(std::size_t f) const {
    return {values_.data() + f * samples_.size(), samples_.size()};
}

std::span<const std::uint32_t> FeatureTable::order(std::size_t f) const {
    return {order_.data() + f * samples_.size(), samples_.size()};
}

Booster::Booster(const FeatureTable& table)
    : table_(table), weights_(table.sample_count()), scores_(table.sample_count(), 0.0) {
    const auto labels = table.labels();
    const auto faces = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), SampleLabel::Face));
    const std::size_t nonfaces = labels.size() - faces;
    if (faces == 0 || nonfaces == 0)
        fail(ErrorCode::Degenerate, "boosting needs both face and non-face samples");
    for (std::size_t i = 0; i < labels.size(); ++i)
        weights_[i] = labels[i] == SampleLabel::Face ? 0.5 / static_cast<double>(faces)
                                                     : 0.5 / static_cast<double>(nonfaces);
}

BoostRound Booster::step() {
    const auto labels = table_.labels();
    double total_face = 0.0, total_nonface = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == SampleLabel::Face ? total_face : total_nonface) += weights_[i];

    // Lowest error wins; equal errors resolve to the lowest feature index.
    StumpFit best{0.0, 1, std::numeric_limits<double>::infinity()};
    std::size_t best_feature = 0;
    for (std::size_t f = 0; f < table_.feature_count(); ++f) {
        const StumpFit fit =
            sweep_stump(table_.values(f), table_.order(f), labels, weights_, total_face, total_nonface);
        if (fit.error < best.error) {
            best = fit;
            best_feature = f;
        }
    }
    if (!(best.error < 0.5)) {
        std::ostringstream msg;
        msg << "boosting stalled at round " << rounds() + 1 << ": best weighted error " << best.error;
        fail(ErrorCode::BoostingStalled, msg.str());
    }

    // A zero-error stump would give an infinite vote; the floor keeps alpha finite.
    const double eps = std::max(best.error, 1e-10);
    const double beta = eps / (1.0 - eps);
    WeakClassifier wc{table_.feature(best_feature), best.threshold, best.polarity, std::log(1.0 / beta)};

    const auto values = table_.values(best_feature);
    double total = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        const bool face = wc.predicts_face(values[i]);
        if (face) scores_[i] += wc.alpha;
        if (face == (labels[i] == SampleLabel::Face)) weights_[i] *= beta;
        total += weights_[i];
    }
    for (double& w : weights_) w /= total;

    strong_.weak.push_back(wc);
    return {wc, best.error, best_feature};
}

AdaBoostResult adaboost_train(const TrainingSet& set, std::span<const HaarFeature> features,
                              int rounds, int jobs) {
    require(rounds >= 1, "adaboost: rounds must be >= 1");
    std::vector<std::size_t> all(set.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const FeatureTable table(set, all, {features.begin(), features.end()}, jobs);
    Booster booster(table);
    AdaBoostResult result;
    for (int t = 0; t < rounds; ++t) {
        const BoostRound round = booster.step();
        result.round_errors.push_back(round.error);
        const auto w = booster.weights();
        result.weight_sums.push_back(std::accumulate(w.begin(), w.end(), 0.0));
        result.min_weights.push_back(*std::min_element(w.begin(), w.end()));
        const double half = 0.5 * booster.classifier().alpha_sum();
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < table.sample_count(); ++i) {
            const bool face = booster.scores()[i] >= half;
            if (face != (table.labels()[i] == SampleLabel::Face)) ++wrong;
        }
        result.training_errors.push_back(static_cast<double>(wrong) / static_cast<double>(table.sample_count()));
    }
    result.classifier = booster.classifier();
    return result;
}

double Stage::score(const WindowSource& src, const Rect& window, double scale, bool vn) const {
    double s = 0.0;
    for (const auto& w : weak)
        if (w.predicts_face(window_feature_value(src, w.feature, window, scale, vn))) s += w.alpha;
    return s;
}

bool Cascade::accepts(const WindowSource& src, const Rect& window, double scale, double* margin) const {
    double last = 0.0;
    for (const Stage& stage : stages) {
        const double s = stage.score(src, window, scale, variance_normalization);
        if (!(s >= stage.threshold)) return false;
        last = s - stage.threshold;
    }
    if (margin) *margin = last;
    return !stages.empty();
}

bool Cascade::accepts(const GrayImage& window_image) const {
    require(window_image.width() == base_window && window_image.height() == base_window,
            "cascade: window image must match the base window");
    const IntegralImage ii(window_image);
    IntegralImage sq;
    if (variance_normalization) sq = IntegralImage(window_image, true);
    return accepts({&ii, variance_normalization ? &sq : nullptr}, Rect{0, 0, base_window, base_window}, 1.0);
}

double stage_threshold_for(std::vector<double> positive_scores, double min_detection_rate) {
    require(!positive_scores.empty(), "stage threshold needs positive scores");
    std::sort(positive_scores.begin(), positive_scores.end());
    const double n = static_cast<double>(positive_scores.size());
    auto k = static_cast<std::size_t>(std::max(0.0, std::ceil((1.0 - min_detection_rate) * n - 1e-9)));
    k = std::clamp<std::size_t>(k, 1, positive_scores.size());
    return positive_scores[k - 1];
}

namespace {

std::string stage_report_text(const std::vector<StageReport>& stages) {
    std::ostringstream out;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        out << "\n  stage " << i << ": weak=" << s.weak_count << " negatives_in=" << s.negatives_in
            << " d=" << s.detection_rate << " f=" << s.false_positive_rate;
    }
    return out.str();
}

}  // namespace

Cascade train_cascade(std::span<const GrayImage> positives, std::span<const GrayImage> negatives,
                      const CascadeGoals& goals) {
    if (positives.size() < 20 || negatives.size() < 20)
        fail(ErrorCode::InsufficientData, "cascade training needs at least 20 positives and 20 negatives");
    require(goals.min_detection_rate > 0.0 && goals.min_detection_rate <= 1.0,
            "min detection rate must be in (0, 1]");
    require(goals.max_false_positive_rate > 0.0 && goals.max_false_positive_rate < 1.0,
            "max false-positive rate must be in (0, 1)");
    require(goals.max_stages >= 1 && goals.max_weak_per_stage >= 1, "stage limits must be >= 1");

    std::vector<GrayImage> images;
    std::vector<SampleLabel> labels;
    images.reserve(positives.size() + negatives.size());
    for (const auto& p : positives) {
        images.push_back(p.width() == kBaseWindow && p.height() == kBaseWindow
                             ? p
                             : resize_bilinear(p, kBaseWindow, kBaseWindow));
        labels.push_back(SampleLabel::Face);
    }
    for (const auto& n : negatives) {
        images.push_back(n.width() == kBaseWindow && n.height() == kBaseWindow
                             ? n
                             : resize_bilinear(n, kBaseWindow, kBaseWindow));
        labels.push_back(SampleLabel::NonFace);
    }
    const TrainingSet set(images, labels, goals.variance_normalization);
    auto features = enumerate_features(kBaseWindow, goals.position_stride, goals.size_stride);

    Cascade cascade;
    cascade.variance_normalization = goals.variance_normalization;
    cascade.training.seed = goals.seed;
    cascade.training.position_stride = goals.position_stride;
    cascade.training.size_stride = goals.size_stride;
    cascade.training.feature_count = features.size();
    cascade.training.positives = positives.size();
    cascade.training.negatives = negatives.size();
    cascade.training.min_detection_rate = goals.min_detection_rate;
    cascade.training.max_false_positive_rate = goals.max_false_positive_rate;

    const std::size_t n_pos = positives.size();
    std::vector<std::size_t> surviving(negatives.size());
    std::iota(surviving.begin(), surviving.end(), n_pos);

    for (int s = 0; s < goals.max_stages && !surviving.empty(); ++s) {
        std::vector<std::size_t> samples(n_pos);
        std::iota(samples.begin(), samples.end(), std::size_t{0});
        samples.insert(samples.end(), surviving.begin(), surviving.end());
        const FeatureTable table(set, samples, features, goals.jobs);
        Booster booster(table);

        StageReport report;
        report.negatives_in = surviving.size();
        double threshold = 0.0;
        while (true) {
            try {
                booster.step();
            } catch (const Error& e) {
                if (e.code() != ErrorCode::BoostingStalled) throw;
                cascade.training.stages.push_back(report);
                fail(ErrorCode::TrainingFailure,
                     "cascade stage " + std::to_string(s) + ": " + e.what() +
                         stage_report_text(cascade.training.stages));
            }
            const auto scores = booster.scores();
            threshold = stage_threshold_for({scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(n_pos)},
                                            goals.min_detection_rate);
            std::size_t detected = 0, false_pos = 0;
            for (std::size_t i = 0; i < n_pos; ++i) detected += scores[i] >= threshold;
            for (std::size_t i = n_pos; i < samples.size(); ++i) false_pos += scores[i] >= threshold;
            report.weak_count = booster.rounds();
            report.detection_rate = static_cast<double>(detected) / static_cast<double>(n_pos);
            report.false_positive_rate = static_cast<double>(false_pos) / static_cast<double>(surviving.size());
            if (report.false_positive_rate <= goals.max_false_positive_rate) break;
            if (booster.rounds() >= goals.max_weak_per_stage) {
                cascade.training.stages.push_back(report);
                fail(ErrorCode::TrainingFailure,
                     "cascade stage " + std::to_string(s) + ": false-positive goal not reached within " +
                         std::to_string(goals.max_weak_per_stage) + " weak classifiers" +
                         stage_report_text(cascade.training.stages));
            }
        }

        cascade.stages.push_back({booster.classifier().weak, threshold});
        cascade.training.stages.push_back(report);

        std::vector<std::size_t> next;
        const auto scores = booster.scores();
        for (std::size_t i = n_pos; i < samples.size(); ++i)
            if (scores[i] >= threshold) next.push_back(samples[i]);
        surviving = std::move(next);
    }
    return cascade;
}

void validate(const ScanParams& p) {
    require(p.scale_factor > 1.0, "scan: scale_factor must be > 1");
    require(p.step_fraction > 0.0 && p.step_fraction <= 1.0, "scan: step_fraction must be in (0, 1]");
    require(p.min_neighbors >= 0, "scan: min_neighbors must be >= 0");
    require(p.iou_merge_threshold > 0.0 && p.iou_merge_threshold < 1.0,
            "scan: iou_merge_threshold must be in (0, 1)");
}

std::vector<Detection> scan_windows(const Cascade& cascade, const GrayImage& img,
                                    const ScanParams& params, int jobs) {
    validate(params);
    std::vector<Detection> hits;
    if (img.width() < cascade.base_window || img.height() < cascade.base_window) return hits;

    const IntegralImage ii(img);
    IntegralImage sq;
    if (cascade.variance_normalization) sq = IntegralImage(img, true);
    const WindowSource src{&ii, cascade.variance_normalization ? &sq : nullptr};

    const int limit = std::min(img.width(), img.height());
    for (int level = 0;; ++level) {
        const double scale = std::pow(params.scale_factor, level);
        const int side = static_cast<int>(std::floor(cascade.base_window * scale + 1e-9));
        if (side > limit) break;
        const int step = std::max(1, static_cast<int>(std::lround(params.step_fraction * side)));
        const int rows = (img.height() - side) / step + 1;
        std::vector<std::vector<Detection>> per_row(static_cast<std::size_t>(rows));
        detail::parallel_for(per_row.size(), jobs, [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r) {
                const int y = static_cast<int>(r) * step;
                for (int x = 0; x + side <= img.width(); x += step) {
                    const Rect window{x, y, side, side};
                    double margin = 0.0;
                    if (cascade.accepts(src, window, scale, &margin))
                        per_row[r].push_back({window, scale, margin, 1});
                }
            }
        });
        for (auto& row : per_row) hits.insert(hits.end(), row.begin(), row.end());
    }
    return hits;
}

std::vector<Detection> group_detections(std::vector<Detection> raw, const ScanParams& params,
                                        int width, int height) {
    std::sort(raw.begin(), raw.end(), [](const Detection& a, const Detection& b) {
        if (a.scale != b.scale) return a.scale < b.scale;
        if (a.box.x != b.box.x) return a.box.x < b.box.x;
        return a.box.y < b.box.y;
    });
    const std::size_t n = raw.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (iou(raw[i].box, raw[j].box) >= params.iou_merge_threshold) {
                const std::size_t a = find(i), b = find(j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }

    struct Acc {
        double x = 0, y = 0, w = 0, h = 0, scale = 0;
        double score = -std::numeric_limits<double>::infinity();
        int count = 0;
    };
    std::vector<Acc> acc(n);
    for (std::size_t i = 0; i < n; ++i) {
        Acc& a = acc[find(i)];
        const double weight = raw[i].neighbors;
        a.x += weight * raw[i].box.x;
        a.y += weight * raw[i].box.y;
        a.w += weight * raw[i].box.w;
        a.h += weight * raw[i].box.h;
        a.scale += weight * raw[i].scale;
        a.score = std::max(a.score, raw[i].score);
        a.count += raw[i].neighbors;
    }
    std::vector<Detection> out;
    for (std::size_t i = 0; i < n; ++i) {
        const Acc& a = acc[i];
        if (a.count == 0 || a.count < params.min_neighbors) continue;
        const double c = static_cast<double>(a.count);
        Rect box{static_cast<int>(std::lround(a.x / c)), static_cast<int>(std::lround(a.y / c)),
                 static_cast<int>(std::lround(a.w / c)), static_cast<int>(std::lround(a.h / c))};
        box.w = std::clamp(box.w, 1, width);
        box.h = std::clamp(box.h, 1, height);
        box.x = std::clamp(box.x, 0, width - box.w);
        box.y = std::clamp(box.y, 0, height - box.h);
        out.push_back({box, a.scale / c, a.score, a.count});
    }
    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.box.y != b.box.y) return a.box.y < b.box.y;
        if (a.box.x != b.box.x) return a.box.x < b.box.x;
        return a.box.w < b.box.w;
    });
    return out;
}

std::vector<Detection> detect(const Cascade& cascade, const GrayImage& img, const ScanParams& params,
                              int jobs) {
    return group_detections(scan_windows(cascade, img, params, jobs), params, img.width(), img.height());
}

std::optional<Detection> largest_detection(std::span<const Detection> detections) {
    if (detections.empty()) return std::nullopt;
    const Detection* best = &detections.front();
    for (const auto& d : detections) {
        if (d.box.area() > best->box.area() || (d.box.area() == best->box.area() && d.score > best->score))
            best = &d;
    }
    return *best;
}

std::optional<GrayImage> extract_face(const GrayImage& img, std::span<const Detection> detections) {
    const auto best = largest_detection(detections);
    if (!best) return std::nullopt;
    return resize_bilinear(img.crop(best->box), kFaceSize, kFaceSize);
}

}  // namespace faceclust
