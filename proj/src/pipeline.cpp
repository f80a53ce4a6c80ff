#include "faceclust/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "faceclust/error.hpp"
#include "faceclust/io.hpp"
#include "faceclust/kmeans.hpp"
#include "faceclust/model_select.hpp"
#include "faceclust/plots.hpp"
#include "faceclust/serialize.hpp"
#include "parallel.hpp"

namespace faceclust {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorCode::Validation, msg); }

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) invalid("config key '" + key + "': cannot parse '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    invalid("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::string show(double v) { return format_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
std::string show(T v) { return std::to_string(v); }

struct Entry {
    std::string key;
    std::string description;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Entry number(std::string key, std::string description, T PipelineConfig::*member) {
    return {key, std::move(description), [key, member](PipelineConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, bool>)
                    c.*member = parse_bool(key, v);
                else
                    c.*member = parse_number<T>(key, v);
            },
            [member](const PipelineConfig& c) { return show(c.*member); }};
}

template <typename S, typename T>
Entry nested(std::string key, std::string description, S PipelineConfig::*outer, T S::*member) {
    return {key, std::move(description), [key, outer, member](PipelineConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, bool>)
                    (c.*outer).*member = parse_bool(key, v);
                else
                    (c.*outer).*member = parse_number<T>(key, v);
            },
            [outer, member](const PipelineConfig& c) { return show((c.*outer).*member); }};
}

Entry path(std::string key, std::string description, fs::path PipelineConfig::*member) {
    return {std::move(key), std::move(description),
            [member](PipelineConfig& c, const std::string& v) { c.*member = v; },
            [member](const PipelineConfig& c) { return (c.*member).generic_string(); }};
}

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = {
        path("input_dir", "directory of images to scan for faces (detect)", &PipelineConfig::input_dir),
        path("work_dir", "directory receiving every artifact", &PipelineConfig::work_dir),
        path("cascade_path", "cascade model file; empty means <work_dir>/cascade.json", &PipelineConfig::cascade_path),
        path("positives_dir", "face window images for train-cascade", &PipelineConfig::positives_dir),
        path("negatives_dir", "non-face window images for train-cascade", &PipelineConfig::negatives_dir),
        number("seed", "base seed for every stochastic step", &PipelineConfig::seed),
        number("jobs", "worker threads for per-image and per-feature work", &PipelineConfig::jobs),
        number("verbose", "progress messages on stderr", &PipelineConfig::verbose),
        nested("scan.scale_factor", "window growth per scale step, > 1", &PipelineConfig::scan, &ScanParams::scale_factor),
        nested("scan.step_fraction", "window step as a fraction of window side, (0, 1]", &PipelineConfig::scan,
               &ScanParams::step_fraction),
        nested("scan.min_neighbors", "raw hits a group needs to be reported, >= 0", &PipelineConfig::scan,
               &ScanParams::min_neighbors),
        nested("scan.iou_merge_threshold", "IoU linking raw hits into one group, (0, 1)", &PipelineConfig::scan,
               &ScanParams::iou_merge_threshold),
        number("detect.all_boxes", "also write every grouped box to detections_all.csv", &PipelineConfig::all_boxes),
        nested("cascade.min_detection_rate", "per-stage detection goal d, (0, 1]", &PipelineConfig::cascade,
               &CascadeGoals::min_detection_rate),
        nested("cascade.max_false_positive_rate", "per-stage false-positive goal f, (0, 1)", &PipelineConfig::cascade,
               &CascadeGoals::max_false_positive_rate),
        nested("cascade.max_stages", "stage cap, >= 1", &PipelineConfig::cascade, &CascadeGoals::max_stages),
        nested("cascade.max_weak_per_stage", "weak classifiers allowed per stage, >= 1", &PipelineConfig::cascade,
               &CascadeGoals::max_weak_per_stage),
        nested("cascade.position_stride", "feature origin stride in the 24x24 window, >= 1", &PipelineConfig::cascade,
               &CascadeGoals::position_stride),
        nested("cascade.size_stride", "feature band size stride, >= 1", &PipelineConfig::cascade,
               &CascadeGoals::size_stride),
        nested("cascade.variance_normalization", "divide feature values by the window standard deviation",
               &PipelineConfig::cascade, &CascadeGoals::variance_normalization),
        number("pca.variance_fraction", "cumulative explained variance to retain, (0, 1]",
               &PipelineConfig::pca_variance_fraction),
        number("pca.components", "fixed component count; 0 uses pca.variance_fraction", &PipelineConfig::pca_components),
        number("cluster.k_min", "smallest k for silhouette selection, >= 2", &PipelineConfig::k_min),
        number("cluster.k_max", "largest k for silhouette selection (clamped to the face count)", &PipelineConfig::k_max),
        number("cluster.elbow_k_max", "elbow curve runs k = 1..this (clamped to the face count)",
               &PipelineConfig::elbow_k_max),
        number("cluster.restarts", "k-means restarts per k, >= 1", &PipelineConfig::restarts),
        number("mlp.hidden", "hidden layer width, >= 1", &PipelineConfig::mlp_hidden),
        nested("mlp.learning_rate", "gradient step size, > 0", &PipelineConfig::mlp, &TrainConfig::learning_rate),
        nested("mlp.epochs", "passes over the training split, >= 1", &PipelineConfig::mlp, &TrainConfig::epochs),
        nested("mlp.batch_size", "samples per gradient step, >= 1", &PipelineConfig::mlp, &TrainConfig::batch_size),
        nested("mlp.validation_fraction", "held-out share per cluster, (0, 1)", &PipelineConfig::mlp,
               &TrainConfig::validation_fraction),
    };
    return entries;
}

const Entry& lookup(const std::string& key) {
    for (const Entry& e : registry())
        if (e.key == key) return e;
    invalid("unknown config key '" + key + "'");
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

void log(const PipelineConfig& c, const std::string& msg) {
    if (c.verbose) std::cerr << "[faceclust] " << msg << '\n';
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Paths inside work_dir are echoed relative to it so manifests do not depend
// on where the work directory lives.
std::string display_path(const PipelineConfig& c, const fs::path& p) {
    if (p.empty()) return {};
    const fs::path work = fs::weakly_canonical(fs::absolute(c.work_dir));
    const fs::path target = fs::weakly_canonical(fs::absolute(p));
    const fs::path rel = target.lexically_relative(work);
    if (!rel.empty() && *rel.begin() != "..") return "<work_dir>/" + rel.generic_string();
    return p.generic_string();
}

ordered_json config_echo(const PipelineConfig& c) {
    ordered_json j = ordered_json::object();
    for (const Entry& e : registry()) {
        if (e.key == "work_dir") continue;
        j[e.key] = e.get(c);
    }
    j["cascade_path"] = display_path(c, c.resolved_cascade_path());
    for (const char* k : {"input_dir", "positives_dir", "negatives_dir"})
        j[k] = display_path(c, fs::path(j[k].get<std::string>()));
    return j;
}

ordered_json load_json_or_empty(const fs::path& p) {
    if (!fs::exists(p)) return ordered_json::object();
    try {
        ordered_json j = ordered_json::parse(read_file(p));
        return j.is_object() ? j : ordered_json::object();
    } catch (const nlohmann::json::exception&) {
        return ordered_json::object();
    }
}

struct StageRecord {
    std::string name;
    std::vector<std::pair<std::string, fs::path>> inputs;  // display name, file to hash
    ordered_json seeds = ordered_json::object();
    std::vector<std::string> outputs;
    double seconds = 0.0;
};

void record_stage(const PipelineConfig& c, const StageRecord& r) {
    const fs::path manifest_path = c.work_dir / "manifest.json";
    ordered_json m = load_json_or_empty(manifest_path);
    m["schema_version"] = kSchemaVersion;
    m["tool_version"] = kToolVersion;
    if (!m.contains("stages") || !m["stages"].is_object()) m["stages"] = ordered_json::object();

    ordered_json stage;
    stage["config"] = config_echo(c);
    ordered_json inputs = ordered_json::array();
    for (const auto& [name, file] : r.inputs) inputs.push_back({{"path", name}, {"sha256", sha256_file(file)}});
    stage["inputs"] = std::move(inputs);
    stage["seeds"] = r.seeds;
    stage["outputs"] = r.outputs;
    m["stages"][r.name] = std::move(stage);
    write_file_atomic(manifest_path, m.dump(2) + "\n");

    const fs::path timings_path = c.work_dir / "timings.json";
    ordered_json t = load_json_or_empty(timings_path);
    t[r.name] = r.seconds;
    write_file_atomic(timings_path, t.dump(2) + "\n");
}

void require_dir(const fs::path& p, const std::string& what) {
    if (p.empty()) invalid(what + " is not set");
    if (!fs::is_directory(p)) invalid(what + " '" + p.string() + "' is not a directory");
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) invalid(what + " '" + p.string() + "' not found");
}

template <typename Fn>
auto load_model(const fs::path& p, const std::string& what, Fn&& loader) {
    require_file(p, what);
    try {
        return loader(p);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Format || e.code() == ErrorCode::Io) invalid(what + ": " + e.what());
        throw;
    }
}

std::vector<fs::path> require_images(const fs::path& dir, const std::string& what) {
    require_dir(dir, what);
    auto images = list_images(dir);
    if (images.empty()) invalid(what + " '" + dir.string() + "' contains no PNG or JPEG files");
    return images;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::string line;
    std::vector<std::vector<std::string>> rows;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (header) {
            header = false;
            continue;
        }
        if (!line.empty()) rows.push_back(split_csv_line(line));
    }
    return rows;
}

std::vector<std::size_t> face_layer_sizes(std::size_t r, std::size_t hidden, std::size_t k) { return {r, hidden, k}; }

GrayImage face_crop(const GrayImage& img, const Detection& d) {
    return quantize8(resize_bilinear(img.crop(d.box), kFaceSize, kFaceSize));
}

GrayImage load_face(const fs::path& p) {
    GrayImage img = load_gray(p);
    if (img.width() != kFaceSize || img.height() != kFaceSize) img = resize_bilinear(img, kFaceSize, kFaceSize);
    return img;
}

Matrix face_matrix(const std::vector<fs::path>& files, int jobs) {
    Matrix x(files.size(), static_cast<std::size_t>(kFaceSize) * kFaceSize);
    detail::parallel_for(files.size(), jobs, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const GrayImage img = load_face(files[i]);
            std::copy(img.pixels().begin(), img.pixels().end(), x.row(i).begin());
        }
    });
    return x;
}

void remove_matching(const fs::path& dir, const std::string& prefix, const std::string& suffix) {
    if (!fs::is_directory(dir)) return;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.starts_with(prefix) && name.ends_with(suffix)) fs::remove(entry.path());
    }
}

}  // namespace

fs::path PipelineConfig::resolved_cascade_path() const {
    return cascade_path.empty() ? work_dir / "cascade.json" : cascade_path;
}

Retention PipelineConfig::retention() const {
    if (pca_components > 0) return ComponentCount{pca_components};
    return VarianceFraction{pca_variance_fraction};
}

void PipelineConfig::set(const std::string& key, const std::string& value) { lookup(key).set(*this, trim(value)); }

std::string PipelineConfig::get(const std::string& key) const { return lookup(key).get(*this); }

void PipelineConfig::load_file(const fs::path& file) {
    if (!fs::is_regular_file(file)) invalid("config file '" + file.string() + "' not found");
    std::istringstream in(read_file(file));
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            invalid(file.string() + ":" + std::to_string(number) + ": expected 'key = value'");
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

std::vector<std::string> PipelineConfig::keys() {
    std::vector<std::string> out;
    for (const Entry& e : registry()) out.push_back(e.key);
    return out;
}

std::string PipelineConfig::help() {
    const PipelineConfig defaults;
    std::size_t width = 0;
    for (const Entry& e : registry()) width = std::max(width, e.key.size());
    std::ostringstream out;
    out << "Configuration keys (config file lines 'key = value', or --set key=value):\n";
    for (const Entry& e : registry()) {
        std::string value = e.get(defaults);
        if (value.empty()) value = "\"\"";
        out << "  " << e.key << std::string(width - e.key.size() + 2, ' ') << "default " << value << "  "
            << e.description << '\n';
    }
    return out.str();
}

void validate_values(const PipelineConfig& c) {
    auto check = [](bool ok, const std::string& msg) {
        if (!ok) invalid(msg);
    };
    check(c.scan.scale_factor > 1.0 && std::isfinite(c.scan.scale_factor), "scan.scale_factor must be > 1");
    check(c.scan.step_fraction > 0.0 && c.scan.step_fraction <= 1.0, "scan.step_fraction must be in (0, 1]");
    check(c.scan.min_neighbors >= 0, "scan.min_neighbors must be >= 0");
    check(c.scan.iou_merge_threshold > 0.0 && c.scan.iou_merge_threshold < 1.0,
          "scan.iou_merge_threshold must be in (0, 1)");
    check(c.cascade.min_detection_rate > 0.0 && c.cascade.min_detection_rate <= 1.0,
          "cascade.min_detection_rate must be in (0, 1]");
    check(c.cascade.max_false_positive_rate > 0.0 && c.cascade.max_false_positive_rate < 1.0,
          "cascade.max_false_positive_rate must be in (0, 1)");
    check(c.cascade.max_stages >= 1, "cascade.max_stages must be >= 1");
    check(c.cascade.max_weak_per_stage >= 1, "cascade.max_weak_per_stage must be >= 1");
    check(c.cascade.position_stride >= 1, "cascade.position_stride must be >= 1");
    check(c.cascade.size_stride >= 1, "cascade.size_stride must be >= 1");
    check(c.pca_variance_fraction > 0.0 && c.pca_variance_fraction <= 1.0, "pca.variance_fraction must be in (0, 1]");
    check(c.k_min >= 2, "cluster.k_min must be >= 2");
    check(c.k_max >= c.k_min, "cluster.k_max must be >= cluster.k_min");
    check(c.elbow_k_max >= 1, "cluster.elbow_k_max must be >= 1");
    check(c.restarts >= 1, "cluster.restarts must be >= 1");
    check(c.mlp_hidden >= 1, "mlp.hidden must be >= 1");
    check(c.mlp.learning_rate > 0.0 && std::isfinite(c.mlp.learning_rate), "mlp.learning_rate must be > 0");
    check(c.mlp.epochs >= 1, "mlp.epochs must be >= 1");
    check(c.mlp.batch_size >= 1, "mlp.batch_size must be >= 1");
    check(c.mlp.validation_fraction > 0.0 && c.mlp.validation_fraction < 1.0,
          "mlp.validation_fraction must be in (0, 1)");
    check(c.jobs >= 1, "jobs must be >= 1");
    check(!c.work_dir.empty(), "work_dir must not be empty");
}

std::string Prediction::to_json_line(const std::string& image) const {
    ordered_json j;
    j["image"] = image;
    j["face"] = face;
    if (face) {
        j["box"] = {{"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h}};
        j["cluster"] = cluster;
        j["probabilities"] = probabilities;
    } else {
        j["error"] = "no face detected";
    }
    return j.dump();
}

Cascade cmd_train_cascade(const PipelineConfig& config) {
    validate_values(config);
    const auto pos_files = require_images(config.positives_dir, "positives_dir");
    const auto neg_files = require_images(config.negatives_dir, "negatives_dir");
    const auto start = Clock::now();

    auto load_all = [&](const std::vector<fs::path>& files) {
        std::vector<GrayImage> out(files.size());
        detail::parallel_for(files.size(), config.jobs, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) out[i] = load_gray(files[i]);
        });
        return out;
    };
    const auto positives = load_all(pos_files);
    const auto negatives = load_all(neg_files);
    log(config, "training cascade on " + std::to_string(positives.size()) + " positives and " +
                    std::to_string(negatives.size()) + " negatives");

    CascadeGoals goals = config.cascade;
    goals.seed = config.seed;
    goals.jobs = config.jobs;
    Cascade cascade = train_cascade(positives, negatives, goals);

    fs::create_directories(config.work_dir);
    const fs::path out = config.resolved_cascade_path();
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_model(cascade, out);

    ordered_json report;
    report["stages"] = ordered_json::array();
    for (std::size_t s = 0; s < cascade.stages.size(); ++s) {
        const StageReport& r = cascade.training.stages[s];
        report["stages"].push_back({{"stage", s},
                                    {"weak_count", r.weak_count},
                                    {"negatives_in", r.negatives_in},
                                    {"detection_rate", r.detection_rate},
                                    {"false_positive_rate", r.false_positive_rate}});
    }
    report["feature_count"] = cascade.training.feature_count;
    report["positives"] = cascade.training.positives;
    report["negatives"] = cascade.training.negatives;
    write_file_atomic(config.work_dir / "cascade_report.json", report.dump(2) + "\n");

    StageRecord rec;
    rec.name = "train-cascade";
    for (const auto& f : pos_files) rec.inputs.emplace_back("positives/" + f.filename().string(), f);
    for (const auto& f : neg_files) rec.inputs.emplace_back("negatives/" + f.filename().string(), f);
    rec.seeds["cascade"] = config.seed;
    rec.outputs = {display_path(config, out), "cascade_report.json"};
    rec.seconds = seconds_since(start);
    record_stage(config, rec);
    return cascade;
}

DetectSummary cmd_detect(const PipelineConfig& config) {
    validate_values(config);
    const auto images = require_images(config.input_dir, "input_dir");
    const Cascade cascade = load_model(config.resolved_cascade_path(), "cascade", load_cascade);
    const auto start = Clock::now();

    struct Result {
        bool readable = true;
        std::string error;
        std::vector<Detection> detections;
        std::optional<Detection> face;
        GrayImage crop;
    };
    std::vector<Result> results(images.size());
    detail::parallel_for(images.size(), config.jobs, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            Result& r = results[i];
            GrayImage img;
            try {
                img = load_gray(images[i]);
            } catch (const Error& err) {
                r.readable = false;
                r.error = err.what();
                continue;
            }
            r.detections = detect(cascade, img, config.scan, 1);
            r.face = largest_detection(r.detections);
            if (r.face) r.crop = face_crop(img, *r.face);
        }
    });

    const fs::path faces_dir = config.work_dir / "faces";
    fs::create_directories(faces_dir);
    remove_matching(faces_dir, "", ".png");

    DetectSummary summary;
    summary.images = images.size();
    std::ostringstream csv, all;
    csv << "path,x,y,w,h,score,neighbors\n";
    all << "path,rank,x,y,w,h,score,neighbors\n";
    StageRecord rec;
    rec.name = "detect";
    rec.outputs = {"detections.csv"};
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Result& r = results[i];
        const std::string rel = images[i].lexically_relative(config.input_dir).generic_string();
        rec.inputs.emplace_back(rel, images[i]);
        if (!r.readable) {
            ++summary.unreadable;
            std::cerr << "warning: skipping unreadable image: " << r.error << '\n';
        }
        csv << csv_field(rel);
        if (r.face) {
            const Detection& d = *r.face;
            csv << ',' << d.box.x << ',' << d.box.y << ',' << d.box.w << ',' << d.box.h << ',' << format_double(d.score)
                << ',' << d.neighbors << '\n';
            const std::string crop_name = images[i].stem().string() + ".png";
            save_png(r.crop, faces_dir / crop_name);
            rec.outputs.push_back("faces/" + crop_name);
            ++summary.faces;
        } else {
            csv << ",,,,,,\n";
        }
        for (std::size_t k = 0; k < r.detections.size(); ++k) {
            const Detection& d = r.detections[k];
            all << csv_field(rel) << ',' << k << ',' << d.box.x << ',' << d.box.y << ',' << d.box.w << ',' << d.box.h
                << ',' << format_double(d.score) << ',' << d.neighbors << '\n';
        }
    }
    write_file_atomic(config.work_dir / "detections.csv", csv.str());
    if (config.all_boxes) {
        write_file_atomic(config.work_dir / "detections_all.csv", all.str());
        rec.outputs.push_back("detections_all.csv");
    }
    rec.inputs.emplace_back(display_path(config, config.resolved_cascade_path()), config.resolved_cascade_path());
    rec.seconds = seconds_since(start);
    record_stage(config, rec);
    log(config, std::to_string(summary.faces) + " faces in " + std::to_string(summary.images) + " images");
    return summary;
}

ClusterSummary cmd_cluster(const PipelineConfig& config) {
    validate_values(config);
    const fs::path faces_dir = config.work_dir / "faces";
    if (!fs::is_directory(faces_dir)) invalid("no faces directory at '" + faces_dir.string() + "'; run detect first");
    const auto files = list_images(faces_dir);
    const std::size_t n = files.size();
    if (n < config.k_min)
        invalid("cluster needs at least cluster.k_min = " + std::to_string(config.k_min) + " faces, found " +
                std::to_string(n));
    const auto start = Clock::now();

    const Matrix x = face_matrix(files, config.jobs);
    log(config, "fitting PCA on " + std::to_string(n) + " faces");
    const PcaFit fit = fit_pca_detailed(x, config.retention());
    const PcaModel& pca = fit.model;
    const Matrix scores = project(pca, x);

    KMeansOptions km;
    km.seed = config.seed;
    km.restarts = config.restarts;
    const std::size_t k_max = std::min(config.k_max, n);
    const std::size_t elbow_max = std::min(config.elbow_k_max, n);
    const ElbowCurve curve = elbow_curve(scores, 1, elbow_max, km);
    std::optional<std::size_t> knee;
    if (curve.points.size() >= 3) knee = suggest_knee(curve);

    log(config, "selecting k in [" + std::to_string(config.k_min) + ", " + std::to_string(k_max) + "]");
    const KSelection sel = select_k(scores, config.k_min, k_max, km);
    KMeansOptions final_opts = km;
    final_opts.seed = config.seed + sel.chosen_k;
    const KMeansRun final_run = kmeans_fit_detailed(scores, sel.chosen_k, final_opts);
    const auto& labels = final_run.assignment.labels;
    const SilhouetteReport sil = silhouette_report(scores, labels);

    fs::create_directories(config.work_dir);
    const fs::path& w = config.work_dir;
    save_model(pca, w / "pca.json");
    save_model(final_run.model, w / "kmeans.json");

    std::ostringstream assignments, silcsv, elbow, explained;
    assignments << "path,cluster,silhouette\n";
    silcsv << "sample_id,cluster,s\n";
    for (std::size_t i = 0; i < n; ++i) {
        assignments << csv_field(files[i].filename().string()) << ',' << labels[i] << ','
                    << format_double(sil.per_sample[i]) << '\n';
        silcsv << i << ',' << labels[i] << ',' << format_double(sil.per_sample[i]) << '\n';
    }
    elbow << "k,sse\n";
    for (const auto& p : curve.points) elbow << p.k << ',' << format_double(p.sse) << '\n';
    explained << "component,eigenvalue,fraction,cumulative\n";
    const auto ev = explained_variance(pca);
    for (std::size_t i = 0; i < ev.size(); ++i)
        explained << ev[i].component << ',' << format_double(pca.eigenvalues[i]) << ',' << format_double(ev[i].fraction)
                  << ',' << format_double(ev[i].cumulative) << '\n';
    write_file_atomic(w / "assignments.csv", assignments.str());
    write_file_atomic(w / "silhouette.csv", silcsv.str());
    write_file_atomic(w / "elbow.csv", elbow.str());
    write_file_atomic(w / "explained_variance.csv", explained.str());
    write_file_atomic(w / "elbow.svg", elbow_svg(curve, knee));
    write_file_atomic(w / "silhouette.svg", silhouette_svg(sil, labels));

    JsonWriter sj;
    sj.begin_object();
    sj.key("chosen_k").value(sel.chosen_k);
    if (knee) sj.key("elbow_knee").value(*knee);
    sj.key("k_min").value(config.k_min);
    sj.key("k_max").value(k_max);
    sj.key("overall_silhouette").value(sil.overall_mean);
    sj.key("pca_solver").value(fit.solver_used == PcaSolver::Gram ? "gram" : "direct");
    sj.key("pca_rank").value(fit.rank);
    sj.key("candidates").begin_array();
    for (const KCandidate& c : sel.candidates) {
        sj.begin_object();
        sj.key("k").value(c.k);
        sj.key("overall_mean").value(c.overall_mean);
        sj.key("per_cluster_mean").values(c.per_cluster_mean);
        sj.key("cluster_sizes").begin_array();
        for (std::size_t s : c.cluster_sizes) sj.value(s);
        sj.end_array();
        sj.key("all_above_overall").value(c.all_above_overall);
        sj.key("all_clusters_cohesive").value(c.all_clusters_cohesive);
        sj.key("size_imbalance").value(c.size_imbalance);
        sj.end_object();
    }
    sj.end_array();
    sj.key("rationale").begin_array();
    for (const auto& line : sel.rationale) sj.value(line);
    sj.end_array();
    sj.end_object();
    write_file_atomic(w / "selection.json", sj.str());

    remove_matching(w, "montage_cluster_", ".png");
    StageRecord rec;
    rec.name = "cluster";
    rec.outputs = {"pca.json",     "kmeans.json",  "assignments.csv", "silhouette.csv", "elbow.csv",
                   "explained_variance.csv", "elbow.svg", "silhouette.svg", "selection.json"};
    for (std::size_t c = 0; c < sel.chosen_k; ++c) {
        std::vector<GrayImage> members;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] == c) members.push_back(reshape(FeatureVector{{x.row(i).begin(), x.row(i).end()}, {}},
                                                          kFaceSize, kFaceSize));
        const std::string name = "montage_cluster_" + std::to_string(c) + ".png";
        save_png(montage(members), w / name);
        rec.outputs.push_back(name);
    }

    for (const auto& f : files) rec.inputs.emplace_back("faces/" + f.filename().string(), f);
    rec.seeds["kmeans_base"] = config.seed;
    rec.seeds["kmeans_final"] = final_opts.seed;
    rec.seconds = seconds_since(start);
    record_stage(config, rec);

    ClusterSummary summary;
    summary.faces = n;
    summary.retained = pca.retained;
    summary.chosen_k = sel.chosen_k;
    summary.knee = knee;
    summary.overall_silhouette = sil.overall_mean;
    return summary;
}

MlpSummary cmd_train_mlp(const PipelineConfig& config) {
    validate_values(config);
    const fs::path& w = config.work_dir;
    const PcaModel pca = load_model(w / "pca.json", "pca model", load_pca);
    const KMeansModel km = load_model(w / "kmeans.json", "kmeans model", load_kmeans);
    require_file(w / "assignments.csv", "assignments");
    const auto rows = read_csv(w / "assignments.csv");
    if (rows.empty()) invalid("assignments.csv has no rows");
    std::vector<fs::path> files;
    std::vector<std::size_t> labels;
    for (const auto& row : rows) {
        if (row.size() != 3) invalid("assignments.csv: malformed row");
        const auto label = parse_number<std::size_t>("assignments.csv cluster", row[1]);
        if (label >= km.k) invalid("assignments.csv: cluster " + row[1] + " outside the kmeans model");
        files.push_back(w / "faces" / row[0]);
        require_file(files.back(), "face crop");
        labels.push_back(label);
    }
    const auto start = Clock::now();

    const Matrix x = face_matrix(files, config.jobs);
    if (x.cols() != pca.dimension()) invalid("face crops do not match the pca model dimension");
    const Matrix scores = project(pca, x);

    MlpModel model = mlp_init(face_layer_sizes(pca.retained, config.mlp_hidden, km.k), config.seed);
    if (!pca.eigenvalues.empty() && pca.eigenvalues.front() > 0.0)
        model.input_scale = 1.0 / std::sqrt(pca.eigenvalues.front());
    TrainConfig tc = config.mlp;
    tc.seed = config.seed + 1;
    log(config, "training MLP " + std::to_string(pca.retained) + "-" + std::to_string(config.mlp_hidden) + "-" +
                    std::to_string(km.k));
    const TrainResult result = train(std::move(model), scores, labels, tc);
    const EvalMetrics& m = result.metrics;

    save_model(result.model, w / "mlp.json");
    JsonWriter mj;
    mj.begin_object();
    mj.key("accuracy").value(m.accuracy);
    mj.key("train_count").value(m.train_count);
    mj.key("validation_count").value(m.validation_count);
    mj.key("final_training_loss").value(m.loss_history.back());
    mj.key("confusion").begin_array();
    for (const auto& row : m.confusion) {
        mj.begin_array();
        for (std::size_t v : row) mj.value(v);
        mj.end_array();
    }
    mj.end_array();
    mj.end_object();
    write_file_atomic(w / "mlp_metrics.json", mj.str());
    std::ostringstream loss;
    loss << "epoch,loss\n";
    for (std::size_t e = 0; e < m.loss_history.size(); ++e) loss << e + 1 << ',' << format_double(m.loss_history[e]) << '\n';
    write_file_atomic(w / "mlp_loss.csv", loss.str());

    StageRecord rec;
    rec.name = "train-mlp";
    rec.inputs = {{"pca.json", w / "pca.json"}, {"kmeans.json", w / "kmeans.json"},
                  {"assignments.csv", w / "assignments.csv"}};
    for (const auto& f : files) rec.inputs.emplace_back("faces/" + f.filename().string(), f);
    rec.seeds["mlp_init"] = config.seed;
    rec.seeds["mlp_training"] = tc.seed;
    rec.outputs = {"mlp.json", "mlp_metrics.json", "mlp_loss.csv"};
    rec.seconds = seconds_since(start);
    record_stage(config, rec);
    return {m.accuracy, m.train_count, m.validation_count};
}

Prediction cmd_predict(const PipelineConfig& config, const fs::path& image) {
    validate_values(config);
    const Cascade cascade = load_model(config.resolved_cascade_path(), "cascade", load_cascade);
    const PcaModel pca = load_model(config.work_dir / "pca.json", "pca model", load_pca);
    const MlpModel mlp = load_model(config.work_dir / "mlp.json", "mlp model", load_mlp);
    if (mlp.input_size() != pca.retained) invalid("mlp input size does not match the pca model");

    const GrayImage img = load_gray(image);
    Prediction p;
    const auto best = largest_detection(detect(cascade, img, config.scan, config.jobs));
    if (!best) return p;
    p.face = true;
    p.box = best->box;
    const GrayImage crop = face_crop(img, *best);
    const auto scores = project(pca, crop.pixels());
    p.probabilities = forward(mlp, scores);
    p.cluster = static_cast<std::size_t>(std::max_element(p.probabilities.begin(), p.probabilities.end()) -
                                         p.probabilities.begin());
    return p;
}

std::string cmd_report(const PipelineConfig& config) {
    validate_values(config);
    const fs::path& w = config.work_dir;
    require_dir(w, "work_dir");
    std::ostringstream out;
    out << "faceclust " << kToolVersion << " report for " << w.generic_string() << '\n';
    bool any = false;

    if (fs::is_regular_file(w / "cascade_report.json")) {
        any = true;
        const auto j = ordered_json::parse(read_file(w / "cascade_report.json"));
        out << "\ncascade: " << j["stages"].size() << " stages, " << j["feature_count"] << " candidate features\n";
        for (const auto& s : j["stages"])
            out << "  stage " << s["stage"] << ": " << s["weak_count"] << " weak, d=" << s["detection_rate"].get<double>()
                << ", f=" << s["false_positive_rate"].get<double>() << '\n';
    }
    if (fs::is_regular_file(w / "detections.csv")) {
        any = true;
        const auto rows = read_csv(w / "detections.csv");
        std::size_t faces = 0;
        for (const auto& r : rows) faces += r.size() > 1 && !r[1].empty();
        out << "\ndetect: " << faces << " of " << rows.size() << " images yielded a face\n";
    }
    if (fs::is_regular_file(w / "pca.json")) {
        any = true;
        const PcaModel pca = load_pca(w / "pca.json");
        const auto ev = explained_variance(pca);
        out << "\npca: d=" << pca.dimension() << ", retained " << pca.retained << " components explaining "
            << (ev.empty() ? 0.0 : ev.back().cumulative) * 100.0 << "% of variance\n";
    }
    if (fs::is_regular_file(w / "selection.json")) {
        any = true;
        const auto j = ordered_json::parse(read_file(w / "selection.json"));
        out << "\ncluster: chosen k=" << j["chosen_k"];
        if (j.contains("elbow_knee")) out << " (elbow knee at k=" << j["elbow_knee"] << ")";
        out << ", overall silhouette " << j["overall_silhouette"].get<double>() << '\n';
        for (const auto& line : j["rationale"]) out << "  " << line.get<std::string>() << '\n';
    }
    if (fs::is_regular_file(w / "mlp_metrics.json")) {
        any = true;
        const auto j = ordered_json::parse(read_file(w / "mlp_metrics.json"));
        out << "\nmlp: held-out accuracy " << j["accuracy"].get<double>() << " on " << j["validation_count"]
            << " faces (" << j["train_count"] << " used for training)\n";
    }
    if (!any) out << "\nno artifacts found yet\n";
    return out.str();
}

}  // namespace faceclust
