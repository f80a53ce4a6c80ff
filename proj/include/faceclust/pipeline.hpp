#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faceclust/haar.hpp"
#include "faceclust/mlp.hpp"
#include "faceclust/pca.hpp"

namespace faceclust {

inline constexpr const char* kToolVersion = "1.0.0";

// Flat key/value configuration. Keys and defaults live in one registry so
// parsing, validation and --help all agree.
struct PipelineConfig {
    std::filesystem::path input_dir;
    std::filesystem::path work_dir = "work";
    std::filesystem::path cascade_path;  // empty: <work_dir>/cascade.json
    std::filesystem::path positives_dir;
    std::filesystem::path negatives_dir;

    ScanParams scan;
    CascadeGoals cascade;

    double pca_variance_fraction = 0.9999;
    std::size_t pca_components = 0;  // nonzero overrides the fraction

    std::size_t k_min = 2;
    std::size_t k_max = 8;
    std::size_t elbow_k_max = 10;
    std::uint64_t seed = 0;
    int restarts = 10;

    std::size_t mlp_hidden = 64;
    TrainConfig mlp;

    int jobs = 1;
    bool verbose = false;
    bool all_boxes = false;

    std::filesystem::path resolved_cascade_path() const;
    Retention retention() const;

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    // `key = value` lines; '#' starts a comment.
    void load_file(const std::filesystem::path& path);

    static std::vector<std::string> keys();
    // Every key with its default and a one-line description.
    static std::string help();
};

// Numeric ranges only; path checks are per command.
void validate_values(const PipelineConfig& config);

struct DetectSummary {
    std::size_t images = 0;
    std::size_t faces = 0;
    std::size_t unreadable = 0;
};

struct ClusterSummary {
    std::size_t faces = 0;
    std::size_t retained = 0;
    std::size_t chosen_k = 0;
    std::optional<std::size_t> knee;
    double overall_silhouette = 0.0;
};

struct MlpSummary {
    double accuracy = 0.0;
    std::size_t train_count = 0;
    std::size_t validation_count = 0;
};

struct Prediction {
    bool face = false;
    Rect box;
    std::size_t cluster = 0;
    std::vector<double> probabilities;

    std::string to_json_line(const std::string& image) const;
};

Cascade cmd_train_cascade(const PipelineConfig& config);
DetectSummary cmd_detect(const PipelineConfig& config);
ClusterSummary cmd_cluster(const PipelineConfig& config);
MlpSummary cmd_train_mlp(const PipelineConfig& config);
Prediction cmd_predict(const PipelineConfig& config, const std::filesystem::path& image);
std::string cmd_report(const PipelineConfig& config);

}  // namespace faceclust
