#pragma once

#include <filesystem>
#include <string>

#include "faceclust/haar.hpp"
#include "faceclust/kmeans.hpp"
#include "faceclust/mlp.hpp"
#include "faceclust/pca.hpp"

namespace faceclust {

inline constexpr int kSchemaVersion = 1;

std::string to_json(const Cascade& cascade);
std::string to_json(const PcaModel& model);
std::string to_json(const KMeansModel& model);
std::string to_json(const MlpModel& model);

Cascade cascade_from_json(const std::string& text);
PcaModel pca_from_json(const std::string& text);
KMeansModel kmeans_from_json(const std::string& text);
MlpModel mlp_from_json(const std::string& text);

template <typename Model>
void save_model(const Model& model, const std::filesystem::path& path);

Cascade load_cascade(const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);
KMeansModel load_kmeans(const std::filesystem::path& path);
MlpModel load_mlp(const std::filesystem::path& path);

}  // namespace faceclust
