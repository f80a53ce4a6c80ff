#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faceclust/imaging.hpp"
#include "faceclust/model_select.hpp"

namespace faceclust {

// Self-contained SVG documents; coordinates are printed with fixed precision
// so output is byte-stable.
std::string elbow_svg(const ElbowCurve& curve, std::optional<std::size_t> knee = std::nullopt);

// One block of horizontal bars per cluster, each block sorted descending,
// with a vertical line at the overall mean.
std::string silhouette_svg(const SilhouetteReport& report, std::span<const std::size_t> labels);

// Grid of tiles, each resized to tile x tile.
GrayImage montage(std::span<const GrayImage> images, int tile = 64, int columns = 8);

}  // namespace faceclust
