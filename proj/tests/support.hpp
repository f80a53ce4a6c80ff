#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "faceclust/imaging.hpp"
#include "faceclust/matrix.hpp"
#include "faceclust/rng.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        faceclust::Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
        path_ = std::filesystem::temp_directory_path() / ("faceclust_" + tag + "_" + std::to_string(rng.next_u64() % 1000000007));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline faceclust::GrayImage random_image(int w, int h, faceclust::Rng& rng) {
    faceclust::GrayImage img(w, h);
    for (double& p : img.pixels_mut()) p = static_cast<double>(rng.index(256));
    return img;
}

inline faceclust::Matrix random_matrix(std::size_t rows, std::size_t cols, faceclust::Rng& rng) {
    faceclust::Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

}  // namespace testing
