#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "faceclust/imaging.hpp"
#include "faceclust/matrix.hpp"
#include "faceclust/rng.hpp"

// Seeded generators for synthetic corpora with known ground truth: band
// pattern faces in four identities, non-face windows, scenes with one planted
// face, and separated Gaussian blobs.
namespace faceclust::synth {

inline constexpr int kTemplates = 4;

// Noise-free intensity of identity `t` at unit-square coordinates (u, v).
double face_intensity(int t, double u, double v);

// Paints identity `t` into `box` (clipped to the image) with additive noise.
void draw_face(GrayImage& img, const Rect& box, int t, Rng& rng, double noise_sd);

// size x size face window with up to `jitter` of the side of shift and scale.
GrayImage face_window(int size, Rng& rng, double noise_sd = 6.0, double jitter = 0.06);
GrayImage face_window(int size, int t, Rng& rng, double noise_sd, double jitter);

// Gradient plus noise plus a few low-contrast rectangles.
GrayImage background(int width, int height, Rng& rng);

// Negative window drawn from a mix of noise, flat, gradient, inverted,
// rotated, shifted and flipped faces, rectangles and background crops.
GrayImage nonface_window(int size, Rng& rng);

struct PlantedScene {
    GrayImage image;
    Rect face;
    int identity = 0;
};

PlantedScene planted_scene(int width, int height, int t, Rng& rng, int min_side = 48, int max_side = 80,
                           double noise_sd = 3.0);

struct Blobs {
    Matrix points;
    std::vector<std::size_t> labels;
};

// Centers at least `separation` * spread apart; isotropic normal members.
Blobs blobs(std::size_t count, std::size_t per_blob, std::size_t dim, double spread, double separation, Rng& rng);

}  // namespace faceclust::synth
