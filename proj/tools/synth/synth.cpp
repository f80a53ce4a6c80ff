#include "synth.hpp"

#include <algorithm>
#include <cmath>

#include "faceclust/error.hpp"

namespace faceclust::synth {

namespace {

bool inside(double u, double v, double u0, double u1, double v0, double v1) {
    return u >= u0 && u < u1 && v >= v0 && v < v1;
}

double clamp8(double v) { return std::clamp(v, 0.0, 255.0); }

}  // namespace

double face_intensity(int t, double u, double v) {
    // Shared structure: dark eye band with a bright nose bridge, bright cheeks,
    // dark mouth. Identities differ over large areas around it.
    if (inside(u, v, 0.44, 0.56, 0.28, 0.42)) return 200.0;
    if (inside(u, v, 0.12, 0.88, 0.28, 0.42)) return 45.0;
    if (inside(u, v, 0.30, 0.70, 0.70, 0.80)) return 60.0;

    // Each identity shades one half of the face; any two identities differ
    // over half of the face area.
    bool shaded = false;
    switch (t) {
        case 0: shaded = u < 0.5; break;
        case 1: shaded = u >= 0.5; break;
        case 2: shaded = v < 0.5; break;
        case 3: shaded = v >= 0.5; break;
        default: fail(ErrorCode::Argument, "synthetic identity must be in [0, 4)");
    }
    const double base = shaded ? 110.0 : 215.0;
    return base;
}

void draw_face(GrayImage& img, const Rect& box, int t, Rng& rng, double noise_sd) {
    for (int y = std::max(0, box.y); y < std::min(img.height(), box.y + box.h); ++y)
        for (int x = std::max(0, box.x); x < std::min(img.width(), box.x + box.w); ++x) {
            const double u = (x - box.x + 0.5) / box.w;
            const double v = (y - box.y + 0.5) / box.h;
            img.at(x, y) = clamp8(face_intensity(t, u, v) + (noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0));
        }
}

GrayImage face_window(int size, Rng& rng, double noise_sd, double jitter) {
    const int t = static_cast<int>(rng.index(kTemplates));
    return face_window(size, t, rng, noise_sd, jitter);
}

GrayImage face_window(int size, int t, Rng& rng, double noise_sd, double jitter) {
    GrayImage img(size, size, rng.uniform(60.0, 200.0));
    const double scale = 1.0 + rng.uniform(-jitter, jitter);
    const int side = std::max(4, static_cast<int>(std::lround(size * scale)));
    const int dx = static_cast<int>(std::lround(rng.uniform(-jitter, jitter) * size));
    const int dy = static_cast<int>(std::lround(rng.uniform(-jitter, jitter) * size));
    const int off = (size - side) / 2;
    for (double& p : img.pixels_mut()) p = clamp8(p + rng.normal(0.0, noise_sd));
    draw_face(img, {off + dx, off + dy, side, side}, t, rng, noise_sd);
    return img;
}

GrayImage background(int width, int height, Rng& rng) {
    const double a = rng.uniform(90.0, 160.0);
    const double gx = rng.uniform(-40.0, 40.0) / width;
    const double gy = rng.uniform(-40.0, 40.0) / height;
    GrayImage img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) img.at(x, y) = a + gx * x + gy * y;
    const int rects = static_cast<int>(rng.index(4));
    for (int r = 0; r < rects; ++r) {
        const int w = 4 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, width / 3))));
        const int h = 4 + static_cast<int>(rng.index(static_cast<std::size_t>(std::max(1, height / 3))));
        const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(width)));
        const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(height)));
        const double delta = rng.uniform(-25.0, 25.0);
        for (int y = y0; y < std::min(height, y0 + h); ++y)
            for (int x = x0; x < std::min(width, x0 + w); ++x) img.at(x, y) += delta;
    }
    for (double& p : img.pixels_mut()) p = clamp8(p + rng.normal(0.0, 6.0));
    return img;
}

namespace {

// A window of a planted scene that overlaps the face by IoU < 0.3, resized to
// size x size. These are the windows a scan mostly sees near a face.
GrayImage scene_crop(int size, Rng& rng) {
    const int scene = 4 * size;
    const PlantedScene s = planted_scene(scene, scene, static_cast<int>(rng.index(kTemplates)), rng, scene / 3,
                                         2 * scene / 3, 3.0);
    const std::size_t mode = rng.index(3);
    for (;;) {
        Rect w;
        if (mode == 0) {
            // Anywhere in the scene.
            const int side = size + static_cast<int>(rng.index(static_cast<std::size_t>(scene - size + 1)));
            w = {static_cast<int>(rng.index(static_cast<std::size_t>(scene - side + 1))),
                 static_cast<int>(rng.index(static_cast<std::size_t>(scene - side + 1))), side, side};
        } else if (mode == 1) {
            // A zoomed-in piece of the face.
            const int lo = std::max(size / 2, s.face.w * 3 / 10), hi = s.face.w * 7 / 10;
            const int side = lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
            w = {s.face.x + static_cast<int>(rng.index(static_cast<std::size_t>(s.face.w - side + 1))),
                 s.face.y + static_cast<int>(rng.index(static_cast<std::size_t>(s.face.w - side + 1))), side, side};
        } else {
            // A near miss: roughly face sized but clearly misaligned.
            const int side = static_cast<int>(std::lround(s.face.w * rng.uniform(0.75, 1.35)));
            const int cx = s.face.x + s.face.w / 2 + static_cast<int>(std::lround(rng.uniform(-0.6, 0.6) * s.face.w));
            const int cy = s.face.y + s.face.h / 2 + static_cast<int>(std::lround(rng.uniform(-0.6, 0.6) * s.face.h));
            w = {cx - side / 2, cy - side / 2, side, side};
            if (w.x < 0 || w.y < 0 || w.x + side > scene || w.y + side > scene) continue;
        }
        const double overlap = iou(w, s.face);
        if (overlap < (mode == 0 ? 0.3 : 0.5)) return resize_bilinear(s.image.crop(w), size, size);
    }
}

}  // namespace

GrayImage nonface_window(int size, Rng& rng) {
    const std::size_t kind = rng.index(12);
    switch (kind) {
        case 0: {
            GrayImage img(size, size);
            const double mean = rng.uniform(30.0, 220.0), sd = rng.uniform(5.0, 60.0);
            for (double& p : img.pixels_mut()) p = clamp8(rng.normal(mean, sd));
            return img;
        }
        case 1: {
            GrayImage img(size, size, rng.uniform(0.0, 255.0));
            for (double& p : img.pixels_mut()) p = clamp8(p + rng.normal(0.0, 3.0));
            return img;
        }
        case 2: {
            GrayImage face = face_window(size, rng);
            for (double& p : face.pixels_mut()) p = 255.0 - p;
            return face;
        }
        case 3: {
            const GrayImage face = face_window(size, rng);
            GrayImage img(size, size);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) img.at(x, y) = face.at(y, size - 1 - x);
            return img;
        }
        case 4: {
            const GrayImage face = face_window(size, rng);
            GrayImage img(size, size);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) img.at(x, y) = face.at(x, size - 1 - y);
            return img;
        }
        case 5: {
            GrayImage img = background(size, size, rng);
            const int shift = static_cast<int>(std::lround(rng.uniform(0.4, 0.7) * size));
            const int dir = static_cast<int>(rng.index(4));
            const int dx = dir == 0 ? shift : dir == 1 ? -shift : 0;
            const int dy = dir == 2 ? shift : dir == 3 ? -shift : 0;
            draw_face(img, {dx, dy, size, size}, static_cast<int>(rng.index(kTemplates)), rng, 6.0);
            return img;
        }
        case 6: {
            GrayImage img = background(size, size, rng);
            const int side = std::max(4, static_cast<int>(std::lround(rng.uniform(0.25, 0.45) * size)));
            const int x = static_cast<int>(rng.index(static_cast<std::size_t>(size - side + 1)));
            const int y = static_cast<int>(rng.index(static_cast<std::size_t>(size - side + 1)));
            draw_face(img, {x, y, side, side}, static_cast<int>(rng.index(kTemplates)), rng, 6.0);
            return img;
        }
        case 7: {
            GrayImage img(size, size, rng.uniform(60.0, 200.0));
            const int bands = 2 + static_cast<int>(rng.index(4));
            const bool vertical = rng.index(2) == 0;
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const int pos = vertical ? x : y;
                    if ((pos * bands / size) % 2 == 1) img.at(x, y) = clamp8(img.at(x, y) - rng.uniform(60.0, 100.0));
                    img.at(x, y) = clamp8(img.at(x, y) + rng.normal(0.0, 6.0));
                }
            return img;
        }
        case 8:
        case 9:
        case 10:
            return scene_crop(size, rng);
        default:
            return background(size, size, rng);
    }
}

PlantedScene planted_scene(int width, int height, int t, Rng& rng, int min_side, int max_side, double noise_sd) {
    require(min_side >= 1 && min_side <= max_side && max_side <= std::min(width, height),
            "planted scene: face side range does not fit the image");
    PlantedScene s;
    s.identity = t;
    s.image = background(width, height, rng);
    const int side = min_side + static_cast<int>(rng.index(static_cast<std::size_t>(max_side - min_side + 1)));
    const int x = static_cast<int>(rng.index(static_cast<std::size_t>(width - side + 1)));
    const int y = static_cast<int>(rng.index(static_cast<std::size_t>(height - side + 1)));
    s.face = {x, y, side, side};
    draw_face(s.image, s.face, t, rng, noise_sd);
    return s;
}

Blobs blobs(std::size_t count, std::size_t per_blob, std::size_t dim, double spread, double separation, Rng& rng) {
    require(count >= 1 && per_blob >= 1 && dim >= 1, "blobs: count, per_blob and dim must be >= 1");
    Matrix centers(count, dim);
    const double min_dist = separation * spread;
    const double box = min_dist * std::max(2.0, std::sqrt(static_cast<double>(count)) * 2.0);
    for (std::size_t c = 0; c < count; ++c) {
        for (int attempt = 0;; ++attempt) {
            require(attempt < 10000, "blobs: could not place separated centers");
            for (double& v : centers.row(c)) v = rng.uniform(-box, box);
            bool ok = true;
            for (std::size_t o = 0; o < c && ok; ++o)
                ok = std::sqrt(squared_distance(centers.row(c), centers.row(o))) >= min_dist;
            if (ok) break;
        }
    }
    Blobs b{Matrix(count * per_blob, dim), {}};
    for (std::size_t c = 0; c < count; ++c)
        for (std::size_t i = 0; i < per_blob; ++i) {
            const std::size_t r = c * per_blob + i;
            for (std::size_t j = 0; j < dim; ++j) b.points(r, j) = centers(c, j) + rng.normal(0.0, spread);
            b.labels.push_back(c);
        }
    return b;
}

}  // namespace faceclust::synth
