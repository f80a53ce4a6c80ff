#include "faceclust/faceclust.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include <json.hpp>

#include "faceclust/error.hpp"
#include "faceclust/haar.hpp"
#include "faceclust/imaging.hpp"
#include "faceclust/kmeans.hpp"
#include "faceclust/mlp.hpp"
#include "faceclust/pca.hpp"
#include "faceclust/pipeline.hpp"
#include "faceclust/serialize.hpp"

struct fc_config {
    faceclust::PipelineConfig value;
};
struct fc_image {
    faceclust::GrayImage value;
};
struct fc_cascade {
    faceclust::Cascade value;
};
struct fc_pca {
    faceclust::PcaModel value;
};
struct fc_kmeans {
    faceclust::KMeansModel value;
};
struct fc_mlp {
    faceclust::MlpModel value;
};

namespace {

thread_local std::string last_error;

fc_status set_error(fc_status status, const std::string& message) {
    last_error = message;
    return status;
}

template <typename Fn>
fc_status guard(Fn&& fn) {
    last_error.clear();
    try {
        return fn();
    } catch (const faceclust::Error& e) {
        return set_error(static_cast<fc_status>(static_cast<int>(e.code())), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(FC_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(FC_ERR_INTERNAL, e.what());
    }
}

char* duplicate(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char** out, const std::string& s) {
    if (out) *out = duplicate(s);
}

#define FC_REQUIRE(cond, what) \
    if (!(cond)) return set_error(FC_ERR_ARGUMENT, what)

}  // namespace

extern "C" {

const char* fc_version(void) { return faceclust::kToolVersion; }

const char* fc_last_error(void) { return last_error.c_str(); }

const char* fc_status_name(fc_status status) {
    switch (status) {
        case FC_OK: return "ok";
        case FC_ERR_ARGUMENT: return "argument";
        case FC_ERR_IO: return "io";
        case FC_ERR_DECODE: return "decode";
        case FC_ERR_FORMAT: return "format";
        case FC_ERR_INSUFFICIENT_DATA: return "insufficient_data";
        case FC_ERR_DEGENERATE: return "degenerate";
        case FC_ERR_BOOSTING_STALLED: return "boosting_stalled";
        case FC_ERR_TRAINING_FAILURE: return "training_failure";
        case FC_ERR_SPLIT: return "split";
        case FC_ERR_VALIDATION: return "validation";
        case FC_ERR_NO_FACE: return "no_face";
        case FC_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

int fc_exit_code(fc_status status) {
    switch (status) {
        case FC_OK: return 0;
        case FC_ERR_ARGUMENT:
        case FC_ERR_FORMAT:
        case FC_ERR_VALIDATION: return 1;
        case FC_ERR_NO_FACE: return 3;
        default: return 2;
    }
}

void fc_string_free(char* s) { delete[] s; }

fc_status fc_config_create(fc_config** out) {
    FC_REQUIRE(out, "fc_config_create: out is NULL");
    return guard([&] {
        *out = new fc_config{};
        return FC_OK;
    });
}

void fc_config_destroy(fc_config* config) { delete config; }

fc_status fc_config_set(fc_config* config, const char* key, const char* value) {
    FC_REQUIRE(config && key && value, "fc_config_set: NULL argument");
    return guard([&] {
        config->value.set(key, value);
        return FC_OK;
    });
}

fc_status fc_config_get(const fc_config* config, const char* key, char** value) {
    FC_REQUIRE(config && key && value, "fc_config_get: NULL argument");
    return guard([&] {
        emit(value, config->value.get(key));
        return FC_OK;
    });
}

fc_status fc_config_load(fc_config* config, const char* path) {
    FC_REQUIRE(config && path, "fc_config_load: NULL argument");
    return guard([&] {
        config->value.load_file(path);
        return FC_OK;
    });
}

fc_status fc_config_help(char** text) {
    FC_REQUIRE(text, "fc_config_help: text is NULL");
    return guard([&] {
        emit(text, faceclust::PipelineConfig::help());
        return FC_OK;
    });
}

fc_status fc_config_validate(const fc_config* config) {
    FC_REQUIRE(config, "fc_config_validate: config is NULL");
    return guard([&] {
        faceclust::validate_values(config->value);
        return FC_OK;
    });
}

fc_status fc_train_cascade(const fc_config* config, char** summary) {
    FC_REQUIRE(config, "fc_train_cascade: config is NULL");
    return guard([&] {
        const faceclust::Cascade c = faceclust::cmd_train_cascade(config->value);
        nlohmann::ordered_json j;
        j["stages"] = c.stages.size();
        nlohmann::ordered_json weak = nlohmann::ordered_json::array();
        for (const auto& s : c.stages) weak.push_back(s.weak.size());
        j["weak_per_stage"] = weak;
        j["feature_count"] = c.training.feature_count;
        j["cascade_path"] = config->value.resolved_cascade_path().generic_string();
        emit(summary, j.dump());
        return FC_OK;
    });
}

fc_status fc_detect(const fc_config* config, char** summary) {
    FC_REQUIRE(config, "fc_detect: config is NULL");
    return guard([&] {
        const auto s = faceclust::cmd_detect(config->value);
        nlohmann::ordered_json j{{"images", s.images}, {"faces", s.faces}, {"unreadable", s.unreadable}};
        emit(summary, j.dump());
        if (s.unreadable > 0)
            return set_error(FC_ERR_DECODE, std::to_string(s.unreadable) + " image(s) could not be read");
        return FC_OK;
    });
}

fc_status fc_cluster(const fc_config* config, char** summary) {
    FC_REQUIRE(config, "fc_cluster: config is NULL");
    return guard([&] {
        const auto s = faceclust::cmd_cluster(config->value);
        nlohmann::ordered_json j{{"faces", s.faces},
                                 {"retained_components", s.retained},
                                 {"chosen_k", s.chosen_k},
                                 {"overall_silhouette", s.overall_silhouette}};
        if (s.knee) j["elbow_knee"] = *s.knee;
        emit(summary, j.dump());
        return FC_OK;
    });
}

fc_status fc_train_mlp(const fc_config* config, char** summary) {
    FC_REQUIRE(config, "fc_train_mlp: config is NULL");
    return guard([&] {
        const auto s = faceclust::cmd_train_mlp(config->value);
        nlohmann::ordered_json j{
            {"accuracy", s.accuracy}, {"train_count", s.train_count}, {"validation_count", s.validation_count}};
        emit(summary, j.dump());
        return FC_OK;
    });
}

fc_status fc_predict(const fc_config* config, const char* image_path, char** result) {
    FC_REQUIRE(config && image_path, "fc_predict: NULL argument");
    return guard([&] {
        const auto p = faceclust::cmd_predict(config->value, image_path);
        emit(result, p.to_json_line(image_path));
        if (!p.face) return set_error(FC_ERR_NO_FACE, std::string("no face detected in ") + image_path);
        return FC_OK;
    });
}

fc_status fc_report(const fc_config* config, char** text) {
    FC_REQUIRE(config, "fc_report: config is NULL");
    return guard([&] {
        emit(text, faceclust::cmd_report(config->value));
        return FC_OK;
    });
}

fc_status fc_image_load(const char* path, fc_image** out) {
    FC_REQUIRE(path && out, "fc_image_load: NULL argument");
    return guard([&] {
        *out = new fc_image{faceclust::load_gray(path)};
        return FC_OK;
    });
}

fc_status fc_image_from_gray(const uint8_t* pixels, int width, int height, fc_image** out) {
    FC_REQUIRE(pixels && out, "fc_image_from_gray: NULL argument");
    FC_REQUIRE(width > 0 && height > 0, "fc_image_from_gray: dimensions must be positive");
    return guard([&] {
        const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
        *out = new fc_image{faceclust::GrayImage(width, height, std::vector<double>(pixels, pixels + n))};
        return FC_OK;
    });
}

fc_status fc_image_size(const fc_image* image, int* width, int* height) {
    FC_REQUIRE(image && width && height, "fc_image_size: NULL argument");
    *width = image->value.width();
    *height = image->value.height();
    return FC_OK;
}

void fc_image_destroy(fc_image* image) { delete image; }

void fc_scan_params_default(fc_scan_params* params) {
    if (!params) return;
    const faceclust::ScanParams d;
    *params = {d.scale_factor, d.step_fraction, d.min_neighbors, d.iou_merge_threshold};
}

fc_status fc_cascade_load(const char* path, fc_cascade** out) {
    FC_REQUIRE(path && out, "fc_cascade_load: NULL argument");
    return guard([&] {
        *out = new fc_cascade{faceclust::load_cascade(path)};
        return FC_OK;
    });
}

fc_status fc_cascade_stage_count(const fc_cascade* cascade, size_t* stages) {
    FC_REQUIRE(cascade && stages, "fc_cascade_stage_count: NULL argument");
    *stages = cascade->value.stages.size();
    return FC_OK;
}

fc_status fc_cascade_detect(const fc_cascade* cascade, const fc_image* image, const fc_scan_params* params,
                            fc_box* boxes, size_t capacity, size_t* count) {
    FC_REQUIRE(cascade && image && count, "fc_cascade_detect: NULL argument");
    FC_REQUIRE(boxes || capacity == 0, "fc_cascade_detect: boxes is NULL with nonzero capacity");
    return guard([&] {
        faceclust::ScanParams p;
        if (params) p = {params->scale_factor, params->step_fraction, params->min_neighbors, params->iou_merge_threshold};
        const auto found = faceclust::detect(cascade->value, image->value, p);
        *count = found.size();
        for (std::size_t i = 0; i < found.size() && i < capacity; ++i) {
            const auto& d = found[i];
            boxes[i] = {d.box.x, d.box.y, d.box.w, d.box.h, d.score, d.neighbors};
        }
        return FC_OK;
    });
}

void fc_cascade_destroy(fc_cascade* cascade) { delete cascade; }

fc_status fc_pca_load(const char* path, fc_pca** out) {
    FC_REQUIRE(path && out, "fc_pca_load: NULL argument");
    return guard([&] {
        *out = new fc_pca{faceclust::load_pca(path)};
        return FC_OK;
    });
}

fc_status fc_pca_dims(const fc_pca* pca, size_t* input_dim, size_t* components) {
    FC_REQUIRE(pca && input_dim && components, "fc_pca_dims: NULL argument");
    *input_dim = pca->value.dimension();
    *components = pca->value.retained;
    return FC_OK;
}

fc_status fc_pca_project(const fc_pca* pca, const double* x, size_t input_dim, double* scores, size_t components) {
    FC_REQUIRE(pca && x && scores, "fc_pca_project: NULL argument");
    FC_REQUIRE(input_dim == pca->value.dimension(), "fc_pca_project: input dimension mismatch");
    FC_REQUIRE(components == pca->value.retained, "fc_pca_project: component count mismatch");
    return guard([&] {
        const auto s = faceclust::project(pca->value, std::span<const double>(x, input_dim));
        std::copy(s.begin(), s.end(), scores);
        return FC_OK;
    });
}

void fc_pca_destroy(fc_pca* pca) { delete pca; }

fc_status fc_kmeans_load(const char* path, fc_kmeans** out) {
    FC_REQUIRE(path && out, "fc_kmeans_load: NULL argument");
    return guard([&] {
        *out = new fc_kmeans{faceclust::load_kmeans(path)};
        return FC_OK;
    });
}

fc_status fc_kmeans_assign(const fc_kmeans* kmeans, const double* x, size_t dim, size_t* cluster,
                           double* squared_distance) {
    FC_REQUIRE(kmeans && x && cluster, "fc_kmeans_assign: NULL argument");
    return guard([&] {
        const auto [c, d] = faceclust::assign(kmeans->value, std::span<const double>(x, dim));
        *cluster = c;
        if (squared_distance) *squared_distance = d;
        return FC_OK;
    });
}

void fc_kmeans_destroy(fc_kmeans* kmeans) { delete kmeans; }

fc_status fc_mlp_load(const char* path, fc_mlp** out) {
    FC_REQUIRE(path && out, "fc_mlp_load: NULL argument");
    return guard([&] {
        *out = new fc_mlp{faceclust::load_mlp(path)};
        return FC_OK;
    });
}

fc_status fc_mlp_predict(const fc_mlp* mlp, const double* x, size_t dim, double* probabilities, size_t classes,
                         size_t* cluster) {
    FC_REQUIRE(mlp && x, "fc_mlp_predict: NULL argument");
    FC_REQUIRE(!probabilities || classes == mlp->value.output_size(), "fc_mlp_predict: class count mismatch");
    return guard([&] {
        const auto p = faceclust::forward(mlp->value, std::span<const double>(x, dim));
        if (probabilities) std::copy(p.begin(), p.end(), probabilities);
        if (cluster) *cluster = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        return FC_OK;
    });
}

void fc_mlp_destroy(fc_mlp* mlp) { delete mlp; }

}  // extern "C"
