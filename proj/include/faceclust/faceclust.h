/* C interface to the face clustering library.
 *
 * Every function returns an fc_status; FC_OK is 0. On failure a message is
 * available from fc_last_error() on the calling thread until its next call.
 * Strings returned through char** arguments are owned by the caller and
 * released with fc_string_free().
 */
#ifndef FACECLUST_H
#define FACECLUST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(FACECLUST_BUILDING)
#define FC_API __declspec(dllexport)
#else
#define FC_API __declspec(dllimport)
#endif
#else
#define FC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fc_status {
    FC_OK = 0,
    FC_ERR_ARGUMENT = 1,
    FC_ERR_IO = 2,
    FC_ERR_DECODE = 3,
    FC_ERR_FORMAT = 4,
    FC_ERR_INSUFFICIENT_DATA = 5,
    FC_ERR_DEGENERATE = 6,
    FC_ERR_BOOSTING_STALLED = 7,
    FC_ERR_TRAINING_FAILURE = 8,
    FC_ERR_SPLIT = 9,
    FC_ERR_VALIDATION = 10,
    FC_ERR_NO_FACE = 11,
    FC_ERR_INTERNAL = 100
} fc_status;

typedef struct fc_config fc_config;
typedef struct fc_image fc_image;
typedef struct fc_cascade fc_cascade;
typedef struct fc_pca fc_pca;
typedef struct fc_kmeans fc_kmeans;
typedef struct fc_mlp fc_mlp;

typedef struct fc_box {
    int x, y, w, h;
    double score;
    int neighbors;
} fc_box;

typedef struct fc_scan_params {
    double scale_factor;
    double step_fraction;
    int min_neighbors;
    double iou_merge_threshold;
} fc_scan_params;

FC_API const char* fc_version(void);
FC_API const char* fc_last_error(void);
FC_API const char* fc_status_name(fc_status status);
/* Process exit code for a status: 0 ok, 1 validation/config, 2 runtime/data, 3 no face. */
FC_API int fc_exit_code(fc_status status);
FC_API void fc_string_free(char* s);

/* Configuration */
FC_API fc_status fc_config_create(fc_config** out);
FC_API void fc_config_destroy(fc_config* config);
FC_API fc_status fc_config_set(fc_config* config, const char* key, const char* value);
FC_API fc_status fc_config_get(const fc_config* config, const char* key, char** value);
FC_API fc_status fc_config_load(fc_config* config, const char* path);
FC_API fc_status fc_config_help(char** text);
FC_API fc_status fc_config_validate(const fc_config* config);

/* Pipeline commands. `summary` (may be NULL) receives a JSON object. */
FC_API fc_status fc_train_cascade(const fc_config* config, char** summary);
FC_API fc_status fc_detect(const fc_config* config, char** summary);
FC_API fc_status fc_cluster(const fc_config* config, char** summary);
FC_API fc_status fc_train_mlp(const fc_config* config, char** summary);
/* `result` receives a single-line JSON document; FC_ERR_NO_FACE still fills it. */
FC_API fc_status fc_predict(const fc_config* config, const char* image_path, char** result);
FC_API fc_status fc_report(const fc_config* config, char** text);

/* Images: 8-bit grayscale values, row-major. */
FC_API fc_status fc_image_load(const char* path, fc_image** out);
FC_API fc_status fc_image_from_gray(const uint8_t* pixels, int width, int height, fc_image** out);
FC_API fc_status fc_image_size(const fc_image* image, int* width, int* height);
FC_API void fc_image_destroy(fc_image* image);

/* Cascade detection. */
FC_API void fc_scan_params_default(fc_scan_params* params);
FC_API fc_status fc_cascade_load(const char* path, fc_cascade** out);
FC_API fc_status fc_cascade_stage_count(const fc_cascade* cascade, size_t* stages);
/* Writes up to `capacity` boxes; `count` receives the total number found. */
FC_API fc_status fc_cascade_detect(const fc_cascade* cascade, const fc_image* image, const fc_scan_params* params,
                                   fc_box* boxes, size_t capacity, size_t* count);
FC_API void fc_cascade_destroy(fc_cascade* cascade);

/* PCA projection. */
FC_API fc_status fc_pca_load(const char* path, fc_pca** out);
FC_API fc_status fc_pca_dims(const fc_pca* pca, size_t* input_dim, size_t* components);
FC_API fc_status fc_pca_project(const fc_pca* pca, const double* x, size_t input_dim, double* scores,
                                size_t components);
FC_API void fc_pca_destroy(fc_pca* pca);

/* Nearest-centroid assignment. */
FC_API fc_status fc_kmeans_load(const char* path, fc_kmeans** out);
FC_API fc_status fc_kmeans_assign(const fc_kmeans* kmeans, const double* x, size_t dim, size_t* cluster,
                                  double* squared_distance);
FC_API void fc_kmeans_destroy(fc_kmeans* kmeans);

/* MLP cluster probabilities. */
FC_API fc_status fc_mlp_load(const char* path, fc_mlp** out);
FC_API fc_status fc_mlp_predict(const fc_mlp* mlp, const double* x, size_t dim, double* probabilities,
                                size_t classes, size_t* cluster);
FC_API void fc_mlp_destroy(fc_mlp* mlp);

#ifdef __cplusplus
}
#endif

#endif
