#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "faceclust/faceclust.h"

namespace {

struct ConfigDeleter {
    void operator()(fc_config* c) const { fc_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<fc_config, ConfigDeleter>;

std::string take(char* s) {
    std::string out = s ? s : "";
    fc_string_free(s);
    return out;
}

int report_failure(fc_status status) {
    std::cerr << "error (" << fc_status_name(status) << "): " << fc_last_error() << '\n';
    return fc_exit_code(status);
}

std::string help_footer() {
    char* text = nullptr;
    if (fc_config_help(&text) != FC_OK) return {};
    return "\n" + take(text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Face detection, PCA and k-means clustering pipeline", "faceclust"};
    app.set_version_flag("--version", std::string(fc_version()));
    app.require_subcommand(1);
    app.footer(help_footer());

    std::string config_file;
    std::vector<std::string> overrides;
    std::string seed, jobs;
    bool verbose = false;
    std::string work_dir;
    app.add_option("--config", config_file, "flat 'key = value' configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "base seed (config key seed)");
    app.add_option("--jobs", jobs, "worker threads (config key jobs)");
    app.add_flag("--verbose,-v", verbose, "progress messages on stderr");
    app.add_option("--work-dir", work_dir, "artifact directory (config key work_dir)");
    app.add_option("--set", overrides, "override a config key: --set key=value (repeatable)");

    auto* train_cascade = app.add_subcommand("train-cascade", "train a Haar cascade from positive/negative windows");
    auto* detect = app.add_subcommand("detect", "detect faces in input_dir and write 224x224 crops");
    auto* cluster = app.add_subcommand("cluster", "PCA, elbow, silhouette selection and final k-means");
    auto* train_mlp = app.add_subcommand("train-mlp", "train the cluster-assignment MLP");
    auto* predict = app.add_subcommand("predict", "assign one image to a cluster (JSON on stdout)");
    auto* report = app.add_subcommand("report", "summarize the artifacts in work_dir");
    std::string image;
    predict->add_option("image", image, "image file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    fc_config* raw = nullptr;
    if (fc_status s = fc_config_create(&raw); s != FC_OK) return report_failure(s);
    ConfigPtr config(raw);

    if (!config_file.empty())
        if (fc_status s = fc_config_load(config.get(), config_file.c_str()); s != FC_OK) return report_failure(s);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error (validation): --set expects key=value, got '" << kv << "'\n";
            return 1;
        }
        const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        if (fc_status s = fc_config_set(config.get(), key.c_str(), value.c_str()); s != FC_OK)
            return report_failure(s);
    }
    auto apply = [&](const char* key, const std::string& value) {
        return value.empty() ? FC_OK : fc_config_set(config.get(), key, value.c_str());
    };
    for (auto [key, value] : {std::pair<const char*, std::string>{"seed", seed}, {"jobs", jobs}, {"work_dir", work_dir},
                              {"verbose", verbose ? "true" : ""}})
        if (fc_status s = apply(key, value); s != FC_OK) return report_failure(s);

    char* out = nullptr;
    fc_status status = FC_OK;
    if (*train_cascade) {
        status = fc_train_cascade(config.get(), &out);
    } else if (*detect) {
        status = fc_detect(config.get(), &out);
        if (status == FC_ERR_DECODE && out) {
            std::cout << take(out) << '\n';
            return report_failure(status);
        }
    } else if (*cluster) {
        status = fc_cluster(config.get(), &out);
    } else if (*train_mlp) {
        status = fc_train_mlp(config.get(), &out);
    } else if (*predict) {
        status = fc_predict(config.get(), image.c_str(), &out);
        if (status == FC_ERR_NO_FACE) {
            std::cout << take(out) << '\n';
            std::cerr << "no face detected in " << image << '\n';
            return fc_exit_code(status);
        }
    } else if (*report) {
        status = fc_report(config.get(), &out);
        if (status == FC_OK) {
            std::cout << take(out);
            return 0;
        }
    }
    if (status != FC_OK) {
        fc_string_free(out);
        return report_failure(status);
    }
    std::cout << take(out) << '\n';
    return 0;
}
