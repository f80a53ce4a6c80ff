#include "faceclust/serialize.hpp"

#include <json.hpp>

#include "faceclust/error.hpp"
#include "faceclust/io.hpp"

namespace faceclust {

using nlohmann::json;

namespace {

json parse(const std::string& text, const char* what) {
    try {
        json j = json::parse(text);
        if (!j.is_object()) fail(ErrorCode::Format, std::string(what) + ": top level is not an object");
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion)
            fail(ErrorCode::Format, std::string(what) + ": unsupported schema_version " + std::to_string(version));
        return j;
    } catch (const json::exception& e) {
        fail(ErrorCode::Format, std::string(what) + ": " + e.what());
    }
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        fail(ErrorCode::Format, std::string(what) + ": " + e.what());
    }
}

std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }

}  // namespace

std::string to_json(const Cascade& c) {
    JsonWriter w;
    w.begin_object();
    w.key("schema_version").value(kSchemaVersion);
    w.key("base_window").value(c.base_window);
    w.key("variance_normalization").value(c.variance_normalization);
    w.key("stages").begin_array();
    for (const Stage& s : c.stages) {
        w.begin_object();
        w.key("threshold").value(s.threshold);
        w.key("weak").begin_array();
        for (const WeakClassifier& wc : s.weak) {
            w.begin_object();
            w.key("kind").value(kind_name(wc.feature.kind));
            w.key("x").value(wc.feature.x);
            w.key("y").value(wc.feature.y);
            w.key("w").value(wc.feature.w);
            w.key("h").value(wc.feature.h);
            w.key("threshold").value(wc.threshold);
            w.key("polarity").value(wc.polarity);
            w.key("alpha").value(wc.alpha);
            w.end_object();
        }
        w.end_array();
        w.end_object();
    }
    w.end_array();
    const CascadeMetadata& m = c.training;
    w.key("training_metadata").begin_object();
    w.key("seed").value(m.seed);
    w.key("position_stride").value(m.position_stride);
    w.key("size_stride").value(m.size_stride);
    w.key("feature_count").value(m.feature_count);
    w.key("positives").value(m.positives);
    w.key("negatives").value(m.negatives);
    w.key("min_detection_rate").value(m.min_detection_rate);
    w.key("max_false_positive_rate").value(m.max_false_positive_rate);
    w.key("stages").begin_array();
    for (const StageReport& r : m.stages) {
        w.begin_object();
        w.key("weak_count").value(r.weak_count);
        w.key("negatives_in").value(r.negatives_in);
        w.key("detection_rate").value(r.detection_rate);
        w.key("false_positive_rate").value(r.false_positive_rate);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    w.end_object();
    return w.str();
}

Cascade cascade_from_json(const std::string& text) {
    const json j = parse(text, "cascade");
    return guarded("cascade", [&] {
        Cascade c;
        c.base_window = j.at("base_window").get<int>();
        if (c.base_window != kBaseWindow)
            fail(ErrorCode::Format, "cascade: base_window must be " + std::to_string(kBaseWindow));
        c.variance_normalization = j.at("variance_normalization").get<bool>();
        for (const json& s : j.at("stages")) {
            Stage stage;
            stage.threshold = s.at("threshold").get<double>();
            for (const json& wj : s.at("weak")) {
                WeakClassifier wc;
                wc.feature = {parse_kind(wj.at("kind").get<std::string>()), wj.at("x").get<int>(), wj.at("y").get<int>(),
                              wj.at("w").get<int>(), wj.at("h").get<int>()};
                const HaarFeature& f = wc.feature;
                if (f.x < 0 || f.y < 0 || f.w < 1 || f.h < 1 || f.x + f.w > c.base_window ||
                    f.y + f.h > c.base_window || f.w % horizontal_bands(f.kind) != 0 ||
                    f.h % vertical_bands(f.kind) != 0)
                    fail(ErrorCode::Format, "cascade: feature geometry does not fit the base window");
                wc.threshold = wj.at("threshold").get<double>();
                wc.polarity = wj.at("polarity").get<int>();
                if (wc.polarity != 1 && wc.polarity != -1) fail(ErrorCode::Format, "cascade: polarity must be +1 or -1");
                wc.alpha = wj.at("alpha").get<double>();
                stage.weak.push_back(wc);
            }
            if (stage.weak.empty()) fail(ErrorCode::Format, "cascade: empty stage");
            c.stages.push_back(std::move(stage));
        }
        const json& m = j.at("training_metadata");
        c.training.seed = m.at("seed").get<std::uint64_t>();
        c.training.position_stride = m.at("position_stride").get<int>();
        c.training.size_stride = m.at("size_stride").get<int>();
        c.training.feature_count = m.at("feature_count").get<std::size_t>();
        c.training.positives = m.at("positives").get<std::size_t>();
        c.training.negatives = m.at("negatives").get<std::size_t>();
        c.training.min_detection_rate = m.at("min_detection_rate").get<double>();
        c.training.max_false_positive_rate = m.at("max_false_positive_rate").get<double>();
        for (const json& r : m.at("stages"))
            c.training.stages.push_back({r.at("weak_count").get<int>(), r.at("negatives_in").get<std::size_t>(),
                                         r.at("detection_rate").get<double>(), r.at("false_positive_rate").get<double>()});
        return c;
    });
}

std::string to_json(const PcaModel& m) {
    JsonWriter w;
    w.begin_object();
    w.key("schema_version").value(kSchemaVersion);
    w.key("d").value(m.dimension());
    w.key("retained").value(m.retained);
    w.key("mean").values(m.standardization.mean);
    w.key("scale").values(m.standardization.scale);
    w.key("eigenvalues").values(m.eigenvalues);
    w.key("components").values(m.components.data());
    w.key("total_variance").value(m.total_variance);
    w.end_object();
    return w.str();
}

PcaModel pca_from_json(const std::string& text) {
    const json j = parse(text, "pca model");
    return guarded("pca model", [&] {
        PcaModel m;
        const auto d = j.at("d").get<std::size_t>();
        m.retained = j.at("retained").get<std::size_t>();
        m.standardization.mean = doubles(j.at("mean"));
        m.standardization.scale = doubles(j.at("scale"));
        m.eigenvalues = doubles(j.at("eigenvalues"));
        auto comps = doubles(j.at("components"));
        m.total_variance = j.at("total_variance").get<double>();
        if (m.standardization.mean.size() != d || m.standardization.scale.size() != d ||
            m.eigenvalues.size() != m.retained || comps.size() != m.retained * d)
            fail(ErrorCode::Format, "pca model: array lengths do not match d and retained");
        for (double s : m.standardization.scale)
            if (!(s > 0.0)) fail(ErrorCode::Format, "pca model: scale entries must be positive");
        m.components = Matrix(m.retained, d, std::move(comps));
        return m;
    });
}

std::string to_json(const KMeansModel& m) {
    JsonWriter w;
    w.begin_object();
    w.key("schema_version").value(kSchemaVersion);
    w.key("k").value(m.k);
    w.key("r").value(m.centroids.cols());
    w.key("centroids").values(m.centroids.data());
    w.key("inertia").value(m.inertia);
    w.key("iterations").value(m.iterations);
    w.key("seed").value(m.seed);
    w.key("restarts").value(m.restarts);
    w.key("best_restart").value(m.best_restart);
    w.end_object();
    return w.str();
}

KMeansModel kmeans_from_json(const std::string& text) {
    const json j = parse(text, "kmeans model");
    return guarded("kmeans model", [&] {
        KMeansModel m;
        m.k = j.at("k").get<std::size_t>();
        const auto r = j.at("r").get<std::size_t>();
        auto c = doubles(j.at("centroids"));
        if (m.k < 1 || c.size() != m.k * r) fail(ErrorCode::Format, "kmeans model: centroid array does not match k x r");
        m.centroids = Matrix(m.k, r, std::move(c));
        m.inertia = j.at("inertia").get<double>();
        m.iterations = j.value("iterations", 0);
        m.seed = j.at("seed").get<std::uint64_t>();
        m.restarts = j.at("restarts").get<int>();
        m.best_restart = j.value("best_restart", 0);
        return m;
    });
}

std::string to_json(const MlpModel& m) {
    JsonWriter w;
    w.begin_object();
    w.key("schema_version").value(kSchemaVersion);
    w.key("layer_sizes").begin_array();
    for (std::size_t s : m.layer_sizes) w.value(s);
    w.end_array();
    w.key("activation").value("relu_hidden_softmax_output");
    w.key("input_scale").value(m.input_scale);
    w.key("weights").begin_array();
    for (const auto& layer : m.layers) w.values(layer.weights.data());
    w.end_array();
    w.key("biases").begin_array();
    for (const auto& layer : m.layers) w.values(layer.biases);
    w.end_array();
    w.key("seed").value(m.init_seed);
    w.end_object();
    return w.str();
}

MlpModel mlp_from_json(const std::string& text) {
    const json j = parse(text, "mlp model");
    return guarded("mlp model", [&] {
        MlpModel m;
        m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        m.input_scale = j.value("input_scale", 1.0);
        m.init_seed = j.at("seed").get<std::uint64_t>();
        const json& wj = j.at("weights");
        const json& bj = j.at("biases");
        if (m.layer_sizes.size() < 2 || wj.size() != m.layer_sizes.size() - 1 || bj.size() != wj.size())
            fail(ErrorCode::Format, "mlp model: layer arrays do not match layer_sizes");
        for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
            const std::size_t in = m.layer_sizes[l], out = m.layer_sizes[l + 1];
            auto w = doubles(wj[l]);
            auto b = doubles(bj[l]);
            if (w.size() != in * out || b.size() != out)
                fail(ErrorCode::Format, "mlp model: layer " + std::to_string(l) + " has inconsistent dimensions");
            m.layers.push_back({Matrix(out, in, std::move(w)), std::move(b)});
        }
        return m;
    });
}

template <typename Model>
void save_model(const Model& model, const std::filesystem::path& path) {
    write_file_atomic(path, to_json(model));
}

template void save_model<Cascade>(const Cascade&, const std::filesystem::path&);
template void save_model<PcaModel>(const PcaModel&, const std::filesystem::path&);
template void save_model<KMeansModel>(const KMeansModel&, const std::filesystem::path&);
template void save_model<MlpModel>(const MlpModel&, const std::filesystem::path&);

Cascade load_cascade(const std::filesystem::path& path) { return cascade_from_json(read_file(path)); }
PcaModel load_pca(const std::filesystem::path& path) { return pca_from_json(read_file(path)); }
KMeansModel load_kmeans(const std::filesystem::path& path) { return kmeans_from_json(read_file(path)); }
MlpModel load_mlp(const std::filesystem::path& path) { return mlp_from_json(read_file(path)); }

}  // namespace faceclust
