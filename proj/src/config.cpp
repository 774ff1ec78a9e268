#include "adaradar/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace adaradar {

using json = nlohmann::ordered_json;

namespace {

// Reads keys of `j` into fields, rejecting keys nobody asked for.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object()) {
            throw std::invalid_argument(where_ + ": expected an object");
        }
    }

    template <typename T>
    void get(const char* key, T& field)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        try {
            field = it->template get<T>();
        } catch (const json::exception&) {
            throw std::invalid_argument(where_ + "." + key + ": wrong type");
        }
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw std::invalid_argument(where_ + ": unknown key '" + it.key() + "'");
            }
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

json to_json(const ModelConfig& c)
{
    return {{"frames", c.frames},
            {"num_classes", c.num_classes},
            {"dims", {{"range", c.dims.range}, {"angle", c.dims.angle}, {"doppler", c.dims.doppler}}},
            {"enc_channels", c.enc_channels},
            {"n_blocks", c.n_blocks},
            {"heads", c.heads},
            {"k_h", c.k_h},
            {"k_w", c.k_w},
            {"no_adaptive", c.no_adaptive},
            {"background_prior", c.background_prior}};
}

ModelConfig model_from(const json& j)
{
    ModelConfig c;
    Reader r(j, "model");
    r.get("frames", c.frames);
    r.get("num_classes", c.num_classes);
    if (const json* d = r.child("dims")) {
        Reader rd(*d, "model.dims");
        rd.get("range", c.dims.range);
        rd.get("angle", c.dims.angle);
        rd.get("doppler", c.dims.doppler);
        rd.finish();
    }
    r.get("enc_channels", c.enc_channels);
    r.get("n_blocks", c.n_blocks);
    r.get("heads", c.heads);
    r.get("k_h", c.k_h);
    r.get("k_w", c.k_w);
    r.get("no_adaptive", c.no_adaptive);
    r.get("background_prior", c.background_prior);
    r.finish();
    return c;
}

json to_json(const LossWeights& w)
{
    return {{"alpha1", w.alpha1},   {"alpha2", w.alpha2}, {"alpha3", w.alpha3},
            {"delta", w.delta},     {"use_oc", w.use_oc}, {"use_cl", w.use_cl},
            {"use_sd", w.use_sd},   {"use_mv", w.use_mv}, {"use_coherence", w.use_coherence},
            {"coherence_weight", w.coherence_weight}};
}

LossWeights loss_from(const json& j)
{
    LossWeights w;
    Reader r(j, "loss");
    r.get("alpha1", w.alpha1);
    r.get("alpha2", w.alpha2);
    r.get("alpha3", w.alpha3);
    r.get("delta", w.delta);
    r.get("use_oc", w.use_oc);
    r.get("use_cl", w.use_cl);
    r.get("use_sd", w.use_sd);
    r.get("use_mv", w.use_mv);
    r.get("use_coherence", w.use_coherence);
    r.get("coherence_weight", w.coherence_weight);
    r.finish();
    return w;
}

json to_json(const DataConfig& d)
{
    return {{"num_samples", d.num_samples},
            {"train_fraction", d.train_fraction},
            {"val_fraction", d.val_fraction},
            {"min_objects", d.min_objects},
            {"max_objects", d.max_objects},
            {"one_of_each_class", d.one_of_each_class},
            {"speckle_min", d.speckle_min},
            {"speckle_max", d.speckle_max},
            {"ghost_max", d.ghost_max},
            {"ghost_amplitude", d.ghost_amplitude},
            {"max_drift", d.max_drift},
            {"foreground_cap", d.foreground_cap}};
}

DataConfig data_from(const json& j)
{
    DataConfig d;
    Reader r(j, "data");
    r.get("num_samples", d.num_samples);
    r.get("train_fraction", d.train_fraction);
    r.get("val_fraction", d.val_fraction);
    r.get("min_objects", d.min_objects);
    r.get("max_objects", d.max_objects);
    r.get("one_of_each_class", d.one_of_each_class);
    r.get("speckle_min", d.speckle_min);
    r.get("speckle_max", d.speckle_max);
    r.get("ghost_max", d.ghost_max);
    r.get("ghost_amplitude", d.ghost_amplitude);
    r.get("max_drift", d.max_drift);
    r.get("foreground_cap", d.foreground_cap);
    r.finish();
    return d;
}

json to_json(const AblationRow& a)
{
    return {{"name", a.name}, {"oc", a.oc},   {"cl", a.cl},
            {"sd", a.sd},     {"coherence", a.coherence}, {"mv", a.mv},
            {"no_adaptive", a.no_adaptive}};
}

AblationRow row_from(const json& j)
{
    AblationRow a;
    Reader r(j, "ablation row");
    r.get("name", a.name);
    r.get("oc", a.oc);
    r.get("cl", a.cl);
    r.get("sd", a.sd);
    r.get("coherence", a.coherence);
    r.get("mv", a.mv);
    r.get("no_adaptive", a.no_adaptive);
    r.finish();
    return a;
}

json parse_text(const std::string& text, const char* what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string(what) + ": invalid JSON: " + e.what());
    }
}

} // namespace

void TrainConfig::validate() const
{
    model.validate();
    loss.validate();
    if (!(lr > 0.0)) {
        throw std::invalid_argument("lr must be positive");
    }
    if (batch_size == 0) {
        throw std::invalid_argument("batch_size must be at least 1");
    }
    if (scheduler.type != "exponential") {
        throw std::invalid_argument("unsupported scheduler '" + scheduler.type + "'");
    }
    if (scheduler.step == 0 || !(scheduler.gamma > 0.0)) {
        throw std::invalid_argument("scheduler step and gamma must be positive");
    }
    if (model.num_classes != synth::kNumClasses) {
        throw std::invalid_argument("the synthetic data has " + std::to_string(synth::kNumClasses) +
                                    " classes; model.num_classes is " +
                                    std::to_string(model.num_classes));
    }
    if (data.train_fraction < 0 || data.val_fraction < 0 ||
        data.train_fraction + data.val_fraction > 1.0 + 1e-12) {
        throw std::invalid_argument("data split fractions must be non-negative and sum to at most 1");
    }
}

std::vector<AblationRow> default_ablation_matrix()
{
    return {
        {"OC+CL+MV", true, true, false, false, true, false},
        {"OC+CL+SD", true, true, true, false, false, false},
        {"CL+SD+MV", false, true, true, false, true, false},
        {"OC+SD+MV", true, false, true, false, true, false},
        {"OC+CL+SD+CoL", true, true, true, true, false, false},
        {"OC+CL+SD+MV", true, true, true, false, true, false},
        {"SD", false, false, true, false, false, false},
        {"No Adaptive", true, true, true, false, true, true},
    };
}

TrainConfig apply_row(const TrainConfig& base, const AblationRow& row)
{
    TrainConfig c = base;
    c.loss.use_oc = row.oc;
    c.loss.use_cl = row.cl;
    c.loss.use_sd = row.sd;
    c.loss.use_coherence = row.coherence;
    c.loss.use_mv = row.mv;
    c.model.no_adaptive = row.no_adaptive;
    return c;
}

synth::GenerateOptions generate_options(const TrainConfig& config)
{
    synth::GenerateOptions g;
    g.dims = config.model.dims;
    g.num_samples = config.data.num_samples;
    g.train_fraction = config.data.train_fraction;
    g.val_fraction = config.data.val_fraction;
    auto& s = g.sampler;
    s.frames = config.model.frames;
    s.min_objects = config.data.min_objects;
    s.max_objects = config.data.max_objects;
    s.one_of_each_class = config.data.one_of_each_class;
    s.speckle_min = config.data.speckle_min;
    s.speckle_max = config.data.speckle_max;
    s.ghost_max = config.data.ghost_max;
    s.ghost_amplitude = config.data.ghost_amplitude;
    s.max_drift = config.data.max_drift;
    s.foreground_cap = config.data.foreground_cap;
    return g;
}

TrainConfig parse_train_config(const std::string& json_text)
{
    json j = parse_text(json_text, "config");
    TrainConfig c;
    Reader r(j, "config");
    r.get("dataset", c.dataset);
    if (const json* d = r.child("data")) {
        c.data = data_from(*d);
    }
    if (const json* m = r.child("model")) {
        c.model = model_from(*m);
    }
    if (const json* l = r.child("loss")) {
        c.loss = loss_from(*l);
    }
    r.get("batch_size", c.batch_size);
    r.get("lr", c.lr);
    if (const json* s = r.child("scheduler")) {
        Reader rs(*s, "scheduler");
        rs.get("type", c.scheduler.type);
        rs.get("step", c.scheduler.step);
        rs.get("gamma", c.scheduler.gamma);
        rs.finish();
    }
    r.get("epochs", c.epochs);
    r.get("seed", c.seed);
    r.get("max_batches_per_epoch", c.max_batches_per_epoch);
    if (const json* a = r.child("ablation")) {
        if (!a->is_array()) {
            throw std::invalid_argument("config.ablation: expected an array");
        }
        for (const auto& row : *a) {
            c.ablation.push_back(row_from(row));
        }
    }
    r.finish();
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_train_config(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::string train_config_json(const TrainConfig& c)
{
    json rows = json::array();
    for (const auto& row : c.ablation) {
        rows.push_back(to_json(row));
    }
    json j = {{"dataset", c.dataset},
              {"data", to_json(c.data)},
              {"model", to_json(c.model)},
              {"loss", to_json(c.loss)},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"scheduler",
               {{"type", c.scheduler.type}, {"step", c.scheduler.step}, {"gamma", c.scheduler.gamma}}},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"max_batches_per_epoch", c.max_batches_per_epoch},
              {"ablation", rows}};
    return j.dump(2);
}

ModelConfig parse_model_config(const std::string& json_text)
{
    return model_from(parse_text(json_text, "model config"));
}

std::string model_config_json(const ModelConfig& config) { return to_json(config).dump(); }

} // namespace adaradar
