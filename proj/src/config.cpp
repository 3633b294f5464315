#include "fade/config.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "fade/image.hpp"

namespace fade {

using nlohmann::json;

void TrackerConfig::validate() const {
    if (budget < 1) throw DataError("tracker.budget must be >= 1");
    if (!(tau_drop > 0.0 && tau_drop <= tau_keep && tau_keep < 1.0))
        throw DataError("tracker thresholds must satisfy 0 < tau_drop <= tau_keep < 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DataError("tracker.gamma must be in (0,1]");
    if (det_queries < 1 || embed_dim < 1 || decoder_layers < 1 || feat_channels < 1 ||
        num_classes < 1 || memory_depth < 1)
        throw DataError("tracker dimensions must be positive");
    if (miss_tolerance < 0) throw DataError("tracker.miss_tolerance must be >= 0");
    if (sim_gate < -1.0 || sim_gate >= 1.0)
        throw DataError("tracker.sim_gate must lie in [-1, 1)");
}

void LossWeights::validate() const {
    if (flood < 0 || cost < 0 || siphon < 0 || decorr < 0 || erase < 0)
        throw DataError("loss weights must be nonnegative");
}

void AttackConfig::validate() const {
    if (vector == AttackVector::Digital && epsilon <= 0)
        throw DataError("attack.epsilon must be positive for digital attacks");
    if (alpha <= 0) throw DataError("attack.alpha must be positive");
    if (iters < 0) throw DataError("attack.iters must be >= 0");
    if (window < 1) throw DataError("attack.window must be >= 1");
    if (aai_samples < 2) throw DataError("attack.aai_samples must be >= 2");
    if (eai_stripes < 0) throw DataError("attack.eai_stripes must be >= 0");
    if (eai_blend < 0 || eai_blend > 1) throw DataError("attack.eai_blend must be in [0,1]");
    if (eai_steepness <= 0) throw DataError("attack.eai_steepness must be positive");
    weights.validate();
}

void ParamBounds::validate() const {
    auto check = [](bool set, const Interval& iv, const char* name) {
        if (set && iv.lo > iv.hi)
            throw DataError(std::string("bounds.") + name + ": lo must be <= hi");
    };
    check(aai_x_set, aai_x, "aai.x");
    check(aai_y_set, aai_y, "aai.y");
    check(aai_phi_set, aai_phi, "aai.phi");
    check(eai_row_set, eai_row, "eai.row");
    check(true, eai_width, "eai.width");
}

double aai_displacement_cap(int frame_width) { return 0.03 * frame_width; }

Interval ParamBounds::resolved_aai_x(int frame_width) const {
    return aai_x_set ? aai_x : Interval{0.0, aai_displacement_cap(frame_width)};
}
Interval ParamBounds::resolved_aai_y(int frame_width) const {
    return aai_y_set ? aai_y : Interval{0.0, aai_displacement_cap(frame_width)};
}
Interval ParamBounds::resolved_aai_phi() const {
    return aai_phi_set ? aai_phi : Interval{-3.14159265358979323846, 3.14159265358979323846};
}
Interval ParamBounds::resolved_eai_row(int frame_height) const {
    return eai_row_set ? eai_row : Interval{0.0, static_cast<double>(frame_height)};
}

std::string to_string(LossKind k) { return k == LossKind::Tqf ? "tqf" : "tmc"; }
std::string to_string(AttackVector v) {
    switch (v) {
        case AttackVector::Digital: return "digital";
        case AttackVector::Aai: return "aai";
        default: return "eai";
    }
}
std::string to_string(AnchorMode m) {
    return m == AnchorMode::GroundTruth ? "gt" : "pred";
}

LossKind loss_kind_from(const std::string& s) {
    if (s == "tqf") return LossKind::Tqf;
    if (s == "tmc") return LossKind::Tmc;
    throw DataError("unknown loss kind '" + s + "' (want tqf or tmc)");
}
AttackVector attack_vector_from(const std::string& s) {
    if (s == "digital") return AttackVector::Digital;
    if (s == "aai") return AttackVector::Aai;
    if (s == "eai") return AttackVector::Eai;
    throw DataError("unknown attack vector '" + s + "' (want digital, aai or eai)");
}
AnchorMode anchor_mode_from(const std::string& s) {
    if (s == "gt") return AnchorMode::GroundTruth;
    if (s == "pred") return AnchorMode::TrackerPredictions;
    throw DataError("unknown anchor mode '" + s + "' (want gt or pred)");
}

namespace {

class StrictSection {
public:
    StrictSection(const json& j, std::string name) : j_(j), name_(std::move(name)) {}

    template <class T>
    void get(const char* key, T& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw DataError("config key " + name_ + "." + key + ": " + e.what());
        }
    }

    void get_interval(const char* key, Interval& iv, bool& set_flag) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array() || v.size() != 2)
            throw DataError("config key " + name_ + "." + key + " must be [lo, hi]");
        iv.lo = v[0].get<double>();
        iv.hi = v[1].get<double>();
        set_flag = true;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!known_.count(it.key()))
                throw DataError("unknown config key " + name_ + "." + it.key());
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> known_;
};

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    bool only_ws = true;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) {
            only_ws = false;
            break;
        }
    if (only_ws) return cfg;

    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError(origin + ": config must be a JSON object");

    std::set<std::string> sections{"tracker", "attack", "weights", "bounds"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!sections.count(it.key()))
            throw DataError(origin + ": unknown config section '" + it.key() + "'");

    if (j.contains("tracker")) {
        StrictSection s(j["tracker"], "tracker");
        s.get("budget", cfg.tracker.budget);
        s.get("det_queries", cfg.tracker.det_queries);
        s.get("embed_dim", cfg.tracker.embed_dim);
        s.get("decoder_layers", cfg.tracker.decoder_layers);
        s.get("feat_channels", cfg.tracker.feat_channels);
        s.get("num_classes", cfg.tracker.num_classes);
        s.get("tau_keep", cfg.tracker.tau_keep);
        s.get("tau_drop", cfg.tracker.tau_drop);
        s.get("miss_tolerance", cfg.tracker.miss_tolerance);
        s.get("gamma", cfg.tracker.gamma);
        s.get("memory_enabled", cfg.tracker.memory_enabled);
        s.get("memory_depth", cfg.tracker.memory_depth);
        s.get("lambda_cls", cfg.tracker.lambda_cls);
        s.get("lambda_l1", cfg.tracker.lambda_l1);
        s.get("lambda_giou", cfg.tracker.lambda_giou);
        s.get("box_head_gain", cfg.tracker.box_head_gain);
        s.get("stability_threshold", cfg.tracker.stability_threshold);
        s.get("sim_gate", cfg.tracker.sim_gate);
        s.get("texture_gain", cfg.tracker.texture_gain);
        s.get("seed", cfg.tracker.seed);
        s.finish();
    }
    if (j.contains("attack")) {
        StrictSection s(j["attack"], "attack");
        std::string loss = to_string(cfg.attack.loss);
        std::string vector = to_string(cfg.attack.vector);
        std::string anchor = to_string(cfg.attack.anchor);
        s.get("loss", loss);
        s.get("vector", vector);
        s.get("anchor", anchor);
        cfg.attack.loss = loss_kind_from(loss);
        cfg.attack.vector = attack_vector_from(vector);
        cfg.attack.anchor = anchor_mode_from(anchor);
        // step size and iteration defaults differ between pixel and
        // physical-parameter attacks
        if (cfg.attack.vector != AttackVector::Digital) {
            cfg.attack.alpha = 8.0 / 255.0;
            cfg.attack.iters = 150;
        }
        s.get("epsilon", cfg.attack.epsilon);
        s.get("alpha", cfg.attack.alpha);
        s.get("iters", cfg.attack.iters);
        s.get("window", cfg.attack.window);
        s.get("seed", cfg.attack.seed);
        s.get("aai_samples", cfg.attack.aai_samples);
        s.get("eai_stripes", cfg.attack.eai_stripes);
        s.get("eai_blend", cfg.attack.eai_blend);
        s.get("eai_steepness", cfg.attack.eai_steepness);
        s.get("eai_random_init", cfg.attack.eai_random_init);
        s.finish();
    }
    if (j.contains("weights")) {
        StrictSection s(j["weights"], "weights");
        s.get("flood", cfg.attack.weights.flood);
        s.get("cost", cfg.attack.weights.cost);
        s.get("siphon", cfg.attack.weights.siphon);
        s.get("decorr", cfg.attack.weights.decorr);
        s.get("erase", cfg.attack.weights.erase);
        s.finish();
    }
    if (j.contains("bounds")) {
        const json& b = j["bounds"];
        std::set<std::string> sub{"aai", "eai"};
        for (auto it = b.begin(); it != b.end(); ++it)
            if (!sub.count(it.key()))
                throw DataError(origin + ": unknown config key bounds." + it.key());
        if (b.contains("aai")) {
            StrictSection s(b["aai"], "bounds.aai");
            s.get_interval("x", cfg.bounds.aai_x, cfg.bounds.aai_x_set);
            s.get_interval("y", cfg.bounds.aai_y, cfg.bounds.aai_y_set);
            s.get_interval("phi", cfg.bounds.aai_phi, cfg.bounds.aai_phi_set);
            s.finish();
        }
        if (b.contains("eai")) {
            StrictSection s(b["eai"], "bounds.eai");
            s.get_interval("row", cfg.bounds.eai_row, cfg.bounds.eai_row_set);
            bool width_set = false;
            s.get_interval("width", cfg.bounds.eai_width, width_set);
            cfg.bounds.eai_width_set = width_set;
            s.finish();
        }
    }

    cfg.tracker.validate();
    cfg.attack.validate();
    cfg.bounds.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    return parse_config_text(read_file(path), path);
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    json j;
    j["tracker"] = {{"budget", cfg.tracker.budget},
                    {"det_queries", cfg.tracker.det_queries},
                    {"embed_dim", cfg.tracker.embed_dim},
                    {"decoder_layers", cfg.tracker.decoder_layers},
                    {"feat_channels", cfg.tracker.feat_channels},
                    {"num_classes", cfg.tracker.num_classes},
                    {"tau_keep", cfg.tracker.tau_keep},
                    {"tau_drop", cfg.tracker.tau_drop},
                    {"miss_tolerance", cfg.tracker.miss_tolerance},
                    {"gamma", cfg.tracker.gamma},
                    {"memory_enabled", cfg.tracker.memory_enabled},
                    {"memory_depth", cfg.tracker.memory_depth},
                    {"lambda_cls", cfg.tracker.lambda_cls},
                    {"lambda_l1", cfg.tracker.lambda_l1},
                    {"lambda_giou", cfg.tracker.lambda_giou},
                    {"box_head_gain", cfg.tracker.box_head_gain},
                    {"stability_threshold", cfg.tracker.stability_threshold},
                    {"sim_gate", cfg.tracker.sim_gate},
                    {"texture_gain", cfg.tracker.texture_gain},
                    {"seed", cfg.tracker.seed}};
    j["attack"] = {{"loss", to_string(cfg.attack.loss)},
                   {"vector", to_string(cfg.attack.vector)},
                   {"anchor", to_string(cfg.attack.anchor)},
                   {"epsilon", cfg.attack.epsilon},
                   {"alpha", cfg.attack.alpha},
                   {"iters", cfg.attack.iters},
                   {"window", cfg.attack.window},
                   {"seed", cfg.attack.seed},
                   {"aai_samples", cfg.attack.aai_samples},
                   {"eai_stripes", cfg.attack.eai_stripes},
                   {"eai_blend", cfg.attack.eai_blend},
                   {"eai_steepness", cfg.attack.eai_steepness},
                   {"eai_random_init", cfg.attack.eai_random_init}};
    j["weights"] = {{"flood", cfg.attack.weights.flood},
                    {"cost", cfg.attack.weights.cost},
                    {"siphon", cfg.attack.weights.siphon},
                    {"decorr", cfg.attack.weights.decorr},
                    {"erase", cfg.attack.weights.erase}};
    json bounds = json::object();
    json aai = json::object();
    if (cfg.bounds.aai_x_set) aai["x"] = {cfg.bounds.aai_x.lo, cfg.bounds.aai_x.hi};
    if (cfg.bounds.aai_y_set) aai["y"] = {cfg.bounds.aai_y.lo, cfg.bounds.aai_y.hi};
    if (cfg.bounds.aai_phi_set) aai["phi"] = {cfg.bounds.aai_phi.lo, cfg.bounds.aai_phi.hi};
    json eai = json::object();
    if (cfg.bounds.eai_row_set) eai["row"] = {cfg.bounds.eai_row.lo, cfg.bounds.eai_row.hi};
    eai["width"] = {cfg.bounds.eai_width.lo, cfg.bounds.eai_width.hi};
    if (!aai.empty()) bounds["aai"] = aai;
    bounds["eai"] = eai;
    j["bounds"] = bounds;
    return j;
}

}  // namespace fade
