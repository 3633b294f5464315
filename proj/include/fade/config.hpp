#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "fade/common.hpp"

namespace fade {

struct TrackerConfig {
    int budget = 16;          // hard cap on propagated track queries
    int det_queries = 16;
    int embed_dim = 32;
    int decoder_layers = 2;
    int feat_channels = 16;
    int num_classes = 8;
    double tau_keep = 0.7;
    double tau_drop = 0.3;
    int miss_tolerance = 5;
    double gamma = 0.5;       // updater momentum
    bool memory_enabled = true;
    int memory_depth = 8;
    double texture_gain = 4.0;  // fine-structure coupling into the state transition
    double lambda_cls = 2.0, lambda_l1 = 5.0, lambda_giou = 2.0;
    double box_head_gain = 0.004;
    double stability_threshold = 0.9;  // clean-run baseline check
    double sim_gate = 0.5;             // updater rejects re-association below this
    std::uint64_t seed = 1;

    void validate() const;
};

struct LossWeights {
    double flood = 1.0, cost = 1.0, siphon = 1.0;
    double decorr = 1.0, erase = 1.0;
    void validate() const;
};

enum class LossKind { Tqf, Tmc };
enum class AttackVector { Digital, Aai, Eai };
enum class AnchorMode { GroundTruth, TrackerPredictions };

struct AttackConfig {
    LossKind loss = LossKind::Tqf;
    AttackVector vector = AttackVector::Digital;
    double epsilon = 8.0 / 255.0;
    double alpha = 1.0 / 255.0;   // digital default; physical default 8/255
    int iters = 50;               // digital default; physical default 150
    int window = 1;               // consecutive frames perturbed
    AnchorMode anchor = AnchorMode::GroundTruth;
    LossWeights weights;
    std::uint64_t seed = 1;

    int aai_samples = 10;         // blur sample count, fixed during PGD
    int eai_stripes = 20;
    double eai_blend = 1.0;
    double eai_steepness = 50.0;
    bool eai_random_init = false;

    void validate() const;
};

struct Interval {
    double lo = 0.0, hi = 0.0;
    double clip(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
    double span() const { return hi - lo; }
};

// Calibrated physical parameter ranges. AAI amplitude/row defaults depend on
// the frame size, so unset intervals are resolved against it at attack time.
struct ParamBounds {
    bool aai_x_set = false, aai_y_set = false, aai_phi_set = false;
    bool eai_row_set = false, eai_width_set = false;
    Interval aai_x, aai_y, aai_phi;
    Interval eai_row, eai_width{5.0, 50.0};

    Interval resolved_aai_x(int frame_width) const;
    Interval resolved_aai_y(int frame_width) const;
    Interval resolved_aai_phi() const;
    Interval resolved_eai_row(int frame_height) const;
    Interval resolved_eai_width() const { return eai_width; }

    void validate() const;
};

double aai_displacement_cap(int frame_width);  // 3% of image width

struct RunConfig {
    TrackerConfig tracker;
    AttackConfig attack;
    ParamBounds bounds;
};

// Strict load: unknown keys are errors, missing keys take defaults.
// An empty or all-whitespace file means "all defaults".
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Fully-resolved echo, embedded in every result file.
nlohmann::json config_to_json(const RunConfig& cfg);

std::string to_string(LossKind k);
std::string to_string(AttackVector v);
std::string to_string(AnchorMode m);
LossKind loss_kind_from(const std::string& s);
AttackVector attack_vector_from(const std::string& s);
AnchorMode anchor_mode_from(const std::string& s);

}  // namespace fade
