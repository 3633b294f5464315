#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fade/config.hpp"
#include "fade/geometry.hpp"
#include "fade/metrics.hpp"
#include "fade/synthetic.hpp"
#include "fade/tape.hpp"

namespace fade {

struct TrackQuery {
    Tensor embedding;         // (D)
    BoxCw ref_box;
    std::optional<int> identity;  // none for detection slots
    int age = 0;
    int miss_count = 0;
    double confidence = 0.0;
};

struct MemoryBank {
    struct Entry {
        Tensor embedding;
        int frame = 0;
    };
    // per-identity ring buffer of the most recent embeddings
    std::map<int, std::vector<Entry>> entries;
    int depth = 8;

    void append(int identity, const Tensor& h, int frame);
};

struct TrackerState {
    std::vector<TrackQuery> track_queries;  // |.| <= budget
    std::optional<MemoryBank> memory;
    int next_id = 1;
    int frame_index = 0;
};

// Everything the losses and diagnostics need from one frame's forward pass.
// Var handles stay valid for the lifetime of the tape the frame ran on.
struct FrameOutput {
    Var boxes;        // (Q,4) cxcywh, normalized
    Var logits;       // (Q,num_classes)
    Var confidence;   // (Q) = max_c sigmoid(logits)_c
    Var decoded;      // (Q,D) decoder outputs
    Var updated;      // (Q,D) would-be next embeddings (updater applied to all)
    int num_tracks = 0;  // first num_tracks rows are track queries, rest detection
    int frame_width = 0, frame_height = 0;
    std::vector<int> matched_query;      // per target: query index or -1
    std::vector<int> query_to_target;    // per query: target index or -1
    std::vector<int> adversarial_set;    // unmatched detection-query indices
    Var cost_matrix;  // (Q, n_targets) differentiable matching costs (invalid if no targets)
};

struct StateTraceFrame {
    int frame_index = 0;
    std::vector<int> emitted_ids;
    std::vector<BoxCw> emitted_boxes;
    std::vector<double> emitted_confidence;
    // matched track states by identity: h at this frame and h one frame back
    std::vector<int> matched_ids;
    std::vector<Tensor> matched_h_now;
    std::vector<Tensor> matched_h_prev;
    std::vector<std::pair<int, Tensor>> memory_snapshot;  // (identity, embedding) appended order
    int live_tracks = 0;
    std::vector<int> live_ids;
};

struct StateTrace {
    int width = 0, height = 0;
    std::vector<StateTraceFrame> frames;
};

nlohmann::json trace_to_json(const StateTrace& trace);
StateTrace trace_from_json(const nlohmann::json& j);

struct MemoryDiagnostics {
    std::vector<int> identities;            // bank entry order
    std::vector<std::vector<double>> self_similarity;
    std::vector<double> l2_norms;
    std::vector<double> std_devs;
    std::vector<std::vector<double>> cross_similarity;  // current states x bank entries
};

// Fixed random projection weights; never trained. The architecture, not the
// weights, carries the behavior under test.
class Tracker {
public:
    explicit Tracker(TrackerConfig cfg);

    const TrackerConfig& config() const { return cfg_; }

    TrackerState initial_state() const;

    Var extract_features(Tape& tape, Var frame) const;

    // frame: (H,W,3) in [0,1]; targets in normalized cxcywh
    FrameOutput run_frame(Tape& tape, Var frame, const TrackerState& state,
                          const std::vector<BoxCw>& targets) const;

    // differentiable matching costs for every query against each anchor box
    Var matching_costs(Tape& tape, Var boxes, Var confidence,
                       const std::vector<BoxCw>& anchors) const;

    // applies the update rule and returns the next state (detached values)
    TrackerState update_tracks(Tape& tape, const FrameOutput& out, const TrackerState& state,
                               const std::vector<BoxCw>& targets,
                               StateTraceFrame* trace_frame = nullptr) const;

    // full clean pass over a sequence; gt drives the runtime matching
    std::pair<std::vector<Trajectory>, StateTrace> run_tracker(
        const Sequence& seq, const std::vector<Trajectory>& gt) const;

    // per-frame targets in normalized coordinates, indexed 0-based
    static std::vector<std::vector<BoxCw>> targets_per_frame(const std::vector<Trajectory>& gt,
                                                             int num_frames, int width,
                                                             int height);

private:
    TrackerConfig cfg_;
    Tensor proj_;       // (3, C) pooled-pixel projection
    Tensor w_cross_;    // (C, D)
    std::vector<Tensor> w_q_, w_k_, w_v_, w_mlp1_, w_mlp2_;  // per layer
    Tensor w_cls_;      // (D, num_classes)
    Tensor w_box_;      // (D, 4)
    Tensor w_upd1_, w_upd2_;  // updater MLP (D,D)
    Tensor w_upd_detail_;     // (C,D) feature-detail conditioning
    Tensor det_embed_;  // (N_det, D)
    std::vector<BoxCw> det_anchors_;

    Var decode(Tape& tape, Var queries, Var features, const std::vector<BoxCw>& ref_boxes,
               int feat_h, int feat_w) const;
    Var apply_updater(Tape& tape, Var decoded, Var detail) const;

    friend MemoryDiagnostics memory_diagnostics(const StateTrace&, int);
};

MemoryDiagnostics memory_diagnostics(const StateTrace& trace, int frame_index);
nlohmann::json diagnostics_to_json(const MemoryDiagnostics& d);

std::vector<Trajectory> trace_to_trajectories(const StateTrace& trace);

}  // namespace fade
