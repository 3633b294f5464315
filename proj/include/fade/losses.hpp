#pragma once

#include <span>
#include <string>
#include <vector>

#include "fade/config.hpp"
#include "fade/tracker.hpp"

namespace fade {

// Loss surface of one frame's forward pass. Built once per PGD iteration.
struct FrameLossContext {
    std::vector<int> adv_set;            // unmatched detection-query indices
    Var adv_logits;                      // (|adv|, num_classes), valid when adv_set nonempty
    bool have_costs = false;
    Var adv_costs;                       // (|adv|, |anchors|)
    std::vector<Var> adv_states;         // would-be next embeddings, on tape
    std::vector<Var> matched_now;        // matched tracks' next embeddings, on tape
    std::vector<Tensor> matched_prev;    // same tracks one frame back
    std::vector<Tensor> anchor_states;   // previous frame's matched legit states
};

FrameLossContext build_loss_context(Tape& tape, const Tracker& tracker, const FrameOutput& out,
                                    const TrackerState& prev_state,
                                    const std::vector<BoxCw>& gt_targets,
                                    std::span<const Tensor> prev_matched_states,
                                    AnchorMode anchor_mode);

// spurious-confidence term: mean (1 - max_c sigmoid(z))^2 over the set
Var loss_flood(Tape& tape, Var adv_logits, bool* warned);

// smooth minimum of matching costs per anchor: mean_j -log sum_i exp(-C_ij)
Var loss_cost_mimicry(Tape& tape, Var adv_costs);

// negative mean pairwise cosine against previous legitimate states
Var loss_siphon(Tape& tape, std::span<const Var> adv_states,
                std::span<const Tensor> anchor_states, bool* warned);

// mean frame-to-frame cosine of identity-paired normalized states
Var loss_decorr(Tape& tape, std::span<const Var> h_now, std::span<const Tensor> h_prev,
                bool* warned);

// mean squared L2 norm of matched states
Var loss_erase(Tape& tape, std::span<const Var> h_matched, bool* warned);

struct CompositeLoss {
    Var value;
    std::vector<std::string> warnings;
};

// weighted sums; zero-weight components are skipped entirely, so an
// ablated composite is numerically identical to one computed without
// that component
CompositeLoss loss_tqf(Tape& tape, const FrameLossContext& ctx, const LossWeights& w);
CompositeLoss loss_tmc(Tape& tape, const FrameLossContext& ctx, const LossWeights& w);

CompositeLoss composite_loss(Tape& tape, LossKind kind, const FrameLossContext& ctx,
                             const LossWeights& w);

}  // namespace fade
