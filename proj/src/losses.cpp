#include "fade/losses.hpp"

#include <cmath>

#include "fade/ops_util.hpp"

namespace fade {

FrameLossContext build_loss_context(Tape& tape, const Tracker& tracker, const FrameOutput& out,
                                    const TrackerState& prev_state,
                                    const std::vector<BoxCw>& gt_targets,
                                    std::span<const Tensor> prev_matched_states,
                                    AnchorMode anchor_mode) {
    FrameLossContext ctx;
    ctx.adv_set = out.adversarial_set;
    double gamma = tracker.config().gamma;

    if (!ctx.adv_set.empty()) ctx.adv_logits = tape.gather_rows(out.logits, ctx.adv_set);
    for (int i : ctx.adv_set) ctx.adv_states.push_back(row_vec(tape, out.updated, i));

    for (int i = 0; i < out.num_tracks; ++i) {
        if (out.query_to_target[static_cast<std::size_t>(i)] < 0) continue;
        const Tensor& prev = prev_state.track_queries[static_cast<std::size_t>(i)].embedding;
        Var upd = row_vec(tape, out.updated, i);
        Var now = tape.constant(prev) * (1.0 - gamma) + upd * gamma;
        ctx.matched_now.push_back(now);
        ctx.matched_prev.push_back(prev);
    }

    ctx.anchor_states.assign(prev_matched_states.begin(), prev_matched_states.end());

    std::vector<BoxCw> anchors;
    if (anchor_mode == AnchorMode::GroundTruth) {
        anchors = gt_targets;
    } else {
        const Tensor& boxes = tape.value(out.boxes);
        for (int i = 0; i < out.num_tracks; ++i)
            if (out.query_to_target[static_cast<std::size_t>(i)] >= 0)
                anchors.push_back(
                    BoxCw{boxes.at2(i, 0), boxes.at2(i, 1), boxes.at2(i, 2), boxes.at2(i, 3)});
    }
    if (!anchors.empty() && !ctx.adv_set.empty()) {
        Var adv_boxes = tape.gather_rows(out.boxes, ctx.adv_set);
        Var adv_conf = tape.gather_rows(out.confidence, ctx.adv_set);
        ctx.adv_costs = tracker.matching_costs(tape, adv_boxes, adv_conf, anchors);
        ctx.have_costs = true;
    }
    return ctx;
}

Var loss_flood(Tape& tape, Var adv_logits, bool* warned) {
    const Tensor& z = tape.value(adv_logits);
    if (z.numel() == 0 || z.dim(0) == 0) {
        if (warned) *warned = true;
        return tape.scalar(0.0);
    }
    Var conf = tape.max_last(tape.sigmoid(adv_logits));
    return tape.mean(tape.square(1.0 - conf));
}

Var loss_cost_mimicry(Tape& tape, Var adv_costs) {
    const Tensor& c = tape.value(adv_costs);
    if (c.rank() != 2 || c.dim(0) == 0)
        throw DataError("cost mimicry: no adversarial queries to mimic with");
    if (c.dim(1) == 0) throw DataError("cost mimicry: anchor set is empty");
    Var sums = tape.sum_last(tape.transpose2d(tape.exp(tape.neg(adv_costs))));  // per anchor
    return tape.mean(tape.neg(tape.log(sums)));
}

Var loss_siphon(Tape& tape, std::span<const Var> adv_states,
                std::span<const Tensor> anchor_states, bool* warned) {
    if (adv_states.empty() || anchor_states.empty()) {
        if (warned) *warned = true;
        return tape.scalar(0.0);
    }
    Var acc = tape.scalar(0.0);
    for (const Var& a : adv_states)
        for (const Tensor& b : anchor_states) acc = acc + tape.cosine(a, tape.constant(b));
    double count = static_cast<double>(adv_states.size() * anchor_states.size());
    return tape.neg(acc / count);
}

Var loss_decorr(Tape& tape, std::span<const Var> h_now, std::span<const Tensor> h_prev,
                bool* warned) {
    if (h_now.empty() || h_now.size() != h_prev.size()) {
        if (warned) *warned = true;
        return tape.scalar(0.0);
    }
    Var acc = tape.scalar(0.0);
    for (std::size_t i = 0; i < h_now.size(); ++i) {
        Var a = h_now[i];
        Var norm_a = max_t(tape, tape.l2norm(a), tape.scalar(1e-12));
        Var a_n = a / norm_a;
        Tensor b = h_prev[i];
        double nb = 0;
        for (double v : b.data) nb += v * v;
        nb = std::sqrt(nb);
        if (nb > 1e-12)
            for (double& v : b.data) v /= nb;
        acc = acc + tape.cosine(a_n, tape.constant(b));
    }
    return acc / static_cast<double>(h_now.size());
}

Var loss_erase(Tape& tape, std::span<const Var> h_matched, bool* warned) {
    if (h_matched.empty()) {
        if (warned) *warned = true;
        return tape.scalar(0.0);
    }
    Var acc = tape.scalar(0.0);
    for (const Var& h : h_matched) acc = acc + tape.square(tape.l2norm(h));
    return acc / static_cast<double>(h_matched.size());
}

CompositeLoss loss_tqf(Tape& tape, const FrameLossContext& ctx, const LossWeights& w) {
    CompositeLoss out;
    out.value = tape.scalar(0.0);
    if (ctx.adv_set.empty()) {
        out.warnings.push_back("no unmatched detection queries this frame; flooding has no surface");
        return out;
    }
    if (w.flood > 0.0) {
        bool warned = false;
        Var flood = loss_flood(tape, ctx.adv_logits, &warned);
        out.value = out.value + flood * w.flood;
        if (warned) out.warnings.push_back("flooding term had an empty query set");
    }
    if (w.cost > 0.0) {
        if (ctx.have_costs) {
            out.value = out.value + loss_cost_mimicry(tape, ctx.adv_costs) * w.cost;
        } else {
            out.warnings.push_back("anchor set empty; cost mimicry skipped this frame");
        }
    }
    if (w.siphon > 0.0) {
        bool warned = false;
        Var s = loss_siphon(tape, ctx.adv_states, ctx.anchor_states, &warned);
        out.value = out.value + s * w.siphon;
        if (warned) out.warnings.push_back("no previous matched states; siphoning has no surface");
    }
    return out;
}

CompositeLoss loss_tmc(Tape& tape, const FrameLossContext& ctx, const LossWeights& w) {
    CompositeLoss out;
    out.value = tape.scalar(0.0);
    bool warned_d = false, warned_e = false;
    if (w.decorr > 0.0) {
        Var d = loss_decorr(tape, ctx.matched_now, ctx.matched_prev, &warned_d);
        out.value = out.value + d * w.decorr;
        if (warned_d) out.warnings.push_back("no matched track pairs; decorrelation has no surface");
    }
    if (w.erase > 0.0) {
        Var e = loss_erase(tape, ctx.matched_now, &warned_e);
        out.value = out.value + e * w.erase;
        if (warned_e) out.warnings.push_back("no matched states; erasure has no surface");
    }
    return out;
}

CompositeLoss composite_loss(Tape& tape, LossKind kind, const FrameLossContext& ctx,
                             const LossWeights& w) {
    return kind == LossKind::Tqf ? loss_tqf(tape, ctx, w) : loss_tmc(tape, ctx, w);
}

}  // namespace fade
