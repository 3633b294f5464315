#include "fade/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fade {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Tracking context carried across the attack window: the state entering the
// frame and the previous frame's matched legitimate states (siphon anchors).
struct WarmState {
    TrackerState state;
    std::vector<Tensor> prev_matched;
};

WarmState warm_up(const Tracker& tracker, const Sequence& seq,
                  const std::vector<std::vector<BoxCw>>& targets, int upto_frame) {
    WarmState w;
    w.state = tracker.initial_state();
    for (int t = 0; t < upto_frame; ++t) {
        Tape tape;
        Var frame = tape.constant(seq.frames[static_cast<std::size_t>(t)].to_tensor());
        FrameOutput out = tracker.run_frame(tape, frame, w.state, targets[static_cast<std::size_t>(t)]);
        StateTraceFrame tf;
        w.state = tracker.update_tracks(tape, out, w.state, targets[static_cast<std::size_t>(t)], &tf);
        w.prev_matched = tf.matched_h_now;
    }
    return w;
}

void advance(const Tracker& tracker, WarmState& w, const Image& frame,
             const std::vector<BoxCw>& targets) {
    Tape tape;
    Var f = tape.constant(frame.to_tensor());
    FrameOutput out = tracker.run_frame(tape, f, w.state, targets);
    StateTraceFrame tf;
    w.state = tracker.update_tracks(tape, out, w.state, targets, &tf);
    w.prev_matched = tf.matched_h_now;
}

// adversarial objective: the attack ascends the negated composite loss, so
// a rising trace means the attack is working
Var frame_objective(Tape& tape, const Tracker& tracker, Var adv_frame, const WarmState& w,
                    const std::vector<BoxCw>& targets, const AttackConfig& cfg,
                    std::vector<std::string>* warnings) {
    FrameOutput out = tracker.run_frame(tape, adv_frame, w.state, targets);
    FrameLossContext ctx = build_loss_context(tape, tracker, out, w.state, targets,
                                              w.prev_matched, cfg.anchor);
    CompositeLoss comp = composite_loss(tape, cfg.loss, ctx, cfg.weights);
    if (warnings)
        for (const std::string& s : comp.warnings)
            if (std::find(warnings->begin(), warnings->end(), s) == warnings->end())
                warnings->push_back(s);
    return tape.neg(comp.value);
}

void check_frame_index(const Sequence& seq, int attack_frame, int window) {
    int n = static_cast<int>(seq.frames.size());
    if (attack_frame < 0 || attack_frame >= n)
        throw DataError("attack frame " + std::to_string(attack_frame) + " out of range [0," +
                        std::to_string(n - 1) + "]");
    if (attack_frame + window > n)
        throw DataError("attack window extends past the end of the sequence");
}

}  // namespace

FrameAttack pgd_digital_loop(const Tensor& clean_frame, double epsilon, double alpha, int iters,
                             const PixelObjective& objective, int* violations,
                             std::vector<std::string>* warnings) {
    (void)warnings;
    FrameAttack fa;
    Tensor delta = Tensor::zeros(clean_frame.shape);
    fa.best_loss = -std::numeric_limits<double>::infinity();

    auto evaluate = [&](bool with_grad, Tensor* grad_out) -> double {
        Tape tape;
        Var d = tape.leaf(delta, with_grad);
        Var frame = tape.clamp(tape.add(tape.constant(clean_frame), d), 0.0, 1.0);
        Var obj = objective(tape, frame, d);
        double v = tape.scalar_value(obj);
        if (with_grad) {
            tape.backward(obj);
            *grad_out = tape.grad(d);
        }
        return v;
    };

    auto consider = [&](double loss, int iter) {
        fa.loss_trace.push_back(loss);
        if (loss > fa.best_loss) {
            fa.best_loss = loss;
            fa.best_iteration = iter;
            fa.delta_best = delta;
        }
    };

    for (int k = 0; k < iters; ++k) {
        Tensor grad;
        double v;
        try {
            v = evaluate(true, &grad);
        } catch (const NumericError& e) {
            throw NumericError("pgd iteration " + std::to_string(k) + ": " + e.what());
        }
        consider(v, k);
        for (std::size_t i = 0; i < delta.numel(); ++i) {
            delta.data[i] += alpha * sign(grad.data[i]);
            delta.data[i] = std::clamp(delta.data[i], -epsilon, epsilon);
        }
        if (violations)
            for (double dv : delta.data)
                if (std::fabs(dv) > epsilon + 1e-12) ++*violations;
    }
    double final_v;
    try {
        final_v = evaluate(false, nullptr);
    } catch (const NumericError& e) {
        throw NumericError("pgd final evaluation: " + std::string(e.what()));
    }
    consider(final_v, iters);
    fa.delta_last = delta;
    if (fa.delta_best.numel() == 0) fa.delta_best = delta;
    return fa;
}

AttackResult pgd_digital(const Tracker& tracker, const Sequence& seq,
                         const std::vector<Trajectory>& gt, int attack_frame,
                         const AttackConfig& cfg) {
    check_frame_index(seq, attack_frame, cfg.window);
    int width = seq.frames[0].width, height = seq.frames[0].height;
    auto targets = Tracker::targets_per_frame(gt, static_cast<int>(seq.frames.size()), width,
                                              height);
    AttackResult result;
    result.vector = AttackVector::Digital;
    result.loss = cfg.loss;

    WarmState warm = warm_up(tracker, seq, targets, attack_frame);
    for (int t = attack_frame; t < attack_frame + cfg.window; ++t) {
        const Tensor clean = seq.frames[static_cast<std::size_t>(t)].to_tensor();
        PixelObjective obj = [&](Tape& tape, Var adv, Var) {
            return frame_objective(tape, tracker, adv, warm, targets[static_cast<std::size_t>(t)],
                                   cfg, &result.warnings);
        };
        FrameAttack fa = pgd_digital_loop(clean, cfg.epsilon, cfg.alpha, cfg.iters, obj,
                                          &result.bound_violations, &result.warnings);
        fa.frame_index = t;

        Tensor adv = clean;
        for (std::size_t i = 0; i < adv.numel(); ++i)
            adv.data[i] = std::clamp(adv.data[i] + fa.delta_best.data[i], 0.0, 1.0);
        Image adv_img = Image::from_tensor(adv);
        advance(tracker, warm, adv_img, targets[static_cast<std::size_t>(t)]);
        result.adversarial_frames.push_back(std::move(adv_img));
        result.frames.push_back(std::move(fa));
    }
    return result;
}

AttackResult pgd_aai(const Tracker& tracker, const Sequence& seq,
                     const std::vector<Trajectory>& gt, int attack_frame,
                     const AttackConfig& cfg, const ParamBounds& bounds) {
    check_frame_index(seq, attack_frame, cfg.window);
    int width = seq.frames[0].width, height = seq.frames[0].height;
    auto targets = Tracker::targets_per_frame(gt, static_cast<int>(seq.frames.size()), width,
                                              height);
    Interval bx = bounds.resolved_aai_x(width);
    Interval by = bounds.resolved_aai_y(width);
    Interval bphi = bounds.resolved_aai_phi();
    double d_max = aai_displacement_cap(width);

    AttackResult result;
    result.vector = AttackVector::Aai;
    result.loss = cfg.loss;

    WarmState warm = warm_up(tracker, seq, targets, attack_frame);
    for (int t = attack_frame; t < attack_frame + cfg.window; ++t) {
        const Tensor clean = seq.frames[static_cast<std::size_t>(t)].to_tensor();
        AaiParams p;
        p.x = bx.lo;
        p.y = by.lo;
        p.phi = bphi.lo;
        p.samples = cfg.aai_samples;

        FrameAttack fa;
        fa.frame_index = t;
        fa.best_loss = -std::numeric_limits<double>::infinity();

        auto evaluate = [&](bool with_grad, double* gx, double* gy, double* gphi) -> double {
            Tape tape;
            Var x = tape.leaf(Tensor::scalar(p.x), with_grad);
            Var y = tape.leaf(Tensor::scalar(p.y), with_grad);
            Var phi = tape.leaf(Tensor::scalar(p.phi), with_grad);
            Var adv = simulate_aai(tape, tape.constant(clean), x, y, phi, p.samples);
            Var obj = frame_objective(tape, tracker, adv, warm,
                                      targets[static_cast<std::size_t>(t)], cfg,
                                      &result.warnings);
            double v = tape.scalar_value(obj);
            if (with_grad) {
                tape.backward(obj);
                *gx = tape.grad(x).data[0];
                *gy = tape.grad(y).data[0];
                *gphi = tape.grad(phi).data[0];
            }
            return v;
        };

        auto check_constraints = [&] {
            if (p.x < bx.lo - 1e-12 || p.x > bx.hi + 1e-12 || p.y < by.lo - 1e-12 ||
                p.y > by.hi + 1e-12 || p.phi < bphi.lo - 1e-12 || p.phi > bphi.hi + 1e-12)
                ++result.bound_violations;
            for (int k = 1; k <= p.samples; ++k) {
                double s = std::sin(2.0 * kPi * k / p.samples + p.phi);
                double dx = p.x * s, dy = p.y * s;
                double norm = std::hypot(dx, dy);
                double scale = d_max / std::max(norm, d_max);
                if (std::hypot(dx * scale, dy * scale) > d_max + 1e-9) ++result.bound_violations;
            }
        };

        auto consider = [&](double loss, int iter) {
            fa.loss_trace.push_back(loss);
            if (loss > fa.best_loss) {
                fa.best_loss = loss;
                fa.best_iteration = iter;
                fa.aai_best = p;
            }
        };

        check_constraints();
        for (int k = 0; k < cfg.iters; ++k) {
            double gx = 0, gy = 0, gphi = 0, v = 0;
            try {
                v = evaluate(true, &gx, &gy, &gphi);
            } catch (const NumericError& e) {
                throw NumericError("aai pgd iteration " + std::to_string(k) + ": " + e.what());
            }
            consider(v, k);
            p.x += cfg.alpha * bx.span() * sign(gx);
            p.y += cfg.alpha * by.span() * sign(gy);
            p.phi += cfg.alpha * bphi.span() * sign(gphi);
            p = clip_params(p, bounds, width);
            check_constraints();
        }
        consider(evaluate(false, nullptr, nullptr, nullptr), cfg.iters);
        fa.aai_last = p;

        Image adv_img = simulate_aai(seq.frames[static_cast<std::size_t>(t)], fa.aai_best);
        advance(tracker, warm, adv_img, targets[static_cast<std::size_t>(t)]);
        result.adversarial_frames.push_back(std::move(adv_img));
        result.frames.push_back(std::move(fa));
    }
    (void)height;
    return result;
}

AttackResult pgd_eai(const Tracker& tracker, const Sequence& seq,
                     const std::vector<Trajectory>& gt, int attack_frame,
                     const AttackConfig& cfg, const ParamBounds& bounds) {
    check_frame_index(seq, attack_frame, cfg.window);
    int width = seq.frames[0].width, height = seq.frames[0].height;
    auto targets = Tracker::targets_per_frame(gt, static_cast<int>(seq.frames.size()), width,
                                              height);
    Interval brow = bounds.resolved_eai_row(height);
    Interval bwidth = bounds.resolved_eai_width();

    AttackResult result;
    result.vector = AttackVector::Eai;
    result.loss = cfg.loss;

    WarmState warm = warm_up(tracker, seq, targets, attack_frame);
    for (int t = attack_frame; t < attack_frame + cfg.window; ++t) {
        const Tensor clean = seq.frames[static_cast<std::size_t>(t)].to_tensor();
        int n = cfg.eai_stripes;
        EaiParams p;
        p.blend = cfg.eai_blend;
        p.steepness = cfg.eai_steepness;
        Rng rng = Rng(cfg.seed).fork(static_cast<std::uint64_t>(t));
        for (int k = 0; k < n; ++k) {
            double r = cfg.eai_random_init ? rng.uniform(brow.lo, brow.hi)
                                           : brow.lo + (brow.hi - brow.lo) * k / std::max(1, n);
            p.rows.push_back(r);
            p.widths.push_back(bwidth.lo);
        }
        p = clip_params(p, bounds, height);

        FrameAttack fa;
        fa.frame_index = t;
        fa.best_loss = -std::numeric_limits<double>::infinity();

        auto evaluate = [&](bool with_grad, Tensor* gr, Tensor* gw) -> double {
            Tape tape;
            Var rows = tape.leaf(Tensor::vector(p.rows), with_grad);
            Var widths = tape.leaf(Tensor::vector(p.widths), with_grad);
            Var adv = simulate_eai(tape, tape.constant(clean), rows, widths, p.blend,
                                   p.steepness);
            Var obj = frame_objective(tape, tracker, adv, warm,
                                      targets[static_cast<std::size_t>(t)], cfg,
                                      &result.warnings);
            double v = tape.scalar_value(obj);
            if (with_grad) {
                tape.backward(obj);
                *gr = tape.grad(rows);
                *gw = tape.grad(widths);
            }
            return v;
        };

        auto check_constraints = [&] {
            for (double r : p.rows)
                if (r < brow.lo - 1e-12 || r > brow.hi + 1e-12) ++result.bound_violations;
            for (double w : p.widths)
                if (w < bwidth.lo - 1e-12 || w > bwidth.hi + 1e-12) ++result.bound_violations;
        };

        auto consider = [&](double loss, int iter) {
            fa.loss_trace.push_back(loss);
            if (loss > fa.best_loss) {
                fa.best_loss = loss;
                fa.best_iteration = iter;
                fa.eai_best = p;
            }
        };

        check_constraints();
        for (int k = 0; k < cfg.iters; ++k) {
            Tensor gr, gw;
            double v = 0;
            try {
                v = evaluate(true, &gr, &gw);
            } catch (const NumericError& e) {
                throw NumericError("eai pgd iteration " + std::to_string(k) + ": " + e.what());
            }
            consider(v, k);
            for (int i = 0; i < n; ++i) {
                p.rows[static_cast<std::size_t>(i)] +=
                    cfg.alpha * brow.span() * sign(gr.data[static_cast<std::size_t>(i)]);
                p.widths[static_cast<std::size_t>(i)] +=
                    cfg.alpha * bwidth.span() * sign(gw.data[static_cast<std::size_t>(i)]);
            }
            p = clip_params(p, bounds, height);
            check_constraints();
        }
        consider(evaluate(false, nullptr, nullptr), cfg.iters);
        fa.eai_last = p;

        Image adv_img = simulate_eai(seq.frames[static_cast<std::size_t>(t)], fa.eai_best);
        advance(tracker, warm, adv_img, targets[static_cast<std::size_t>(t)]);
        result.adversarial_frames.push_back(std::move(adv_img));
        result.frames.push_back(std::move(fa));
    }
    return result;
}

AttackResult run_attack(const Tracker& tracker, const Sequence& seq,
                        const std::vector<Trajectory>& gt, int attack_frame,
                        const AttackConfig& cfg, const ParamBounds& bounds) {
    switch (cfg.vector) {
        case AttackVector::Digital:
            return pgd_digital(tracker, seq, gt, attack_frame, cfg);
        case AttackVector::Aai:
            return pgd_aai(tracker, seq, gt, attack_frame, cfg, bounds);
        case AttackVector::Eai:
            return pgd_eai(tracker, seq, gt, attack_frame, cfg, bounds);
    }
    throw UsageError("unknown attack vector");
}

Sequence apply_attack_frames(const Sequence& seq, const AttackResult& result) {
    Sequence out = seq;
    for (std::size_t i = 0; i < result.frames.size(); ++i) {
        int t = result.frames[i].frame_index;
        out.frames[static_cast<std::size_t>(t)] = result.adversarial_frames[i];
    }
    return out;
}

nlohmann::json attack_result_to_json(const AttackResult& result) {
    using nlohmann::json;
    json frames = json::array();
    for (const FrameAttack& fa : result.frames) {
        json fj{{"frame", fa.frame_index},
                {"loss_trace", fa.loss_trace},
                {"best_loss", fa.best_loss},
                {"best_iteration", fa.best_iteration}};
        if (result.vector == AttackVector::Digital) {
            fj["delta_best"] = fa.delta_best.data;
            fj["delta_last"] = fa.delta_last.data;
        } else if (result.vector == AttackVector::Aai) {
            fj["params_best"] = {{"x", fa.aai_best.x},
                                 {"y", fa.aai_best.y},
                                 {"phi", fa.aai_best.phi},
                                 {"samples", fa.aai_best.samples}};
            fj["params_last"] = {{"x", fa.aai_last.x},
                                 {"y", fa.aai_last.y},
                                 {"phi", fa.aai_last.phi},
                                 {"samples", fa.aai_last.samples}};
        } else {
            fj["params_best"] = {{"rows", fa.eai_best.rows},
                                 {"widths", fa.eai_best.widths},
                                 {"blend", fa.eai_best.blend},
                                 {"steepness", fa.eai_best.steepness}};
            fj["params_last"] = {{"rows", fa.eai_last.rows},
                                 {"widths", fa.eai_last.widths},
                                 {"blend", fa.eai_last.blend},
                                 {"steepness", fa.eai_last.steepness}};
        }
        frames.push_back(std::move(fj));
    }
    return json{{"vector", to_string(result.vector)},
                {"loss", to_string(result.loss)},
                {"bound_violations", result.bound_violations},
                {"warnings", result.warnings},
                {"frames", frames}};
}

}  // namespace fade
