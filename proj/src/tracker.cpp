#include "fade/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "fade/assignment.hpp"
#include "fade/ops_util.hpp"

namespace fade {

void MemoryBank::append(int identity, const Tensor& h, int frame) {
    auto& ring = entries[identity];
    ring.push_back({h, frame});
    if (static_cast<int>(ring.size()) > depth) ring.erase(ring.begin());
}

namespace {

// Architecture gains. Confidence reads the image-driven residual of the
// decoder (never the carried state), so what sits under a query's reference
// point decides its score. The slightly supercritical MLP gain keeps the
// pipeline responsive to small pixel changes; the log compression stops
// object logits from saturating flat.
constexpr double kGainCross = 1.0;
constexpr double kAttnSharp = 4.0;  // steep routing: who a query listens to can flip
constexpr double kGainAttn = 1.0;
constexpr double kGainMlp = 0.6;
constexpr double kGainCls = 2.5;
constexpr double kClsBias = -3.0;
constexpr double kClsScale = 3.0;
constexpr double kEnergyScale = 2.0;
constexpr double kClassSpread = 0.05;
constexpr double kGainUpd = 0.35;
constexpr double kUpdInScale = 2.7;  // semi-saturated: near-threshold signs can flip
constexpr double kDetEmbedScale = 0.05;
// confidence head taps a small grid of feature-map points per query
constexpr int kClsTapsPerSide = 3;
constexpr double kClsTapSpacing = 1.6;  // feature cells

Tensor random_matrix(Rng& rng, int in, int out) {
    Tensor w = Tensor::zeros({in, out});
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.data) v = rng.normal(0.0, s);
    return w;
}

double inverse_sigmoid(double p) {
    p = std::clamp(p, 1e-4, 1.0 - 1e-4);
    return std::log(p / (1.0 - p));
}

Tensor tensor_row(const Tensor& m, int r) {
    int cols = m.dim(1);
    Tensor out = Tensor::zeros({cols});
    for (int c = 0; c < cols; ++c) out.data[static_cast<std::size_t>(c)] = m.at2(r, c);
    return out;
}

double plain_cosine(const Tensor& a, const Tensor& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        dot += a.data[i] * b.data[i];
        na += a.data[i] * a.data[i];
        nb += b.data[i] * b.data[i];
    }
    double d = std::sqrt(na) * std::sqrt(nb);
    return d > 1e-150 ? dot / d : 0.0;
}

}  // namespace

Tracker::Tracker(TrackerConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = Rng(cfg_.seed).fork(0xfadeu);
    int d = cfg_.embed_dim, c = cfg_.feat_channels;
    proj_ = random_matrix(rng, 3, c);
    w_cross_ = random_matrix(rng, c, d);
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
        w_q_.push_back(random_matrix(rng, d, d));
        w_k_.push_back(w_q_.back());  // shared: a query attends to its own kind
        w_v_.push_back(random_matrix(rng, d, d));
        w_mlp1_.push_back(random_matrix(rng, d, d));
        w_mlp2_.push_back(random_matrix(rng, d, d));
    }
    w_cls_ = random_matrix(rng, c * kClsTapsPerSide * kClsTapsPerSide, cfg_.num_classes);
    w_box_ = random_matrix(rng, d, 4);
    w_upd1_ = random_matrix(rng, d, d);
    w_upd2_ = random_matrix(rng, d, d);
    // rank-one coupling: the texture probe drives one shared direction
    {
        Tensor u = random_matrix(rng, c, 1);
        Tensor v = random_matrix(rng, 1, d);
        for (double& x : v.data) x = x > 0 ? 1.0 : -1.0;
        w_upd_detail_ = Tensor::zeros({c, d});
        for (int i = 0; i < c; ++i)
            for (int j = 0; j < d; ++j)
                w_upd_detail_.at2(i, j) = u.at2(i, 0) * v.at2(0, j);
    }
    det_embed_ = random_matrix(rng, cfg_.det_queries, d);
    // small detection embeddings keep empty-scene logits quiet; the image
    // evidence entering through cross-attention decides the confidence
    for (double& v : det_embed_.data) v *= kDetEmbedScale;

    // detection slots anchored on a grid; fresh ones are made every frame
    int n = cfg_.det_queries;
    int gw = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    int gh = (n + gw - 1) / gw;
    for (int k = 0; k < n; ++k) {
        BoxCw b;
        b.cx = (k % gw + 0.5) / gw;
        b.cy = (k / gw + 0.5) / gh;
        b.w = 0.22;
        b.h = 0.22;
        det_anchors_.push_back(b);
    }
}

TrackerState Tracker::initial_state() const {
    TrackerState s;
    if (cfg_.memory_enabled) {
        s.memory = MemoryBank{};
        s.memory->depth = cfg_.memory_depth;
    }
    return s;
}

Var Tracker::extract_features(Tape& tape, Var frame) const {
    const Tensor& f = tape.value(frame);
    if (f.rank() != 3 || f.dim(2) != 3)
        throw DataError("frame must be (H,W,3), got " + shape_str(f.shape));
    if (f.dim(0) < 16 || f.dim(1) < 16)
        throw DataError("frame must be at least 16x16, got " + shape_str(f.shape));
    if (f.dim(0) % 4 != 0 || f.dim(1) % 4 != 0)
        throw DataError("frame dimensions must be multiples of 4, got " + shape_str(f.shape));
    for (double v : f.data)
        if (v < 0.0 || v > 1.0)
            throw DataError("frame values must lie in [0,1]");
    int hf = f.dim(0) / 4, wf = f.dim(1) / 4;
    Var pooled = tape.avg_pool(frame, 4);
    Var flat = tape.reshape(pooled, {hf * wf, 3});
    Var feat = tape.matmul(flat, tape.constant(proj_));
    return tape.reshape(feat, {hf, wf, cfg_.feat_channels});
}

namespace {

// row-wise L2 normalization; direction is what attention routes on
Var normalize_rows(Tape& tape, Var x) {
    int rows = tape.value(x).dim(0);
    std::vector<Var> out;
    out.reserve(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        Var row = tape.slice_rows(x, r, 1);
        Var norm = max_t(tape, tape.l2norm(row), tape.scalar(1e-9));
        out.push_back(tape.div(row, norm));
    }
    return tape.concat_rows(out);
}

}  // namespace

Var Tracker::decode(Tape& tape, Var queries, Var features, const std::vector<BoxCw>& ref_boxes,
                    int feat_h, int feat_w) const {
    int q = static_cast<int>(ref_boxes.size());
    Tensor coords = Tensor::zeros({q, 2});
    for (int i = 0; i < q; ++i) {
        coords.at2(i, 0) = ref_boxes[static_cast<std::size_t>(i)].cx * feat_w - 0.5;
        coords.at2(i, 1) = ref_boxes[static_cast<std::size_t>(i)].cy * feat_h - 0.5;
    }
    Var coords_v = tape.constant(coords);

    Var h = queries;
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
        // (a) cross-attention: single-point sample at the reference center
        Var sample = tape.bilinear_sample(features, coords_v);
        h = h + tape.matmul(sample, tape.constant(w_cross_)) * kGainCross;
        // (b) self-attention over direction-normalized queries/keys/values,
        // so every query gets an equal voice regardless of magnitude
        Var qp = normalize_rows(tape, tape.matmul(h, tape.constant(w_q_[static_cast<std::size_t>(l)])));
        Var kp = normalize_rows(tape, tape.matmul(h, tape.constant(w_k_[static_cast<std::size_t>(l)])));
        Var vp = normalize_rows(tape, tape.matmul(h, tape.constant(w_v_[static_cast<std::size_t>(l)])));
        Var attn = tape.softmax_last(tape.matmul(qp, tape.transpose2d(kp)) * kAttnSharp);
        h = h + tape.matmul(attn, vp) * kGainAttn;
        // (c) bounded two-layer MLP with residual
        Var mid = tape.sigmoid(tape.matmul(h, tape.constant(w_mlp1_[static_cast<std::size_t>(l)])));
        mid = mid * 2.0 - 1.0;
        h = h + tape.matmul(mid, tape.constant(w_mlp2_[static_cast<std::size_t>(l)])) * kGainMlp;
    }
    return h;
}

// The state transition reads the decoder output and the local feature
// detail around the reference point. Flat appearance leaves the detail
// channel near zero; fine-grained structure there steers the next state.
Var Tracker::apply_updater(Tape& tape, Var decoded, Var detail) const {
    Var pre = tape.matmul(decoded, tape.constant(w_upd1_)) +
              tape.matmul(detail, tape.constant(w_upd_detail_)) * cfg_.texture_gain;
    Var mid = tape.sigmoid(pre * kUpdInScale);
    mid = mid * 2.0 - 1.0;
    return tape.matmul(mid, tape.constant(w_upd2_)) * kGainUpd;
}

Var Tracker::matching_costs(Tape& tape, Var boxes, Var confidence,
                            const std::vector<BoxCw>& anchors) const {
    Var qcx = col_vec(tape, boxes, 0);
    Var qcy = col_vec(tape, boxes, 1);
    Var qw = col_vec(tape, boxes, 2);
    Var qh = col_vec(tape, boxes, 3);
    Var ax0 = qcx - qw * 0.5, ax1 = qcx + qw * 0.5;
    Var ay0 = qcy - qh * 0.5, ay1 = qcy + qh * 0.5;
    Var area_q = qw * qh;
    Var cls_term = (1.0 - confidence) * cfg_.lambda_cls;

    int q = tape.value(confidence).dim(0);
    std::vector<Var> rows;
    for (const BoxCw& g : anchors) {
        Var l1 = abs_t(tape, qcx - g.cx) + abs_t(tape, qcy - g.cy) + abs_t(tape, qw - g.w) +
                 abs_t(tape, qh - g.h);
        double bx0 = g.cx - g.w / 2, bx1 = g.cx + g.w / 2;
        double by0 = g.cy - g.h / 2, by1 = g.cy + g.h / 2;
        Var iw = relu(tape, min_t(tape, ax1, tape.scalar(bx1)) - max_t(tape, ax0, tape.scalar(bx0)));
        Var ih = relu(tape, min_t(tape, ay1, tape.scalar(by1)) - max_t(tape, ay0, tape.scalar(by0)));
        Var inter = iw * ih;
        Var uni = area_q + g.w * g.h - inter;
        Var hull_w = max_t(tape, ax1, tape.scalar(bx1)) - min_t(tape, ax0, tape.scalar(bx0));
        Var hull_h = max_t(tape, ay1, tape.scalar(by1)) - min_t(tape, ay0, tape.scalar(by0));
        Var hull = hull_w * hull_h;
        Var giou_v = inter / uni - (hull - uni) / hull;
        Var col = cls_term + l1 * cfg_.lambda_l1 + (1.0 - giou_v) * cfg_.lambda_giou;
        rows.push_back(tape.reshape(col, {1, q}));
    }
    return tape.transpose2d(tape.concat_rows(rows));
}

FrameOutput Tracker::run_frame(Tape& tape, Var frame, const TrackerState& state,
                               const std::vector<BoxCw>& targets) const {
    const Tensor& f = tape.value(frame);
    int height = f.dim(0), width = f.dim(1);
    (void)height;
    (void)width;

    Var features = extract_features(tape, frame);
    int feat_h = f.dim(0) / 4, feat_w = f.dim(1) / 4;

    int m = static_cast<int>(state.track_queries.size());
    int n = cfg_.det_queries;
    int d = cfg_.embed_dim;

    std::vector<BoxCw> refs;
    refs.reserve(static_cast<std::size_t>(m + n));
    Tensor track_embeds = Tensor::zeros({m, d});
    for (int i = 0; i < m; ++i) {
        const TrackQuery& tq = state.track_queries[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) track_embeds.at2(i, j) = tq.embedding.data[static_cast<std::size_t>(j)];
        refs.push_back(tq.ref_box);
    }
    for (int i = 0; i < n; ++i) refs.push_back(det_anchors_[static_cast<std::size_t>(i)]);

    Var h0;
    if (m > 0) {
        std::vector<Var> parts{tape.constant(track_embeds), tape.constant(det_embed_)};
        h0 = tape.concat_rows(parts);
    } else {
        h0 = tape.constant(det_embed_);
    }

    FrameOutput out;
    out.num_tracks = m;
    out.frame_width = f.dim(1);
    out.frame_height = f.dim(0);
    out.decoded = decode(tape, h0, features, refs, feat_h, feat_w);

    // objectness from the image evidence around the reference point; the
    // tap grid widens the receptive field beyond the decoder's single sample
    int taps = kClsTapsPerSide * kClsTapsPerSide;
    int q_total = m + n;
    Tensor cls_coords = Tensor::zeros({q_total * taps, 2});
    int row = 0;
    for (int i = 0; i < q_total; ++i) {
        double cx = refs[static_cast<std::size_t>(i)].cx * feat_w - 0.5;
        double cy = refs[static_cast<std::size_t>(i)].cy * feat_h - 0.5;
        for (int ty = 0; ty < kClsTapsPerSide; ++ty)
            for (int tx = 0; tx < kClsTapsPerSide; ++tx) {
                cls_coords.at2(row, 0) = cx + (tx - kClsTapsPerSide / 2) * kClsTapSpacing;
                cls_coords.at2(row, 1) = cy + (ty - kClsTapsPerSide / 2) * kClsTapSpacing;
                ++row;
            }
    }
    Var cls_sample = tape.bilinear_sample(features, tape.constant(cls_coords));
    cls_sample = tape.reshape(cls_sample, {q_total, taps * cfg_.feat_channels});
    Var raw_cls = tape.matmul(cls_sample, tape.constant(w_cls_)) * kClsScale;
    // evidence energy shared across classes keeps the score ordering tied
    // to how much structure sits in the tap field
    Var energy = tape.log(tape.sum_last(tape.square(raw_cls)) * kEnergyScale + 1.0);
    Var base = tape.reshape(energy, {q_total, 1}) * kGainCls + kClsBias;
    Tensor ones_row = Tensor::full({1, cfg_.num_classes}, 1.0);
    Var base_full = tape.matmul(base, tape.constant(ones_row));
    out.logits = base_full + raw_cls * kClassSpread;
    out.confidence = tape.max_last(tape.sigmoid(out.logits));

    // local texture probe: half-cell finite differences at the reference
    // point; exactly zero over a flat interior, even in motion
    int c_feat = cfg_.feat_channels;
    Tensor diff_coords = Tensor::zeros({q_total * 4, 2});
    const double off[4][2] = {{0.5, 0}, {-0.5, 0}, {0, 0.5}, {0, -0.5}};
    row = 0;
    for (int i = 0; i < q_total; ++i) {
        double cx = refs[static_cast<std::size_t>(i)].cx * feat_w - 0.5;
        double cy = refs[static_cast<std::size_t>(i)].cy * feat_h - 0.5;
        for (auto& o : off) {
            diff_coords.at2(row, 0) = cx + o[0];
            diff_coords.at2(row, 1) = cy + o[1];
            ++row;
        }
    }
    Var diff_sample = tape.bilinear_sample(features, tape.constant(diff_coords));
    diff_sample = tape.reshape(diff_sample, {q_total, 4 * c_feat});
    Tensor detail_mix = Tensor::zeros({4 * c_feat, c_feat});
    for (int ch = 0; ch < c_feat; ++ch) {
        detail_mix.at2(0 * c_feat + ch, ch) = 1.0;
        detail_mix.at2(1 * c_feat + ch, ch) = -1.0;
        detail_mix.at2(2 * c_feat + ch, ch) = 1.0;
        detail_mix.at2(3 * c_feat + ch, ch) = -1.0;
    }
    Var detail = tape.matmul(diff_sample, tape.constant(detail_mix));

    int q = m + n;
    Tensor ref_logit = Tensor::zeros({q, 4});
    for (int i = 0; i < q; ++i) {
        const BoxCw& b = refs[static_cast<std::size_t>(i)];
        ref_logit.at2(i, 0) = inverse_sigmoid(b.cx);
        ref_logit.at2(i, 1) = inverse_sigmoid(b.cy);
        ref_logit.at2(i, 2) = inverse_sigmoid(b.w);
        ref_logit.at2(i, 3) = inverse_sigmoid(b.h);
    }
    Var offsets = tape.matmul(out.decoded, tape.constant(w_box_)) * cfg_.box_head_gain;
    out.boxes = tape.sigmoid(tape.constant(ref_logit) + offsets);
    out.updated = apply_updater(tape, out.decoded, detail);

    out.query_to_target.assign(static_cast<std::size_t>(q), -1);
    out.matched_query.assign(targets.size(), -1);
    if (!targets.empty()) {
        out.cost_matrix = matching_costs(tape, out.boxes, out.confidence, targets);
        // discrete assignment: gradients never flow through the indices
        const Tensor& cost = tape.value(tape.stop_gradient(out.cost_matrix));
        Assignment a = hungarian_solve(cost.data, q, static_cast<int>(targets.size()));
        for (int i = 0; i < q; ++i) {
            int j = a.row_to_col[static_cast<std::size_t>(i)];
            if (j >= 0) {
                out.query_to_target[static_cast<std::size_t>(i)] = j;
                out.matched_query[static_cast<std::size_t>(j)] = i;
            }
        }
    }
    for (int i = m; i < q; ++i)
        if (out.query_to_target[static_cast<std::size_t>(i)] < 0)
            out.adversarial_set.push_back(i);
    return out;
}

TrackerState Tracker::update_tracks(Tape& tape, const FrameOutput& out, const TrackerState& state,
                                    const std::vector<BoxCw>& targets,
                                    StateTraceFrame* trace_frame) const {
    int m = out.num_tracks;
    int q = m + cfg_.det_queries;
    const Tensor& conf = tape.value(out.confidence);
    const Tensor& boxes = tape.value(out.boxes);
    const Tensor& updated = tape.value(out.updated);

    struct Candidate {
        TrackQuery query;
        bool emit = false;
        BoxCw emit_box;
        bool matched_track = false;
        Tensor h_prev;
    };
    std::vector<Candidate> cands;

    TrackerState next;
    next.memory = state.memory;
    next.next_id = state.next_id;
    next.frame_index = state.frame_index + 1;

    for (int i = 0; i < m; ++i) {
        const TrackQuery& old = state.track_queries[static_cast<std::size_t>(i)];
        double c = conf.data[static_cast<std::size_t>(i)];
        int j = out.query_to_target[static_cast<std::size_t>(i)];
        bool accept = j >= 0;
        Tensor h_new;
        if (j >= 0) {
            Tensor h_upd = tensor_row(updated, i);
            h_new = Tensor::zeros({cfg_.embed_dim});
            for (int k = 0; k < cfg_.embed_dim; ++k)
                h_new.data[static_cast<std::size_t>(k)] =
                    (1.0 - cfg_.gamma) * old.embedding.data[static_cast<std::size_t>(k)] +
                    cfg_.gamma * h_upd.data[static_cast<std::size_t>(k)];
            // the frame's matched states are a fact of the assignment; the
            // gate below only decides whether the track accepts them
            if (trace_frame) {
                trace_frame->matched_ids.push_back(*old.identity);
                trace_frame->matched_h_now.push_back(h_new);
                trace_frame->matched_h_prev.push_back(old.embedding);
            }
            // re-association is only accepted while the state stays coherent
            // with its own history; a corrupted state severs the track. The
            // first update is exempt: birth happened under detection-slot
            // geometry and the state has not settled yet.
            if (old.age >= 1 && plain_cosine(h_new, old.embedding) < cfg_.sim_gate)
                accept = false;
        }
        if (accept) {
            Candidate cd;
            cd.query = old;
            cd.h_prev = old.embedding;
            cd.query.embedding = std::move(h_new);
            cd.query.ref_box = targets[static_cast<std::size_t>(j)];
            cd.query.miss_count = 0;
            cd.query.age = old.age + 1;
            cd.query.confidence = c;
            cd.emit = true;
            BoxCw eb{boxes.at2(i, 0), boxes.at2(i, 1), boxes.at2(i, 2), boxes.at2(i, 3)};
            cd.emit_box = eb;
            cd.matched_track = true;
            cands.push_back(std::move(cd));
        } else {
            TrackQuery kept = old;
            // a gate rejection still absorbs the incoherent state: the
            // track's own history is what got corrupted
            if (j >= 0) kept.embedding = h_new;
            kept.miss_count = old.miss_count + 1;
            kept.age = old.age + 1;
            kept.confidence = c;
            if (kept.miss_count > cfg_.miss_tolerance || c < cfg_.tau_drop) continue;  // dropped
            Candidate cd;
            cd.query = std::move(kept);
            cands.push_back(std::move(cd));
        }
    }

    // regions already claimed by a matched query this frame; an unmatched
    // detection re-firing inside one is a duplicate unless it out-scores
    // the incumbent, in which case it competes as a spurious birth
    struct Claim {
        BoxCw box;
        double conf;
        bool hard;
    };
    std::vector<Claim> claimed;
    for (int i = 0; i < q; ++i) {
        int j = out.query_to_target[static_cast<std::size_t>(i)];
        if (j < 0) continue;
        double c = conf.data[static_cast<std::size_t>(i)];
        // only queries that will actually hold the slot block newcomers
        if (i < m || c >= cfg_.tau_keep)
            claimed.push_back({targets[static_cast<std::size_t>(j)], c, true});
    }
    // surviving unmatched tracks hold their ground only while they still
    // out-score the newcomer; a stronger detection may re-acquire the spot
    for (int i = 0; i < m; ++i) {
        if (out.query_to_target[static_cast<std::size_t>(i)] >= 0) continue;
        const TrackQuery& old = state.track_queries[static_cast<std::size_t>(i)];
        double c = conf.data[static_cast<std::size_t>(i)];
        if (old.miss_count + 1 <= cfg_.miss_tolerance && c >= cfg_.tau_drop)
            claimed.push_back({old.ref_box, c, false});
    }
    // a detection can score on an object from as far as its tap field
    // reaches; claims must cover that whole ring
    double reach_x = ((kClsTapsPerSide / 2) * kClsTapSpacing * 4.0 + 6.0) /
                     std::max(1, out.frame_width);
    double reach_y = ((kClsTapsPerSide / 2) * kClsTapSpacing * 4.0 + 6.0) /
                     std::max(1, out.frame_height);
    auto suppressed_by_claim = [&](double cx, double cy, double det_conf) {
        for (const Claim& cl : claimed) {
            double hw = 0.6 * cl.box.w + reach_x, hh = 0.6 * cl.box.h + reach_y;
            if (cx >= cl.box.cx - hw && cx <= cl.box.cx + hw && cy >= cl.box.cy - hh &&
                cy <= cl.box.cy + hh && (cl.hard || det_conf < cl.conf))
                return true;
        }
        return false;
    };

    for (int i = m; i < q; ++i) {
        double c = conf.data[static_cast<std::size_t>(i)];
        if (c < cfg_.tau_keep) continue;
        int j = out.query_to_target[static_cast<std::size_t>(i)];
        BoxCw decoded_box{boxes.at2(i, 0), boxes.at2(i, 1), boxes.at2(i, 2), boxes.at2(i, 3)};
        const BoxCw& anchor = det_anchors_[static_cast<std::size_t>(i - m)];
        if (j < 0 && suppressed_by_claim(anchor.cx, anchor.cy, c)) continue;
        Candidate cd;
        cd.query.embedding = tensor_row(updated, i);
        cd.query.ref_box = j >= 0 ? targets[static_cast<std::size_t>(j)] : decoded_box;
        cd.query.identity = next.next_id++;
        cd.query.age = 0;
        cd.query.miss_count = 0;
        cd.query.confidence = c;
        cd.emit = true;
        cd.emit_box = decoded_box;
        cands.push_back(std::move(cd));
    }

    // zero-sum budget: keep the top-B by confidence; ties favor the older
    // track, then the smaller identity
    std::vector<int> order(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const TrackQuery& qa = cands[static_cast<std::size_t>(a)].query;
        const TrackQuery& qb = cands[static_cast<std::size_t>(b)].query;
        if (qa.confidence != qb.confidence) return qa.confidence > qb.confidence;
        if (qa.age != qb.age) return qa.age > qb.age;
        return qa.identity.value_or(1 << 30) < qb.identity.value_or(1 << 30);
    });
    std::vector<char> survives(cands.size(), 0);
    for (std::size_t r = 0; r < order.size() && r < static_cast<std::size_t>(cfg_.budget); ++r)
        survives[static_cast<std::size_t>(order[r])] = 1;

    if (trace_frame) trace_frame->frame_index = state.frame_index;

    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (!survives[i]) continue;
        Candidate& cd = cands[i];
        if (cd.emit && trace_frame) {
            trace_frame->emitted_ids.push_back(*cd.query.identity);
            trace_frame->emitted_boxes.push_back(cd.emit_box);
            trace_frame->emitted_confidence.push_back(cd.query.confidence);
        }
        if (next.memory && (cd.matched_track || cd.query.age == 0))
            next.memory->append(*cd.query.identity, cd.query.embedding, state.frame_index);
        next.track_queries.push_back(std::move(cd.query));
    }

    if (trace_frame) {
        trace_frame->live_tracks = static_cast<int>(next.track_queries.size());
        for (const TrackQuery& tq : next.track_queries)
            trace_frame->live_ids.push_back(*tq.identity);
        if (next.memory) {
            for (const auto& [id, ring] : next.memory->entries)
                for (const MemoryBank::Entry& e : ring)
                    trace_frame->memory_snapshot.emplace_back(id, e.embedding);
        }
    }
    return next;
}

std::vector<std::vector<BoxCw>> Tracker::targets_per_frame(const std::vector<Trajectory>& gt,
                                                           int num_frames, int width,
                                                           int height) {
    std::vector<std::vector<BoxCw>> out(static_cast<std::size_t>(num_frames));
    for (const Trajectory& t : gt)
        for (const TrackPoint& p : t.points) {
            int idx = p.frame - 1;  // trajectory frames are 1-based
            if (idx < 0 || idx >= num_frames) continue;
            out[static_cast<std::size_t>(idx)].push_back(to_normalized(p.box, width, height));
        }
    return out;
}

std::pair<std::vector<Trajectory>, StateTrace> Tracker::run_tracker(
    const Sequence& seq, const std::vector<Trajectory>& gt) const {
    if (seq.frames.empty()) throw DataError("sequence has no frames");
    int width = seq.frames[0].width, height = seq.frames[0].height;
    auto targets = targets_per_frame(gt, static_cast<int>(seq.frames.size()), width, height);

    StateTrace trace;
    trace.width = width;
    trace.height = height;
    TrackerState state = initial_state();
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        Tape tape;
        Var frame = tape.constant(seq.frames[t].to_tensor());
        FrameOutput out = run_frame(tape, frame, state, targets[t]);
        StateTraceFrame tf;
        state = update_tracks(tape, out, state, targets[t], &tf);
        trace.frames.push_back(std::move(tf));
    }
    return {trace_to_trajectories(trace), std::move(trace)};
}

std::vector<Trajectory> trace_to_trajectories(const StateTrace& trace) {
    std::map<int, Trajectory> by_id;
    for (const StateTraceFrame& f : trace.frames) {
        for (std::size_t i = 0; i < f.emitted_ids.size(); ++i) {
            int id = f.emitted_ids[i];
            Trajectory& t = by_id[id];
            t.id = id;
            t.points.push_back({f.frame_index + 1, to_pixels(f.emitted_boxes[i], trace.width,
                                                             trace.height)});
        }
    }
    std::vector<Trajectory> out;
    for (auto& [id, t] : by_id) out.push_back(std::move(t));
    return out;
}

MemoryDiagnostics memory_diagnostics(const StateTrace& trace, int frame_index) {
    const StateTraceFrame* tf = nullptr;
    for (const StateTraceFrame& f : trace.frames)
        if (f.frame_index == frame_index) tf = &f;
    if (!tf) throw DataError("frame " + std::to_string(frame_index) + " is not in the trace");

    MemoryDiagnostics d;
    std::size_t n = tf->memory_snapshot.size();
    for (const auto& [id, h] : tf->memory_snapshot) {
        d.identities.push_back(id);
        double ss = 0;
        for (double v : h.data) ss += v * v;
        d.l2_norms.push_back(std::sqrt(ss));
        double mean = 0;
        for (double v : h.data) mean += v;
        mean /= static_cast<double>(h.numel());
        double var = 0;
        for (double v : h.data) var += (v - mean) * (v - mean);
        d.std_devs.push_back(std::sqrt(var / static_cast<double>(h.numel())));
    }
    d.self_similarity.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            d.self_similarity[i][j] =
                plain_cosine(tf->memory_snapshot[i].second, tf->memory_snapshot[j].second);
    d.cross_similarity.assign(tf->matched_h_now.size(), std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < tf->matched_h_now.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
            d.cross_similarity[i][j] =
                plain_cosine(tf->matched_h_now[i], tf->memory_snapshot[j].second);
    return d;
}

// ---------------------------------------------------------------------------
// serialization

using nlohmann::json;

static json tensor_to_json(const Tensor& t) { return t.data; }

static Tensor tensor_from_json(const json& j) {
    std::vector<double> data = j.get<std::vector<double>>();
    return Tensor::vector(std::move(data));
}

json trace_to_json(const StateTrace& trace) {
    json frames = json::array();
    for (const StateTraceFrame& f : trace.frames) {
        json emitted = json::array();
        for (std::size_t i = 0; i < f.emitted_ids.size(); ++i) {
            const BoxCw& b = f.emitted_boxes[i];
            emitted.push_back({{"id", f.emitted_ids[i]},
                               {"box", {b.cx, b.cy, b.w, b.h}},
                               {"conf", f.emitted_confidence[i]}});
        }
        json matched = json::array();
        for (std::size_t i = 0; i < f.matched_ids.size(); ++i)
            matched.push_back({{"id", f.matched_ids[i]},
                               {"h_now", tensor_to_json(f.matched_h_now[i])},
                               {"h_prev", tensor_to_json(f.matched_h_prev[i])}});
        json memory = json::array();
        for (const auto& [id, h] : f.memory_snapshot)
            memory.push_back({{"id", id}, {"h", tensor_to_json(h)}});
        frames.push_back({{"frame", f.frame_index},
                          {"emitted", emitted},
                          {"matched", matched},
                          {"memory", memory},
                          {"live_ids", f.live_ids}});
    }
    return json{{"width", trace.width}, {"height", trace.height}, {"frames", frames}};
}

StateTrace trace_from_json(const json& j) {
    StateTrace trace;
    try {
        trace.width = j.at("width").get<int>();
        trace.height = j.at("height").get<int>();
        for (const json& fj : j.at("frames")) {
            StateTraceFrame f;
            f.frame_index = fj.at("frame").get<int>();
            for (const json& e : fj.at("emitted")) {
                f.emitted_ids.push_back(e.at("id").get<int>());
                auto b = e.at("box").get<std::vector<double>>();
                f.emitted_boxes.push_back(BoxCw{b[0], b[1], b[2], b[3]});
                f.emitted_confidence.push_back(e.at("conf").get<double>());
            }
            for (const json& mj : fj.at("matched")) {
                f.matched_ids.push_back(mj.at("id").get<int>());
                f.matched_h_now.push_back(tensor_from_json(mj.at("h_now")));
                f.matched_h_prev.push_back(tensor_from_json(mj.at("h_prev")));
            }
            for (const json& mj : fj.at("memory"))
                f.memory_snapshot.emplace_back(mj.at("id").get<int>(),
                                               tensor_from_json(mj.at("h")));
            f.live_ids = fj.at("live_ids").get<std::vector<int>>();
            f.live_tracks = static_cast<int>(f.live_ids.size());
            trace.frames.push_back(std::move(f));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("trace JSON: ") + e.what());
    }
    return trace;
}

json diagnostics_to_json(const MemoryDiagnostics& d) {
    return json{{"identities", d.identities},
                {"self_similarity", d.self_similarity},
                {"l2_norms", d.l2_norms},
                {"std_devs", d.std_devs},
                {"cross_similarity", d.cross_similarity}};
}

}  // namespace fade
