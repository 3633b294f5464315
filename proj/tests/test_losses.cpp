#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fade/gradcheck.hpp"
#include "fade/losses.hpp"
#include "fade/ops_util.hpp"

using namespace fade;

namespace {

// logits whose per-row sigmoid max equals the requested confidence
Tensor logits_for_conf(const std::vector<double>& confs, int classes = 4) {
    Tensor z = Tensor::full({static_cast<int>(confs.size()), classes}, -30.0);
    for (std::size_t i = 0; i < confs.size(); ++i) {
        double p = confs[i];
        z.at2(static_cast<int>(i), 0) = std::log(p / (1.0 - p));
    }
    return z;
}

Var leaf_vec(Tape& t, std::vector<double> v) { return t.leaf(Tensor::vector(std::move(v)), true); }

}  // namespace

TEST_CASE("flood loss") {
    Tape t;
    bool warned = false;
    SUBCASE("perfect confidence is the fixed point") {
        Var z = t.constant(logits_for_conf({0.999999999}));
        CHECK(t.scalar_value(loss_flood(t, z, &warned)) == doctest::Approx(0.0).epsilon(1e-8));
    }
    SUBCASE("half confidence gives a quarter") {
        Var z = t.constant(logits_for_conf({0.5}));
        CHECK(t.scalar_value(loss_flood(t, z, &warned)) == doctest::Approx(0.25));
    }
    SUBCASE("mean over two queries") {
        Var z = t.constant(logits_for_conf({0.2, 0.6}));
        CHECK(t.scalar_value(loss_flood(t, z, &warned)) == doctest::Approx(0.40));
    }
    SUBCASE("empty set warns and returns zero") {
        Var z = t.constant(Tensor({0, 4}, {}));
        CHECK(t.scalar_value(loss_flood(t, z, &warned)) == 0.0);
        CHECK(warned);
    }
}

TEST_CASE("cost mimicry") {
    Tape t;
    SUBCASE("single query passes its cost through") {
        Var c = t.constant(Tensor({1, 1}, {0.7}));
        CHECK(t.scalar_value(loss_cost_mimicry(t, c)) == doctest::Approx(0.7));
    }
    SUBCASE("two costs for one anchor") {
        Var c = t.constant(Tensor({2, 1}, {0.5, 5.0}));
        double expected = -std::log(std::exp(-0.5) + std::exp(-5.0));
        CHECK(t.scalar_value(loss_cost_mimicry(t, c)) == doctest::Approx(expected));
        CHECK(expected == doctest::Approx(0.48898).epsilon(1e-3));
    }
    SUBCASE("smooth-min sandwich over random matrices") {
        Rng rng(8);
        for (int trial = 0; trial < 200; ++trial) {
            int k = 1 + static_cast<int>(rng.uniform_index(6));
            Tensor c = Tensor::zeros({k, 1});
            double mn = 1e9;
            for (double& v : c.data) {
                v = rng.uniform(-2.0, 8.0);
                mn = std::min(mn, v);
            }
            Tape t2;
            double v = t2.scalar_value(loss_cost_mimicry(t2, t2.constant(c)));
            CHECK(v <= mn + 1e-12);
            CHECK(v >= mn - std::log(static_cast<double>(k)) - 1e-12);
        }
    }
    SUBCASE("empty adversarial set is an error") {
        Var c = t.constant(Tensor({0, 2}, {}));
        CHECK_THROWS_AS(loss_cost_mimicry(t, c), DataError);
        Var c2 = t.constant(Tensor({2, 0}, {}));
        CHECK_THROWS_AS(loss_cost_mimicry(t, c2), DataError);
    }
}

TEST_CASE("siphon loss") {
    Tape t;
    bool warned = false;
    SUBCASE("identical unit states pin at minus one") {
        std::vector<Var> adv{leaf_vec(t, {1, 0, 0})};
        std::vector<Tensor> anchors{Tensor::vector({1, 0, 0}), Tensor::vector({1, 0, 0})};
        CHECK(t.scalar_value(loss_siphon(t, adv, anchors, &warned)) == doctest::Approx(-1.0));
    }
    SUBCASE("orthogonal pairs give zero") {
        std::vector<Var> adv{leaf_vec(t, {1, 0, 0})};
        std::vector<Tensor> anchors{Tensor::vector({0, 1, 0})};
        CHECK(t.scalar_value(loss_siphon(t, adv, anchors, &warned)) == doctest::Approx(0.0));
    }
    SUBCASE("mean over mixed pairs") {
        std::vector<Var> adv{leaf_vec(t, {1, 0, 0})};
        std::vector<Tensor> anchors{Tensor::vector({1, 0, 0}), Tensor::vector({0, 1, 0})};
        CHECK(t.scalar_value(loss_siphon(t, adv, anchors, &warned)) == doctest::Approx(-0.5));
    }
    SUBCASE("empty anchor set warns") {
        std::vector<Var> adv{leaf_vec(t, {1.0, 0, 0})};
        std::vector<Tensor> anchors;
        CHECK(t.scalar_value(loss_siphon(t, adv, anchors, &warned)) == 0.0);
        CHECK(warned);
    }
}

TEST_CASE("decorrelation loss") {
    Tape t;
    bool warned = false;
    SUBCASE("identical states give one") {
        std::vector<Var> now{leaf_vec(t, {0.6, 0.8, 0})};
        std::vector<Tensor> prev{Tensor::vector({0.6, 0.8, 0})};
        CHECK(t.scalar_value(loss_decorr(t, now, prev, &warned)) == doctest::Approx(1.0));
    }
    SUBCASE("orthogonal states give zero") {
        std::vector<Var> now{leaf_vec(t, {1, 0, 0})};
        std::vector<Tensor> prev{Tensor::vector({0, 0, 2})};
        CHECK(t.scalar_value(loss_decorr(t, now, prev, &warned)) == doctest::Approx(0.0));
    }
    SUBCASE("opposite states give minus one") {
        std::vector<Var> now{leaf_vec(t, {0.3, -0.1, 0.2})};
        std::vector<Tensor> prev{Tensor::vector({-0.3, 0.1, -0.2})};
        CHECK(t.scalar_value(loss_decorr(t, now, prev, &warned)) == doctest::Approx(-1.0));
    }
    SUBCASE("no pairs warns") {
        std::vector<Var> now;
        std::vector<Tensor> prev;
        CHECK(t.scalar_value(loss_decorr(t, now, prev, &warned)) == 0.0);
        CHECK(warned);
    }
}

TEST_CASE("erasure loss") {
    Tape t;
    bool warned = false;
    SUBCASE("origin is the minimum") {
        std::vector<Var> h{leaf_vec(t, {0, 0, 0})};
        CHECK(t.scalar_value(loss_erase(t, h, &warned)) == doctest::Approx(0.0));
    }
    SUBCASE("unit vector gives one") {
        std::vector<Var> h{leaf_vec(t, {0, 1, 0})};
        CHECK(t.scalar_value(loss_erase(t, h, &warned)) == doctest::Approx(1.0));
    }
    SUBCASE("3-4 vector gives twenty-five") {
        std::vector<Var> h{leaf_vec(t, {3, 4})};
        CHECK(t.scalar_value(loss_erase(t, h, &warned)) == doctest::Approx(25.0));
    }
    SUBCASE("empty warns") {
        std::vector<Var> h;
        CHECK(t.scalar_value(loss_erase(t, h, &warned)) == 0.0);
        CHECK(warned);
    }
}

namespace {

FrameLossContext toy_context(Tape& t) {
    FrameLossContext ctx;
    ctx.adv_set = {0, 1};
    ctx.adv_logits = t.constant(logits_for_conf({0.3, 0.7}));
    ctx.adv_costs = t.constant(Tensor({2, 2}, {0.5, 1.2, 2.0, 0.8}));
    ctx.have_costs = true;
    ctx.adv_states = {t.constant(Tensor::vector({0.5, 0.1, 0})),
                      t.constant(Tensor::vector({0.2, 0.9, 0.1}))};
    ctx.anchor_states = {Tensor::vector({1.0, 0, 0})};
    ctx.matched_now = {t.constant(Tensor::vector({0.4, 0.3, 0.2}))};
    ctx.matched_prev = {Tensor::vector({0.5, 0.2, 0.3})};
    return ctx;
}

}  // namespace

TEST_CASE("composites are additive and ablate exactly") {
    Tape t;
    FrameLossContext ctx = toy_context(t);
    bool w = false;

    double flood = t.scalar_value(loss_flood(t, ctx.adv_logits, &w));
    double cost = t.scalar_value(loss_cost_mimicry(t, ctx.adv_costs));
    double siphon = t.scalar_value(loss_siphon(t, ctx.adv_states, ctx.anchor_states, &w));
    double decorr = t.scalar_value(loss_decorr(t, ctx.matched_now, ctx.matched_prev, &w));
    double erase = t.scalar_value(loss_erase(t, ctx.matched_now, &w));

    SUBCASE("tqf reductions") {
        CHECK(t.scalar_value(loss_tqf(t, ctx, LossWeights{1, 0, 0, 0, 0}).value) ==
              doctest::Approx(flood));
        CHECK(t.scalar_value(loss_tqf(t, ctx, LossWeights{0, 0, 0, 0, 0}).value) == 0.0);
        CHECK(t.scalar_value(loss_tqf(t, ctx, LossWeights{1, 1, 1, 0, 0}).value) ==
              doctest::Approx(flood + cost + siphon));
    }
    SUBCASE("tmc reductions") {
        CHECK(t.scalar_value(loss_tmc(t, ctx, LossWeights{0, 0, 0, 1, 0}).value) ==
              doctest::Approx(decorr));
        CHECK(t.scalar_value(loss_tmc(t, ctx, LossWeights{0, 0, 0, 0, 1}).value) ==
              doctest::Approx(erase));
        CHECK(t.scalar_value(loss_tmc(t, ctx, LossWeights{0, 0, 0, 1, 1}).value) ==
              doctest::Approx(decorr + erase));
    }
    SUBCASE("zero weight equals component removal exactly") {
        LossWeights no_cost{1, 0, 1, 0, 0};
        double with_flag = t.scalar_value(loss_tqf(t, ctx, no_cost).value);
        CHECK(with_flag == doctest::Approx(flood + siphon).epsilon(1e-15));
    }
    SUBCASE("empty adversarial set makes tqf zero with a warning") {
        FrameLossContext empty;
        CompositeLoss cl = loss_tqf(t, empty, LossWeights{});
        CHECK(t.scalar_value(cl.value) == 0.0);
        CHECK(!cl.warnings.empty());
    }
}

TEST_CASE("loss gradients match finite differences") {
    SUBCASE("flood w.r.t. logits") {
        Tensor z = logits_for_conf({0.3, 0.7});
        auto fn = [](Tape& t, Var v) {
            bool w = false;
            return loss_flood(t, v, &w);
        };
        CHECK(check_gradient(fn, z, 1e-4, 1e-4).passed);
    }
    SUBCASE("cost mimicry w.r.t. the cost matrix") {
        Tensor c({2, 3}, {0.5, 1.2, 2.0, 0.8, 1.4, 0.3});
        auto fn = [](Tape& t, Var v) { return loss_cost_mimicry(t, v); };
        CHECK(check_gradient(fn, c, 1e-4, 1e-4).passed);
    }
    SUBCASE("siphon w.r.t. adversarial states") {
        Tensor s = Tensor::vector({0.5, 0.1, -0.3});
        auto fn = [](Tape& t, Var v) {
            bool w = false;
            std::vector<Var> adv{v};
            std::vector<Tensor> anchors{Tensor::vector({1.0, 0.2, 0.1}),
                                        Tensor::vector({-0.4, 0.8, 0.2})};
            return loss_siphon(t, adv, anchors, &w);
        };
        CHECK(check_gradient(fn, s, 1e-4, 1e-4).passed);
    }
    SUBCASE("decorr w.r.t. current states") {
        Tensor s = Tensor::vector({0.5, 0.1, -0.3});
        auto fn = [](Tape& t, Var v) {
            bool w = false;
            std::vector<Var> now{v};
            std::vector<Tensor> prev{Tensor::vector({0.2, -0.6, 0.4})};
            return loss_decorr(t, now, prev, &w);
        };
        CHECK(check_gradient(fn, s, 1e-4, 1e-4).passed);
    }
    SUBCASE("erase w.r.t. states") {
        Tensor s = Tensor::vector({0.5, 0.1, -0.3, 0.9});
        auto fn = [](Tape& t, Var v) {
            bool w = false;
            std::vector<Var> h{v};
            return loss_erase(t, h, &w);
        };
        CHECK(check_gradient(fn, s, 1e-4, 1e-4).passed);
    }
}

TEST_CASE("loss range invariants") {
    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        Tape t;
        bool w = false;
        int d = 4;
        auto rand_vec = [&](double lo, double hi) {
            Tensor v = Tensor::zeros({d});
            for (double& x : v.data) x = rng.uniform(lo, hi);
            return v;
        };
        std::vector<Var> adv{t.constant(rand_vec(-1, 1)), t.constant(rand_vec(-1, 1))};
        std::vector<Tensor> anchors{rand_vec(-1, 1)};
        double siphon = t.scalar_value(loss_siphon(t, adv, anchors, &w));
        CHECK(siphon >= -1.0 - 1e-12);
        CHECK(siphon <= 1.0 + 1e-12);
        std::vector<Var> now{t.constant(rand_vec(-1, 1))};
        std::vector<Tensor> prev{rand_vec(-1, 1)};
        double dec = t.scalar_value(loss_decorr(t, now, prev, &w));
        CHECK(dec >= -1.0 - 1e-12);
        CHECK(dec <= 1.0 + 1e-12);
    }
}

TEST_CASE("cost mimicry anchors can come from tracker predictions") {
    SceneSpec spec;
    spec.length = 3;
    ObjectSpec o;
    o.cx = 24;
    o.cy = 24;
    o.w = 16;
    o.h = 14;
    o.r = 0.9;
    o.g = 0.6;
    o.b = 0.3;
    spec.objects = {o};
    SyntheticScene s = gen_synthetic_sequence(spec);
    TrackerConfig tcfg;
    tcfg.det_queries = 16;
    tcfg.embed_dim = 16;
    tcfg.feat_channels = 8;
    Tracker tracker(tcfg);
    auto targets = Tracker::targets_per_frame(s.ground_truth, 3, 64, 64);

    TrackerState state = tracker.initial_state();
    std::vector<Tensor> prev;
    for (int t = 0; t < 2; ++t) {
        Tape tape;
        FrameOutput out = tracker.run_frame(
            tape, tape.constant(s.sequence.frames[static_cast<std::size_t>(t)].to_tensor()),
            state, targets[static_cast<std::size_t>(t)]);
        StateTraceFrame tf;
        state = tracker.update_tracks(tape, out, state, targets[static_cast<std::size_t>(t)], &tf);
        prev = tf.matched_h_now;
    }
    Tape tape;
    FrameOutput out = tracker.run_frame(tape, tape.constant(s.sequence.frames[2].to_tensor()),
                                        state, targets[2]);

    FrameLossContext gt_ctx = build_loss_context(tape, tracker, out, state, targets[2], prev,
                                                 AnchorMode::GroundTruth);
    FrameLossContext pred_ctx = build_loss_context(tape, tracker, out, state, targets[2], prev,
                                                   AnchorMode::TrackerPredictions);
    REQUIRE(gt_ctx.have_costs);
    REQUIRE(pred_ctx.have_costs);
    double v_gt = tape.scalar_value(loss_cost_mimicry(tape, gt_ctx.adv_costs));
    double v_pred = tape.scalar_value(loss_cost_mimicry(tape, pred_ctx.adv_costs));
    // anchors differ (GT box vs predicted box) but both are live surfaces
    CHECK(std::isfinite(v_gt));
    CHECK(std::isfinite(v_pred));
    CHECK(v_gt != v_pred);

    // no matched tracks -> prediction anchors unavailable, cost skipped with warning
    TrackerState empty_state = tracker.initial_state();
    Tape t2;
    FrameOutput out2 = tracker.run_frame(t2, t2.constant(s.sequence.frames[0].to_tensor()),
                                         empty_state, {});
    FrameLossContext ctx2 = build_loss_context(t2, tracker, out2, empty_state, {}, {},
                                               AnchorMode::TrackerPredictions);
    CHECK(!ctx2.have_costs);
    CompositeLoss cl = loss_tqf(t2, ctx2, LossWeights{});
    bool warned_about_anchors = false;
    for (const std::string& w : cl.warnings)
        if (w.find("anchor") != std::string::npos) warned_about_anchors = true;
    CHECK(warned_about_anchors);
}
