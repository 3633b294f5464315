#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "fade/attack.hpp"
#include "fade/config.hpp"
#include "fade/gradcheck.hpp"
#include "fade/image.hpp"
#include "fade/losses.hpp"
#include "fade/metrics.hpp"
#include "fade/mot_io.hpp"
#include "fade/spoof.hpp"
#include "fade/synthetic.hpp"
#include "fade/tracker.hpp"

namespace fs = std::filesystem;
using namespace fade;
using nlohmann::json;

namespace {

// sequence directory layout: seqinfo.json + frames/NNNNNN.png + gt.txt

void save_sequence(const Sequence& seq, const std::vector<Trajectory>& gt,
                   const std::string& dir) {
    fs::create_directories(fs::path(dir) / "frames");
    json info{{"name", seq.name},
              {"fps", seq.fps},
              {"width", seq.frames.at(0).width},
              {"height", seq.frames.at(0).height},
              {"length", seq.frames.size()}};
    write_file_atomic((fs::path(dir) / "seqinfo.json").string(), info.dump(2) + "\n");
    char name[32];
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(name, sizeof(name), "%06zu.png", i + 1);
        save_image(seq.frames[i], (fs::path(dir) / "frames" / name).string());
    }
    write_mot(gt, (fs::path(dir) / "gt.txt").string());
}

Sequence load_sequence(const std::string& dir) {
    json info;
    try {
        info = json::parse(read_file((fs::path(dir) / "seqinfo.json").string()));
    } catch (const json::exception& e) {
        throw DataError(dir + "/seqinfo.json: " + e.what());
    }
    Sequence seq;
    seq.name = info.at("name").get<std::string>();
    seq.fps = info.at("fps").get<double>();
    std::size_t length = info.at("length").get<std::size_t>();
    char name[32];
    for (std::size_t i = 0; i < length; ++i) {
        std::snprintf(name, sizeof(name), "%06zu.png", i + 1);
        seq.frames.push_back(load_image((fs::path(dir) / "frames" / name).string()));
    }
    if (seq.frames.empty()) throw DataError(dir + ": sequence has no frames");
    return seq;
}

std::vector<Trajectory> load_sequence_gt(const std::string& dir) {
    return parse_mot((fs::path(dir) / "gt.txt").string());
}

RunConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return load_config(path);
}

json eval_report_to_json(const EvalReport& r) {
    return json{{"HOTA", r.hota},         {"DetA", r.deta},
                {"AssA", r.assa},         {"IDF1", r.idf1},
                {"IDR", r.idr},           {"IDP", r.idp},
                {"IDSW", r.idsw},         {"IDSW_per_track", r.idsw_per_track},
                {"alphas", r.alphas},     {"HOTA_alpha", r.hota_alpha},
                {"DetA_alpha", r.deta_alpha}, {"AssA_alpha", r.assa_alpha}};
}

EvalReport eval_report_from_json(const json& j) {
    EvalReport r;
    r.hota = j.at("HOTA").get<double>();
    r.deta = j.at("DetA").get<double>();
    r.assa = j.at("AssA").get<double>();
    r.idf1 = j.at("IDF1").get<double>();
    r.idr = j.at("IDR").get<double>();
    r.idp = j.at("IDP").get<double>();
    r.idsw = j.at("IDSW").get<int>();
    r.idsw_per_track = j.at("IDSW_per_track").get<double>();
    return r;
}

int run_gradcheck_suite(const std::string& target);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial workbench for query-propagation multi-object tracking"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic sequence with ground truth");
    std::string gen_preset = "sparse", gen_out;
    std::uint64_t gen_seed = 1;
    gen->add_option("--preset", gen_preset, "sparse | crossing | dense");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    // track
    auto* track = app.add_subcommand("track", "run the tracker over a sequence");
    std::string track_seq, track_config, track_out, track_trace;
    track->add_option("--seq", track_seq, "sequence directory")->required();
    track->add_option("--config", track_config, "config file (JSON)");
    track->add_option("--out", track_out, "predictions file (MOT rows)")->required();
    track->add_option("--trace", track_trace, "state trace output (JSON)");

    // attack
    auto* attack = app.add_subcommand("attack", "optimize an adversarial perturbation");
    std::string atk_seq, atk_config, atk_vector, atk_loss, atk_out;
    int atk_frame = 0, atk_window = 0;
    attack->add_option("--seq", atk_seq, "sequence directory")->required();
    attack->add_option("--config", atk_config, "config file (JSON)");
    attack->add_option("--vector", atk_vector, "digital | aai | eai");
    attack->add_option("--loss", atk_loss, "tqf | tmc");
    attack->add_option("--frame", atk_frame, "first attacked frame (0-based)")->required();
    attack->add_option("--window", atk_window, "consecutive frames perturbed");
    attack->add_option("--out", atk_out, "output directory")->required();

    // defend
    auto* defend = app.add_subcommand("defend", "apply an input-transformation defense");
    std::string def_seq, def_kind = "ss", def_out;
    std::uint64_t def_seed = 1;
    defend->add_option("--seq", def_seq, "sequence directory")->required();
    defend->add_option("--kind", def_kind, "cj | ss | gn");
    defend->add_option("--seed", def_seed, "defense seed");
    defend->add_option("--out", def_out, "output directory")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
    std::string ev_gt, ev_pred, ev_out;
    eval_cmd->add_option("--gt", ev_gt, "ground-truth MOT file")->required();
    eval_cmd->add_option("--pred", ev_pred, "prediction MOT file")->required();
    eval_cmd->add_option("--out", ev_out, "report output (JSON)");

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "memory-state diagnostics from a trace");
    std::string diag_trace, diag_out;
    int diag_frame = 0;
    diagnose->add_option("--trace", diag_trace, "state trace (JSON)")->required();
    diagnose->add_option("--frame", diag_frame, "frame index")->required();
    diagnose->add_option("--out", diag_out, "diagnostics output (JSON)");

    // gradcheck
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suites");
    std::string gc_target = "tracker";
    gradcheck_cmd->add_option("--target", gc_target, "tracker | losses | aai | eai");

    // report
    auto* report = app.add_subcommand("report", "comparison table from report JSONs");
    std::vector<std::string> rep_inputs;
    std::string rep_out;
    report->add_option("--inputs", rep_inputs, "evaluation reports (JSON)")->required();
    report->add_option("--out", rep_out, "table output (text)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::fprintf(stderr, "usage: %s\n", e.what());
        return 1;
    }

    try {
        if (*gen) {
            SceneSpec spec = scene_preset(gen_preset, gen_seed);
            SyntheticScene scene = gen_synthetic_sequence(spec);
            save_sequence(scene.sequence, scene.ground_truth, gen_out);
            log_info("wrote sequence '" + spec.name + "' to " + gen_out);
        } else if (*track) {
            RunConfig cfg = load_config_or_default(track_config);
            Sequence seq = load_sequence(track_seq);
            std::vector<Trajectory> gt = load_sequence_gt(track_seq);
            Tracker tracker(cfg.tracker);
            auto [pred, trace] = tracker.run_tracker(seq, gt);
            write_mot(pred, track_out);
            if (!track_trace.empty()) {
                json t = trace_to_json(trace);
                t["config"] = config_to_json(cfg);
                write_file_atomic(track_trace, t.dump() + "\n");
            }
        } else if (*attack) {
            RunConfig cfg = load_config_or_default(atk_config);
            if (!atk_vector.empty()) {
                cfg.attack.vector = attack_vector_from(atk_vector);
                if (cfg.attack.vector != AttackVector::Digital && atk_config.empty()) {
                    cfg.attack.alpha = 8.0 / 255.0;
                    cfg.attack.iters = 150;
                }
            }
            if (!atk_loss.empty()) cfg.attack.loss = loss_kind_from(atk_loss);
            if (atk_window > 0) cfg.attack.window = atk_window;
            Sequence seq = load_sequence(atk_seq);
            std::vector<Trajectory> gt = load_sequence_gt(atk_seq);
            Tracker tracker(cfg.tracker);
            AttackResult result = run_attack(tracker, seq, gt, atk_frame, cfg.attack, cfg.bounds);
            fs::create_directories(atk_out);
            json rj = attack_result_to_json(result);
            rj["config"] = config_to_json(cfg);
            write_file_atomic((fs::path(atk_out) / "attack.json").string(), rj.dump() + "\n");
            Sequence attacked = apply_attack_frames(seq, result);
            save_sequence(attacked, gt, (fs::path(atk_out) / "sequence").string());
            for (const std::string& w : result.warnings) log_info("warning: " + w);
        } else if (*defend) {
            Sequence seq = load_sequence(def_seq);
            std::vector<Trajectory> gt = load_sequence_gt(def_seq);
            DefenseKind kind = defense_from(def_kind);
            Sequence defended = seq;
            for (std::size_t i = 0; i < seq.frames.size(); ++i)
                defended.frames[i] =
                    apply_defense(kind, seq.frames[i], def_seed + i);
            save_sequence(defended, gt, def_out);
        } else if (*eval_cmd) {
            std::vector<Trajectory> gt = parse_mot(ev_gt);
            std::vector<Trajectory> pred = parse_mot(ev_pred);
            EvalReport rep = evaluate(gt, pred);
            json rj = eval_report_to_json(rep);
            std::string text = rj.dump(2) + "\n";
            if (ev_out.empty())
                std::fputs(text.c_str(), stdout);
            else
                write_file_atomic(ev_out, text);
        } else if (*diagnose) {
            json tj;
            try {
                tj = json::parse(read_file(diag_trace));
            } catch (const json::exception& e) {
                throw DataError(diag_trace + ": " + e.what());
            }
            StateTrace trace = trace_from_json(tj);
            MemoryDiagnostics d = memory_diagnostics(trace, diag_frame);
            std::string text = diagnostics_to_json(d).dump(2) + "\n";
            if (diag_out.empty())
                std::fputs(text.c_str(), stdout);
            else
                write_file_atomic(diag_out, text);
        } else if (*gradcheck_cmd) {
            return run_gradcheck_suite(gc_target);
        } else if (*report) {
            std::vector<std::pair<std::string, EvalReport>> rows;
            for (const std::string& path : rep_inputs) {
                json j;
                try {
                    j = json::parse(read_file(path));
                } catch (const json::exception& e) {
                    throw DataError(path + ": " + e.what());
                }
                rows.emplace_back(fs::path(path).stem().string(), eval_report_from_json(j));
            }
            std::string table = report_table(rows);
            if (rep_out.empty())
                std::fputs(table.c_str(), stdout);
            else
                write_file_atomic(rep_out, table);
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric: %s\n", e.what());
        return 3;
    }
    return 0;
}

namespace {

int run_gradcheck_suite(const std::string& target) {
    SceneSpec spec = scene_preset("sparse", 7);
    spec.width = 32;
    spec.height = 32;
    spec.length = 4;
    for (auto& o : spec.objects) {
        o.cx *= 0.5;
        o.cy *= 0.5;
        o.w *= 0.55;
        o.h *= 0.55;
    }
    SyntheticScene scene = gen_synthetic_sequence(spec);
    TrackerConfig tcfg;
    tcfg.det_queries = 8;
    tcfg.embed_dim = 16;
    tcfg.feat_channels = 8;
    Tracker tracker(tcfg);
    auto targets = Tracker::targets_per_frame(scene.ground_truth, spec.length, spec.width,
                                              spec.height);

    // warm one frame so track queries and anchors exist
    TrackerState state = tracker.initial_state();
    std::vector<Tensor> prev_matched;
    {
        Tape tape;
        Var f = tape.constant(scene.sequence.frames[0].to_tensor());
        FrameOutput out = tracker.run_frame(tape, f, state, targets[0]);
        StateTraceFrame tf;
        state = tracker.update_tracks(tape, out, state, targets[0], &tf);
        prev_matched = tf.matched_h_now;
    }
    const Tensor frame1 = scene.sequence.frames[1].to_tensor();

    bool ok = true;
    auto show = [&](const char* name, const GradCheckReport& rep) {
        std::printf("%-28s %s\n", name, rep.summary().c_str());
        ok = ok && rep.passed;
    };

    if (target == "tracker" || target == "losses") {
        auto make_loss_fn = [&](LossKind kind, LossWeights w) {
            return [&, kind, w](Tape& tape, Var frame) {
                FrameOutput out = tracker.run_frame(tape, frame, state, targets[1]);
                FrameLossContext ctx = build_loss_context(tape, tracker, out, state, targets[1],
                                                          prev_matched, AnchorMode::GroundTruth);
                return composite_loss(tape, kind, ctx, w).value;
            };
        };
        if (target == "tracker") {
            auto f = make_loss_fn(LossKind::Tmc, LossWeights{});
            show("pixels -> tmc loss", check_gradient(f, frame1, 1e-3, 1e-3));
        } else {
            LossWeights flood_only{1, 0, 0, 0, 0}, cost_only{0, 1, 0, 0, 0},
                siphon_only{0, 0, 1, 0, 0}, decorr_only{0, 0, 0, 1, 0}, erase_only{0, 0, 0, 0, 1};
            show("pixels -> flood", check_gradient(make_loss_fn(LossKind::Tqf, flood_only),
                                                   frame1, 1e-3, 1e-3));
            show("pixels -> cost mimicry", check_gradient(make_loss_fn(LossKind::Tqf, cost_only),
                                                          frame1, 1e-3, 1e-3));
            show("pixels -> siphon", check_gradient(make_loss_fn(LossKind::Tqf, siphon_only),
                                                    frame1, 1e-3, 1e-3));
            show("pixels -> decorr", check_gradient(make_loss_fn(LossKind::Tmc, decorr_only),
                                                    frame1, 1e-3, 1e-3));
            show("pixels -> erase", check_gradient(make_loss_fn(LossKind::Tmc, erase_only),
                                                   frame1, 1e-3, 1e-3));
        }
    } else if (target == "aai") {
        auto f = [&](Tape& tape, Var params) {
            Var x = tape.reshape(tape.slice_rows(params, 0, 1), {});
            Var y = tape.reshape(tape.slice_rows(params, 1, 1), {});
            Var phi = tape.reshape(tape.slice_rows(params, 2, 1), {});
            Var adv = simulate_aai(tape, tape.constant(frame1), x, y, phi, 6);
            FrameOutput out = tracker.run_frame(tape, adv, state, targets[1]);
            FrameLossContext ctx = build_loss_context(tape, tracker, out, state, targets[1],
                                                      prev_matched, AnchorMode::GroundTruth);
            return composite_loss(tape, LossKind::Tmc, ctx, LossWeights{}).value;
        };
        Tensor p = Tensor::vector({0.31, 0.22, 0.4});
        show("aai params -> tmc loss", check_gradient(f, p, 1e-3, 1e-3));
    } else if (target == "eai") {
        auto f = [&](Tape& tape, Var params) {
            Var rows = tape.slice_rows(params, 0, 2);
            Var widths = tape.slice_rows(params, 2, 2);
            Var adv = simulate_eai(tape, tape.constant(frame1), rows, widths, 0.9, 2.0);
            FrameOutput out = tracker.run_frame(tape, adv, state, targets[1]);
            FrameLossContext ctx = build_loss_context(tape, tracker, out, state, targets[1],
                                                      prev_matched, AnchorMode::GroundTruth);
            return composite_loss(tape, LossKind::Tmc, ctx, LossWeights{}).value;
        };
        Tensor p = Tensor::vector({6.3, 17.6, 6.2, 7.4});
        show("eai params -> tmc loss", check_gradient(f, p, 1e-3, 1e-3));
    } else {
        throw UsageError("unknown gradcheck target '" + target +
                         "' (want tracker, losses, aai or eai)");
    }
    if (!ok) {
        std::fprintf(stderr, "numeric: gradient check failed\n");
        return 3;
    }
    return 0;
}

}  // namespace
