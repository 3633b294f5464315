#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "fade/losses.hpp"
#include "fade/spoof.hpp"
#include "fade/synthetic.hpp"
#include "fade/tracker.hpp"

namespace fade {

// Per-frame optimization record. The loss trace holds the adversarial
// objective (ascending is success) and always has iters+1 entries, the
// first being the value before any update.
struct FrameAttack {
    int frame_index = 0;  // 0-based
    std::vector<double> loss_trace;
    double best_loss = 0.0;
    int best_iteration = 0;

    Tensor delta_last, delta_best;        // digital
    AaiParams aai_last, aai_best;         // acoustic
    EaiParams eai_last, eai_best;         // electromagnetic
};

struct AttackResult {
    AttackVector vector = AttackVector::Digital;
    LossKind loss = LossKind::Tqf;
    std::vector<FrameAttack> frames;
    std::vector<Image> adversarial_frames;  // from the best-so-far parameters
    std::vector<std::string> warnings;
    int bound_violations = 0;  // constraint checks run every iteration
};

// driver for all three vectors; picks the loop from cfg.vector
AttackResult run_attack(const Tracker& tracker, const Sequence& seq,
                        const std::vector<Trajectory>& gt, int attack_frame,
                        const AttackConfig& cfg, const ParamBounds& bounds);

AttackResult pgd_digital(const Tracker& tracker, const Sequence& seq,
                         const std::vector<Trajectory>& gt, int attack_frame,
                         const AttackConfig& cfg);
AttackResult pgd_aai(const Tracker& tracker, const Sequence& seq,
                     const std::vector<Trajectory>& gt, int attack_frame,
                     const AttackConfig& cfg, const ParamBounds& bounds);
AttackResult pgd_eai(const Tracker& tracker, const Sequence& seq,
                     const std::vector<Trajectory>& gt, int attack_frame,
                     const AttackConfig& cfg, const ParamBounds& bounds);

// bare digital loop against an arbitrary objective; the tracker-independent
// entry point used to pin the closed-form behavior of the update rule
using PixelObjective = std::function<Var(Tape&, Var adv_frame, Var delta)>;
FrameAttack pgd_digital_loop(const Tensor& clean_frame, double epsilon, double alpha, int iters,
                             const PixelObjective& objective, int* violations,
                             std::vector<std::string>* warnings);

nlohmann::json attack_result_to_json(const AttackResult& result);

// replaces the attacked frames of a sequence with their adversarial versions
Sequence apply_attack_frames(const Sequence& seq, const AttackResult& result);

}  // namespace fade
