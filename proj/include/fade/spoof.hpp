#pragma once

#include <string>

#include "fade/config.hpp"
#include "fade/image.hpp"
#include "fade/tape.hpp"

namespace fade {

struct AaiParams {
    double x = 0.0;    // max horizontal oscillation amplitude, pixels
    double y = 0.0;    // max vertical amplitude, pixels
    double phi = 0.0;  // phase offset, radians
    int samples = 10;  // blur sample count, fixed during optimization
};

struct EaiParams {
    std::vector<double> rows;    // stripe start rows
    std::vector<double> widths;  // stripe widths, rows
    double blend = 1.0;          // corruption intensity in [0,1]
    double steepness = 50.0;     // mask sigmoid steepness
};

// Oscillatory motion blur: average of sinusoidally translated frames, each
// displacement clamped to the stabilizer's travel limit (3% of frame width).
Var simulate_aai(Tape& tape, Var frame, Var x, Var y, Var phi, int samples);
Image simulate_aai(const Image& frame, const AaiParams& p);

// Readout glitch: mosaic to RGGB, zero the green sites, demosaic back, then
// blend the artifact into the frame under a soft row-stripe mask.
Var simulate_eai(Tape& tape, Var frame, Var rows, Var widths, double blend, double steepness);
Image simulate_eai(const Image& frame, const EaiParams& p);

// pipeline stages, exposed for the composition identity checks
Var eai_mosaic_drop_green(Tape& tape, Var frame);   // (H,W) raw plane with G zeroed
Var eai_demosaic(Tape& tape, Var raw);              // (H,W) -> (H,W,3) bilinear

enum class DefenseKind { ColorJitter, SpatialSmoothing, GaussianNoise };
DefenseKind defense_from(const std::string& s);
std::string to_string(DefenseKind k);

Image apply_defense(DefenseKind kind, const Image& frame, std::uint64_t seed);

// explicit-factor variant backing the color jitter defense
Image apply_color_jitter(const Image& frame, double brightness, double contrast,
                         double saturation, double hue);

// 3x3 Gaussian weights used by the smoothing defense; sums to 1 exactly
std::vector<double> smoothing_kernel();

AaiParams clip_params(const AaiParams& p, const ParamBounds& bounds, int frame_width);
EaiParams clip_params(const EaiParams& p, const ParamBounds& bounds, int frame_height);

}  // namespace fade
