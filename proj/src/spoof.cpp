#include "fade/spoof.hpp"

#include <algorithm>
#include <cmath>

#include "fade/ops_util.hpp"

namespace fade {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_frame_range(const Tensor& f, const char* who) {
    for (double v : f.data)
        if (v < 0.0 || v > 1.0) throw DataError(std::string(who) + ": frame values must lie in [0,1]");
}

}  // namespace

Var simulate_aai(Tape& tape, Var frame, Var x, Var y, Var phi, int samples) {
    const Tensor& f = tape.value(frame);
    if (f.rank() != 3 || f.dim(2) != 3)
        throw DataError("aai: frame must be (H,W,3), got " + shape_str(f.shape));
    check_frame_range(f, "aai");
    if (samples < 2) throw DataError("aai: blur sample count must be >= 2");

    double d_max = aai_displacement_cap(f.dim(1));
    Var acc;
    for (int k = 1; k <= samples; ++k) {
        Var phase = tape.sin(phi + (2.0 * kPi * k) / samples);
        Var dx = x * phase;
        Var dy = y * phase;
        // stabilizer hard stop: rescale the displacement onto the travel disc
        Var norm = tape.sqrt(tape.square(dx) + tape.square(dy) + 1e-18);
        Var scale = tape.scalar(d_max) / max_t(tape, norm, tape.scalar(d_max));
        Var shifted = tape.translate(frame, dx * scale, dy * scale);
        acc = k == 1 ? shifted : acc + shifted;
    }
    return tape.clamp(acc / static_cast<double>(samples), 0.0, 1.0);
}

Image simulate_aai(const Image& frame, const AaiParams& p) {
    Tape tape;
    Var f = tape.constant(frame.to_tensor());
    Var out = simulate_aai(tape, f, tape.scalar(p.x), tape.scalar(p.y), tape.scalar(p.phi),
                           p.samples);
    return Image::from_tensor(tape.value(out));
}

Var eai_mosaic_drop_green(Tape& tape, Var frame) {
    const Tensor& f = tape.value(frame);
    if (f.rank() != 3 || f.dim(2) != 3)
        throw DataError("eai: frame must be (H,W,3), got " + shape_str(f.shape));
    int h = f.dim(0), w = f.dim(1);
    if (h % 2 != 0 || w % 2 != 0)
        throw DataError("eai: frame dimensions must be even for the RGGB tiling, got " +
                        shape_str(f.shape));
    // one-hot site mask with the green (luminance) sites removed
    Tensor mask = Tensor::zeros({h, w, 3});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            bool ye = (y % 2) == 0, xe = (x % 2) == 0;
            if (ye && xe)
                mask.at3(y, x, 0) = 1.0;  // R
            else if (!ye && !xe)
                mask.at3(y, x, 2) = 1.0;  // B
            // G sites stay zero
        }
    return tape.sum_last(tape.mul(frame, tape.constant(mask)));
}

Var eai_demosaic(Tape& tape, Var raw) { return tape.demosaic_rggb(raw); }

Var simulate_eai(Tape& tape, Var frame, Var rows, Var widths, double blend, double steepness) {
    const Tensor& f = tape.value(frame);
    check_frame_range(f, "eai");
    if (blend < 0.0 || blend > 1.0) throw DataError("eai: blend must be in [0,1]");
    int h = f.dim(0), w = f.dim(1);

    Var artifact = eai_demosaic(tape, eai_mosaic_drop_green(tape, frame));
    Var mask_rows = tape.soft_stripe_mask(rows, widths, steepness, h);
    Var mask = tape.broadcast_rows(mask_rows, w, 3);
    Var keep = frame * (1.0 - mask);
    Var corrupted = artifact * mask * blend;
    Var passthrough = frame * mask * (1.0 - blend);
    return tape.clamp(keep + corrupted + passthrough, 0.0, 1.0);
}

Image simulate_eai(const Image& frame, const EaiParams& p) {
    if (p.rows.size() != p.widths.size())
        throw DataError("eai: rows and widths must have equal length");
    Tape tape;
    Var f = tape.constant(frame.to_tensor());
    Var rows = tape.constant(Tensor::vector(p.rows));
    Var widths = tape.constant(Tensor::vector(p.widths));
    Var out = simulate_eai(tape, f, rows, widths, p.blend, p.steepness);
    return Image::from_tensor(tape.value(out));
}

DefenseKind defense_from(const std::string& s) {
    if (s == "cj") return DefenseKind::ColorJitter;
    if (s == "ss") return DefenseKind::SpatialSmoothing;
    if (s == "gn") return DefenseKind::GaussianNoise;
    throw DataError("unknown defense '" + s + "' (want cj, ss or gn)");
}

std::string to_string(DefenseKind k) {
    switch (k) {
        case DefenseKind::ColorJitter: return "cj";
        case DefenseKind::SpatialSmoothing: return "ss";
        default: return "gn";
    }
}

std::vector<double> smoothing_kernel() {
    // 3x3 Gaussian, sigma = 0.5; the center absorbs the normalization
    // residue so the weights sum to exactly 1
    const double sigma = 0.5;
    double g1 = std::exp(-1.0 / (2.0 * sigma * sigma));
    double raw[9] = {g1 * g1, g1, g1 * g1, g1, 1.0, g1, g1 * g1, g1, g1 * g1};
    double total = 0.0;
    for (double v : raw) total += v;
    std::vector<double> k(9);
    for (int i = 0; i < 9; ++i) k[static_cast<std::size_t>(i)] = raw[i] / total;
    double others = 0.0;
    for (int i = 0; i < 9; ++i)
        if (i != 4) others += k[static_cast<std::size_t>(i)];
    k[4] = 1.0 - others;
    return k;
}

namespace {

Image smooth(const Image& in) {
    std::vector<double> k = smoothing_kernel();
    Image out(in.height, in.width);
    auto reflect = [](int i, int n) { return i < 0 ? -i - 1 : (i >= n ? 2 * n - 1 - i : i); };
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        acc += k[static_cast<std::size_t>((dy + 1) * 3 + (dx + 1))] *
                               in.at(reflect(y + dy, in.height), reflect(x + dx, in.width), c);
                out.at(y, x, c) = acc;
            }
    return out;
}

Image add_gaussian_noise(const Image& in, std::uint64_t seed) {
    Rng rng = Rng(seed).fork(0x6e6fu);
    Image out = in;
    for (double& v : out.px) v = std::clamp(v + rng.normal(0.0, 0.1), 0.0, 1.0);
    return out;
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

}  // namespace

Image apply_color_jitter(const Image& in, double brightness, double contrast, double saturation,
                         double hue) {
    Image out = in;
    if (brightness != 1.0)
        for (double& v : out.px) v *= brightness;
    if (contrast != 1.0) {
        double mean = 0.0;
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                mean += luma(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
        mean /= static_cast<double>(out.height) * out.width;
        for (double& v : out.px) v = mean + (v - mean) * contrast;
    }
    if (saturation != 1.0) {
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                double g = luma(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
                for (int c = 0; c < 3; ++c) out.at(y, x, c) = g + (out.at(y, x, c) - g) * saturation;
            }
    }
    if (hue != 0.0) {
        // chroma rotation in YIQ space
        double th = 2.0 * kPi * hue;
        double cs = std::cos(th), sn = std::sin(th);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                double r = out.at(y, x, 0), g = out.at(y, x, 1), b = out.at(y, x, 2);
                double yy = 0.299 * r + 0.587 * g + 0.114 * b;
                double ii = 0.595716 * r - 0.274453 * g - 0.321263 * b;
                double qq = 0.211456 * r - 0.522591 * g + 0.311135 * b;
                double ir = ii * cs - qq * sn;
                double qr = ii * sn + qq * cs;
                out.at(y, x, 0) = yy + 0.9563 * ir + 0.6210 * qr;
                out.at(y, x, 1) = yy - 0.2721 * ir - 0.6474 * qr;
                out.at(y, x, 2) = yy - 1.1070 * ir + 1.7046 * qr;
            }
    }
    for (double& v : out.px) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Image apply_defense(DefenseKind kind, const Image& frame, std::uint64_t seed) {
    switch (kind) {
        case DefenseKind::SpatialSmoothing:
            return smooth(frame);
        case DefenseKind::GaussianNoise:
            return add_gaussian_noise(frame, seed);
        case DefenseKind::ColorJitter: {
            Rng rng = Rng(seed).fork(0x636au);
            double b = rng.uniform(0.8, 1.2);
            double c = rng.uniform(0.8, 1.2);
            double s = rng.uniform(0.8, 1.2);
            double h = rng.uniform(-0.2, 0.2);
            return apply_color_jitter(frame, b, c, s, h);
        }
    }
    throw UsageError("unknown defense kind");
}

AaiParams clip_params(const AaiParams& p, const ParamBounds& bounds, int frame_width) {
    AaiParams out = p;
    out.x = bounds.resolved_aai_x(frame_width).clip(p.x);
    out.y = bounds.resolved_aai_y(frame_width).clip(p.y);
    out.phi = bounds.resolved_aai_phi().clip(p.phi);
    return out;
}

EaiParams clip_params(const EaiParams& p, const ParamBounds& bounds, int frame_height) {
    EaiParams out = p;
    Interval row = bounds.resolved_eai_row(frame_height);
    Interval width = bounds.resolved_eai_width();
    for (double& r : out.rows) r = row.clip(r);
    for (double& w : out.widths) w = width.clip(w);
    return out;
}

}  // namespace fade
