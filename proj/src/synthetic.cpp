#include "fade/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "fade/common.hpp"

namespace fade {

namespace {

// rectangle edge coverage for one pixel along one axis, in [0,1]
double axis_coverage(double px, double lo, double hi) {
    return std::clamp(std::min(px + 1.0, hi) - std::max(px, lo), 0.0, 1.0);
}

void render_object(Image& img, const ObjectSpec& obj, double cx, double cy) {
    double x0 = cx - obj.w / 2, x1 = cx + obj.w / 2;
    double y0 = cy - obj.h / 2, y1 = cy + obj.h / 2;
    int ix0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
    int ix1 = std::min(img.width - 1, static_cast<int>(std::ceil(x1)) + 1);
    int iy0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
    int iy1 = std::min(img.height - 1, static_cast<int>(std::ceil(y1)) + 1);
    double color[3] = {obj.r, obj.g, obj.b};
    for (int y = iy0; y <= iy1; ++y)
        for (int x = ix0; x <= ix1; ++x) {
            double alpha = 0.0;
            if (obj.shape == ObjectShape::Rectangle) {
                alpha = axis_coverage(x, x0, x1) * axis_coverage(y, y0, y1);
            } else {
                double sx = obj.w / 4.0, sy = obj.h / 4.0;
                double dx = (x + 0.5 - cx) / sx, dy = (y + 0.5 - cy) / sy;
                alpha = std::exp(-0.5 * (dx * dx + dy * dy));
                if (alpha < 1e-3) alpha = 0.0;
            }
            if (alpha <= 0.0) continue;
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = img.at(y, x, c) * (1.0 - alpha) + color[c] * alpha;
        }
}

}  // namespace

SceneSpec scene_preset(const std::string& name, std::uint64_t seed) {
    SceneSpec spec;
    spec.name = name;
    spec.seed = seed;
    Rng rng(seed);
    if (name == "sparse") {
        // three well-separated lanes, uniform rightward drift
        double lanes[3] = {14, 32, 50};
        double colors[3][3] = {{0.95, 0.35, 0.25}, {0.30, 0.90, 0.40}, {0.35, 0.45, 0.95}};
        for (int i = 0; i < 3; ++i) {
            ObjectSpec o;
            o.cx = 14 + 8.0 * i;
            o.cy = lanes[i];
            o.vx = 0.8 + 0.2 * i;
            o.vy = 0.0;
            o.w = 18;
            o.h = 14;
            o.r = colors[i][0];
            o.g = colors[i][1];
            o.b = colors[i][2];
            spec.objects.push_back(o);
        }
    } else if (name == "crossing") {
        ObjectSpec a;
        a.cx = 12;
        a.cy = 25;
        a.vx = 1.4;
        a.vy = 0.05;
        a.w = 18;
        a.h = 16;
        a.r = 0.95;
        a.g = 0.55;
        a.b = 0.25;
        ObjectSpec b;
        b.cx = 52;
        b.cy = 39;
        b.vx = -1.4;
        b.vy = -0.05;
        b.w = 18;
        b.h = 16;
        b.r = 0.30;
        b.g = 0.65;
        b.b = 0.95;
        spec.objects = {a, b};
    } else if (name == "dense") {
        spec.width = 96;
        spec.height = 64;
        // 12 objects with rejection-sampled spawn points so they start apart
        std::vector<std::pair<double, double>> placed;
        for (int i = 0; i < 12; ++i) {
            double cx = 0, cy = 0;
            for (int tries = 0; tries < 200; ++tries) {
                cx = rng.uniform(12.0, spec.width - 12.0);
                cy = rng.uniform(10.0, spec.height - 10.0);
                bool ok = true;
                for (auto& [px, py] : placed)
                    if (std::hypot(cx - px, cy - py) < 14.0) {
                        ok = false;
                        break;
                    }
                if (ok) break;
            }
            placed.emplace_back(cx, cy);
            ObjectSpec o;
            o.cx = cx;
            o.cy = cy;
            o.vx = rng.uniform(-0.6, 0.6);
            o.vy = rng.uniform(-0.4, 0.4);
            o.w = rng.uniform(10.0, 13.0);
            o.h = rng.uniform(9.0, 12.0);
            // a low-contrast crowd: weak evidence is what makes the
            // budget contestable
            o.r = rng.uniform(0.26, 0.40);
            o.g = rng.uniform(0.26, 0.40);
            o.b = rng.uniform(0.26, 0.40);
            int up = static_cast<int>(rng.uniform_index(3));
            (up == 0 ? o.r : up == 1 ? o.g : o.b) += rng.uniform(0.06, 0.12);
            o.shape = ObjectShape::Rectangle;
            spec.objects.push_back(o);
        }
    } else {
        throw UsageError("unknown preset '" + name + "' (want sparse, crossing or dense)");
    }
    return spec;
}

SyntheticScene gen_synthetic_sequence(const SceneSpec& spec) {
    if (spec.length < 1) throw DataError("scene length must be >= 1");
    SyntheticScene out;
    out.sequence.name = spec.name;
    out.sequence.fps = spec.fps;
    out.ground_truth.resize(spec.objects.size());
    for (std::size_t i = 0; i < spec.objects.size(); ++i)
        out.ground_truth[i].id = static_cast<int>(i) + 1;

    for (int t = 0; t < spec.length; ++t) {
        Image img(spec.height, spec.width);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = spec.bg[c];
        for (std::size_t i = 0; i < spec.objects.size(); ++i) {
            const ObjectSpec& o = spec.objects[i];
            double cx = o.cx + o.vx * t;
            double cy = o.cy + o.vy * t;
            render_object(img, o, cx, cy);
            // clipped ground-truth box; skip when (almost) fully outside
            double x0 = std::max(0.0, cx - o.w / 2), x1 = std::min<double>(spec.width, cx + o.w / 2);
            double y0 = std::max(0.0, cy - o.h / 2), y1 = std::min<double>(spec.height, cy + o.h / 2);
            if (x1 - x0 >= 2.0 && y1 - y0 >= 2.0)
                out.ground_truth[i].points.push_back(
                    {t + 1, BoxPx{x0, y0, x1 - x0, y1 - y0}});
        }
        out.sequence.frames.push_back(std::move(img));
    }
    // objects that never became visible leave no trajectory
    std::erase_if(out.ground_truth, [](const Trajectory& t) { return t.points.empty(); });
    return out;
}

}  // namespace fade
