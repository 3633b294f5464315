#pragma once

#include <string>
#include <vector>

#include "fade/image.hpp"
#include "fade/metrics.hpp"

namespace fade {

struct Sequence {
    std::string name;
    double fps = 10.0;
    std::vector<Image> frames;
};

enum class ObjectShape { Rectangle, Blob };

struct ObjectSpec {
    double cx = 0, cy = 0;    // center at frame 0, pixels
    double vx = 0, vy = 0;    // pixels per frame
    double w = 12, h = 12;
    double r = 1, g = 1, b = 1;
    ObjectShape shape = ObjectShape::Rectangle;
};

struct SceneSpec {
    std::string name = "scene";
    int width = 64, height = 64;
    int length = 30;
    double fps = 10.0;
    std::uint64_t seed = 1;
    double bg[3] = {0.02, 0.02, 0.03};
    std::vector<ObjectSpec> objects;
};

// canned presets: sparse (3 objects, no crossings), crossing (2 objects swap
// sides), dense (12 objects on a 64x96 canvas)
SceneSpec scene_preset(const std::string& name, std::uint64_t seed);

struct SyntheticScene {
    Sequence sequence;
    std::vector<Trajectory> ground_truth;
};

SyntheticScene gen_synthetic_sequence(const SceneSpec& spec);

}  // namespace fade
