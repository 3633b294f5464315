#pragma once

namespace fade {

// Axis-aligned box in pixel units, top-left origin.
struct BoxPx {
    double x = 0, y = 0, w = 0, h = 0;
    double area() const { return w > 0 && h > 0 ? w * h : 0.0; }
    bool operator==(const BoxPx&) const = default;
};

// Center-parameterized box normalized to [0,1] (tracker domain).
struct BoxCw {
    double cx = 0, cy = 0, w = 0, h = 0;
    bool operator==(const BoxCw&) const = default;
};

double iou(const BoxPx& a, const BoxPx& b);
double iou(const BoxCw& a, const BoxCw& b);
double giou(const BoxCw& a, const BoxCw& b);

BoxPx to_pixels(const BoxCw& b, int width, int height);
BoxCw to_normalized(const BoxPx& b, int width, int height);

}  // namespace fade
