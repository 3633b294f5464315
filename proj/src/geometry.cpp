#include "fade/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace fade {

double iou(const BoxPx& a, const BoxPx& b) {
    double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double iou(const BoxCw& a, const BoxCw& b) {
    BoxPx pa{a.cx - a.w / 2, a.cy - a.h / 2, a.w, a.h};
    BoxPx pb{b.cx - b.w / 2, b.cy - b.h / 2, b.w, b.h};
    return iou(pa, pb);
}

double giou(const BoxCw& a, const BoxCw& b) {
    double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2;
    double ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
    double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2;
    double by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
    double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    double inter = ix * iy;
    double uni = a.w * a.h + b.w * b.h - inter;
    double cx = std::max(ax1, bx1) - std::min(ax0, bx0);
    double cy = std::max(ay1, by1) - std::min(ay0, by0);
    double hull = cx * cy;
    double iou_v = uni > 0.0 ? inter / uni : 0.0;
    return hull > 0.0 ? iou_v - (hull - uni) / hull : iou_v;
}

BoxPx to_pixels(const BoxCw& b, int width, int height) {
    BoxPx out;
    out.w = b.w * width;
    out.h = b.h * height;
    out.x = b.cx * width - out.w / 2;
    out.y = b.cy * height - out.h / 2;
    return out;
}

BoxCw to_normalized(const BoxPx& b, int width, int height) {
    BoxCw out;
    out.w = b.w / width;
    out.h = b.h / height;
    out.cx = (b.x + b.w / 2) / width;
    out.cy = (b.y + b.h / 2) / height;
    return out;
}

}  // namespace fade
