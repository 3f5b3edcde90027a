#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace actdet {

// Axis-aligned rectangle in center-frame pixel coordinates.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
};

struct Detection {
    Box box;
    std::vector<double> scores;  // length C
    double objectness = 0.0;
};

double iou(const Box& a, const Box& b);

// Faster R-CNN delta parameterization (dcx/w, dcy/h, log w ratio, log h ratio).
std::array<double, 4> encode_deltas(const Box& anchor, const Box& target);
Box decode_deltas(const Box& anchor, const std::array<double, 4>& deltas);

Box clip_box(const Box& b, double img_w, double img_h);

// Greedy NMS by descending score, ties broken by lower index. Returns kept
// indices into `dets`.
std::vector<int> nms(const std::vector<std::pair<Box, double>>& dets,
                     double iou_threshold);

// One anchor set centered on every feature cell.
std::vector<Box> make_anchors(int feature_h, int feature_w, double stride,
                              const std::vector<double>& scales,
                              const std::vector<double>& aspect_ratios);

}  // namespace actdet
