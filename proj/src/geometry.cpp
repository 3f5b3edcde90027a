#include "actdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace actdet {

double iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::array<double, 4> encode_deltas(const Box& anchor, const Box& target) {
    const double aw = anchor.width(), ah = anchor.height();
    if (aw <= 0.0 || ah <= 0.0) {
        throw std::invalid_argument("encode_deltas: degenerate anchor");
    }
    return {(target.cx() - anchor.cx()) / aw, (target.cy() - anchor.cy()) / ah,
            std::log(target.width() / aw), std::log(target.height() / ah)};
}

Box decode_deltas(const Box& anchor, const std::array<double, 4>& deltas) {
    const double aw = anchor.width(), ah = anchor.height();
    if (aw <= 0.0 || ah <= 0.0) {
        throw std::invalid_argument("decode_deltas: degenerate anchor");
    }
    const double cx = anchor.cx() + deltas[0] * aw;
    const double cy = anchor.cy() + deltas[1] * ah;
    const double w = aw * std::exp(deltas[2]);
    const double h = ah * std::exp(deltas[3]);
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

Box clip_box(const Box& b, double img_w, double img_h) {
    Box r;
    r.x1 = std::min(std::max(b.x1, 0.0), img_w);
    r.y1 = std::min(std::max(b.y1, 0.0), img_h);
    r.x2 = std::min(std::max(b.x2, 0.0), img_w);
    r.y2 = std::min(std::max(b.y2, 0.0), img_h);
    return r;
}

std::vector<int> nms(const std::vector<std::pair<Box, double>>& dets,
                     double iou_threshold) {
    std::vector<int> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dets[a].second > dets[b].second;
    });
    std::vector<int> kept;
    std::vector<bool> removed(dets.size(), false);
    for (int idx : order) {
        if (removed[idx]) continue;
        kept.push_back(idx);
        for (int other : order) {
            if (!removed[other] && other != idx &&
                iou(dets[idx].first, dets[other].first) >= iou_threshold) {
                removed[other] = true;
            }
        }
    }
    return kept;
}

std::vector<Box> make_anchors(int feature_h, int feature_w, double stride,
                              const std::vector<double>& scales,
                              const std::vector<double>& aspect_ratios) {
    if (feature_h <= 0 || feature_w <= 0) {
        throw std::invalid_argument("make_anchors: non-positive grid");
    }
    std::vector<Box> anchors;
    anchors.reserve(static_cast<size_t>(feature_h) * feature_w * scales.size() *
                    aspect_ratios.size());
    for (int y = 0; y < feature_h; ++y) {
        for (int x = 0; x < feature_w; ++x) {
            const double cx = (x + 0.5) * stride;
            const double cy = (y + 0.5) * stride;
            for (double s : scales) {
                for (double r : aspect_ratios) {
                    // ratio = h/w at constant area s^2
                    const double w = s / std::sqrt(r);
                    const double h = s * std::sqrt(r);
                    anchors.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w,
                                       cy + 0.5 * h});
                }
            }
        }
    }
    return anchors;
}

}  // namespace actdet
