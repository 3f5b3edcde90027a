#include "actdet/pooling.hpp"

#include <stdexcept>

namespace actdet {

namespace {

// image pixels -> feature-map pixel coordinates (cell centers at i+0.5 cells)
struct FeatRect {
    double y1, x1, y2, x2;
};

FeatRect map_box(Graph& g, NodeId features, const Box& box) {
    const Tensor& f = g.value(features);
    if (f.ndim() != 3) {
        throw std::invalid_argument("roipool: expected (H,W,F) features, got " +
                                    shape_str(f.shape));
    }
    const double s = ModelConfig::spatial_stride;
    const double fh = static_cast<double>(f.dim(0));
    const double fw = static_cast<double>(f.dim(1));
    Box b = clip_box(box, fw * s, fh * s);
    if (b.width() <= 0.0 || b.height() <= 0.0) {
        throw std::invalid_argument("roipool: zero-area box after mapping");
    }
    return {b.y1 / s - 0.5, b.x1 / s - 0.5, b.y2 / s - 0.5, b.x2 / s - 0.5};
}

}  // namespace

NodeId roipool(Graph& g, NodeId features, const Box& box) {
    const FeatRect r = map_box(g, features, box);
    NodeId crop = g.crop_resize(features, r.y1, r.x1, r.y2, r.x2, 14, 14);
    return g.maxpool2d(crop, 2, 2);
}

NodeId st_roipool(Graph& g, NodeId features, const Box& box) {
    const Tensor& f = g.value(features);
    if (f.ndim() != 4) {
        throw std::invalid_argument("st_roipool: expected (T,H,W,F), got " +
                                    shape_str(f.shape));
    }
    std::vector<NodeId> slices;
    slices.reserve(f.dim(0));
    for (int64_t t = 0; t < f.dim(0); ++t) {
        slices.push_back(roipool(g, g.slice0(features, t), box));
    }
    return g.stack0(slices);
}

}  // namespace actdet
