#pragma once

#include "actdet/config.hpp"
#include "actdet/geometry.hpp"
#include "actdet/graph.hpp"

namespace actdet {

// Bilinear crop-and-resize of the box (image pixel coordinates) to 14x14,
// then 2x2 max pool to 7x7. `features` is a center-frame (H',W',F) map.
NodeId roipool(Graph& g, NodeId features, const Box& box);

// The same box replicated at every temporal index of (T',H',W',F) features;
// per-frame RoIPool results stacked in time order -> (T',7,7,F).
NodeId st_roipool(Graph& g, NodeId features, const Box& box);

}  // namespace actdet
