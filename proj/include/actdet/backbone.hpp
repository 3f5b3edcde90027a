#pragma once

#include "actdet/config.hpp"
#include "actdet/graph.hpp"
#include "actdet/params.hpp"

namespace actdet {

struct TrunkShape {
    int64_t t, h, w;
};

// Symbolic shape contract: (T/4, H/16, W/16). Throws before any compute when
// the input dims are not divisible.
TrunkShape trunk_output_shape(int64_t t, int64_t h, int64_t w);

// (T,H,W,3) clip -> (T',H',W',trunk_channels) features, pre-embedding.
NodeId trunk_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps, NodeId clip);

// Frame at index floor(T'/2).
NodeId slice_center(Graph& g, NodeId features);

// Coordinate-only channels: per cell, [h,w] and [t] normalized to [-1,1]
// about the feature-map center, each through a 2-layer MLP, concatenated.
NodeId location_embedding(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                          int64_t tp, int64_t hp, int64_t wp);

// Channel concat of trunk features and embedding.
NodeId append_embedding(Graph& g, NodeId features, NodeId embedding);

}  // namespace actdet
