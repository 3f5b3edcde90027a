#pragma once

#include "actdet/config.hpp"
#include "actdet/geometry.hpp"
#include "actdet/graph.hpp"
#include "actdet/params.hpp"

namespace actdet {

// Softmax weights over T'*H'*W' cells for every (layer, head) of one proposal.
struct AttentionTraceSlice {
    int64_t tp = 0, hp = 0, wp = 0;
    // [layer][head] -> flattened weight grid
    std::vector<std::vector<std::vector<double>>> weights;
};

// Query preprocessor: (7,7,F) RoI feature -> D-dim query.
// HighRes reduces channels with a 1x1 conv, flattens the 7x7 cells and maps
// to D; LowRes averages spatially before the map.
NodeId qpr(Graph& g, const ModelConfig& cfg, ParamStore& ps, NodeId roi);

struct TxOut {
    NodeId feature;                       // (D,)
    std::vector<std::vector<NodeId>> attention;  // [layer][head] softmax nodes
};

// One attention unit: keys/values are per-cell linear projections of the
// memory (location-embedded trunk features); logits Q.K/sqrt(D) over all
// cells; weighted value sum; residual + LayerNorm + FFN + LayerNorm.
struct TxUnitOut {
    NodeId feature;
    NodeId attention;
};
TxUnitOut tx_unit(Graph& g, const ModelConfig& cfg, ParamStore& ps, int layer,
                  int head, NodeId query, NodeId memory_flat);

// Full stack: per layer each head runs independently on the same query; head
// outputs are concatenated and mapped back to D for the next layer.
TxOut tx_stack(Graph& g, const ModelConfig& cfg, ParamStore& ps, NodeId query,
               NodeId memory);

struct HeadOut {
    NodeId logits;  // (C+1,)
    NodeId deltas;  // (4,) or (4C,) in class-specific mode
};

HeadOut tx_head_outputs(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                        NodeId feature);

// Head-combination routing: classification from the Tx head, regression from
// the I3D head when both are present.
struct CombinedOut {
    std::vector<double> scores;      // sigmoid action scores, length C
    double background = 0.0;
    std::vector<double> reg_deltas;  // routed regression output
};
CombinedOut combined_head_mode(const ModelConfig& cfg, Graph& g,
                               const HeadOut* tx, const HeadOut* i3d);

AttentionTraceSlice collect_trace(const Graph& g, const TxOut& out, int64_t tp,
                                  int64_t hp, int64_t wp);

}  // namespace actdet
