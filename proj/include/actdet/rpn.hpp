#pragma once

#include "actdet/config.hpp"
#include "actdet/geometry.hpp"
#include "actdet/graph.hpp"
#include "actdet/params.hpp"

namespace actdet {

struct RpnOut {
    NodeId logits;  // (H'*W'*A,)
    NodeId deltas;  // (H'*W'*A, 4)
};

// One 3x3 conv plus two sibling 1x1 convs over the center-frame feature map
// (H',W',trunk_channels). A single objectness channel per anchor; proposals
// are action agnostic.
RpnOut rpn_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                   NodeId center_features);

struct ProposalSet {
    std::vector<Box> boxes;        // sorted by descending objectness
    std::vector<double> scores;
    std::vector<int> anchor_idx;   // source anchor of each proposal
};

// Decode deltas, clip to the image, drop zero-area boxes, NMS, take top R.
ProposalSet select_proposals(const std::vector<double>& logits,
                             const std::vector<double>& deltas,
                             const std::vector<Box>& anchors, int r,
                             double img_w, double img_h, double nms_thresh);

}  // namespace actdet
