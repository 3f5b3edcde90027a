#pragma once

#include "actdet/backbone.hpp"
#include "actdet/config.hpp"
#include "actdet/geometry.hpp"
#include "actdet/graph.hpp"
#include "actdet/i3d_head.hpp"
#include "actdet/params.hpp"
#include "actdet/pooling.hpp"
#include "actdet/tx_head.hpp"

namespace actdet {

// Clip-level feature state shared by every proposal of one forward pass.
struct FeaturePipeline {
    NodeId trunk;       // (T',H',W',Ct) pre-embedding
    NodeId center_pre;  // (H',W',Ct), the RPN input
    NodeId memory;      // (T',H',W',F) with location channels appended
    NodeId center_mem;  // (H',W',F), the RoIPool source
    TrunkShape shape;
};

FeaturePipeline build_features(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                               Tensor video);

// Head outputs for one proposal box, routed by head mode. In the combined
// mode classification comes from the attention head and regression from the
// tube head.
struct ProposalHead {
    NodeId logits;  // (C+1,)
    NodeId deltas;  // (4,) or (4C,)
    TxOut tx;       // attention nodes when the attention head ran
    bool has_tx = false;
};

ProposalHead proposal_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                              const FeaturePipeline& fp, const Box& box);

}  // namespace actdet
