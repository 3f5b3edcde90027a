#pragma once

#include "actdet/config.hpp"
#include "actdet/graph.hpp"
#include "actdet/params.hpp"
#include "actdet/tx_head.hpp"

namespace actdet {

// Context-free baseline head: the pooled (T',7,7,F) tube through two 3-d conv
// blocks, global average, then linear classification and regression outputs.
HeadOut i3d_head_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                         NodeId tube);

}  // namespace actdet
