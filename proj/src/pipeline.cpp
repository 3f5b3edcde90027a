#include "actdet/pipeline.hpp"

#include <stdexcept>

namespace actdet {

FeaturePipeline build_features(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                               Tensor video) {
    if (video.ndim() != 4 || video.dim(3) != 3) {
        throw std::invalid_argument("build_features: expected (T,H,W,3) clip, got " +
                                    shape_str(video.shape));
    }
    FeaturePipeline fp;
    fp.shape = trunk_output_shape(video.dim(0), video.dim(1), video.dim(2));
    NodeId clip = g.input(std::move(video));
    fp.trunk = trunk_forward(g, cfg, ps, clip);
    fp.center_pre = slice_center(g, fp.trunk);
    NodeId emb = location_embedding(g, cfg, ps, fp.shape.t, fp.shape.h, fp.shape.w);
    fp.memory = append_embedding(g, fp.trunk, emb);
    fp.center_mem = slice_center(g, fp.memory);
    return fp;
}

ProposalHead proposal_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                              const FeaturePipeline& fp, const Box& box) {
    ProposalHead out;
    HeadOut tx_out{}, i3d_out{};
    const bool want_tx = cfg.head != HeadMode::I3d;
    const bool want_i3d = cfg.head != HeadMode::Tx;
    if (want_tx) {
        NodeId roi = roipool(g, fp.center_mem, box);
        NodeId query = qpr(g, cfg, ps, roi);
        out.tx = tx_stack(g, cfg, ps, query, fp.memory);
        out.has_tx = true;
        tx_out = tx_head_outputs(g, cfg, ps, out.tx.feature);
    }
    if (want_i3d) {
        NodeId tube = st_roipool(g, fp.memory, box);
        i3d_out = i3d_head_forward(g, cfg, ps, tube);
    }
    switch (cfg.head) {
        case HeadMode::Tx:
            out.logits = tx_out.logits;
            out.deltas = tx_out.deltas;
            break;
        case HeadMode::I3d:
            out.logits = i3d_out.logits;
            out.deltas = i3d_out.deltas;
            break;
        case HeadMode::TxI3d:
            out.logits = tx_out.logits;
            out.deltas = i3d_out.deltas;
            break;
    }
    return out;
}

}  // namespace actdet
