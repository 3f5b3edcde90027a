#include "actdet/i3d_head.hpp"

#include <stdexcept>

namespace actdet {

HeadOut i3d_head_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                         NodeId tube) {
    const Tensor& t = g.value(tube);
    if (t.ndim() != 4 || t.dim(1) != ModelConfig::roi_size ||
        t.dim(2) != ModelConfig::roi_size || t.dim(3) != cfg.feat_channels()) {
        throw std::invalid_argument("i3d_head: expected (T',7,7,F) tube, got " +
                                    shape_str(t.shape));
    }
    NodeId h = g.relu(g.conv3d(tube, ps.node(g, "i3d.block1.w"),
                               ps.node(g, "i3d.block1.b"), {1, 1, 1}, {1, 1, 1}));
    h = g.relu(g.conv3d(h, ps.node(g, "i3d.block2.w"), ps.node(g, "i3d.block2.b"),
                        {1, 1, 1}, {1, 1, 1}));
    NodeId pooled = g.spatial_mean(h);  // global average over (T',7,7)
    return {g.linear(pooled, ps.node(g, "i3d.cls.w"), ps.node(g, "i3d.cls.b")),
            g.linear(pooled, ps.node(g, "i3d.reg.w"), ps.node(g, "i3d.reg.b"))};
}

}  // namespace actdet
