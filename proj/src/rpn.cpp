#include "actdet/rpn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace actdet {

RpnOut rpn_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                   NodeId center_features) {
    const Tensor& f = g.value(center_features);
    if (f.ndim() != 3 || f.dim(2) != cfg.trunk_channels()) {
        throw std::invalid_argument("rpn: expected (H',W'," +
                                    std::to_string(cfg.trunk_channels()) +
                                    "), got " + shape_str(f.shape));
    }
    const int64_t hp = f.dim(0), wp = f.dim(1);
    const int a = cfg.num_anchors_per_cell();
    NodeId x = g.reshape(center_features, {1, hp, wp, f.dim(2)});
    x = g.relu(g.conv3d(x, ps.node(g, "rpn.conv.w"), ps.node(g, "rpn.conv.b"),
                        {1, 1, 1}, {0, 1, 1}));
    NodeId logits = g.linear(x, ps.node(g, "rpn.obj.w"), ps.node(g, "rpn.obj.b"));
    NodeId deltas = g.linear(x, ps.node(g, "rpn.delta.w"), ps.node(g, "rpn.delta.b"));
    return {g.reshape(logits, {hp * wp * a}), g.reshape(deltas, {hp * wp * a, 4})};
}

ProposalSet select_proposals(const std::vector<double>& logits,
                             const std::vector<double>& deltas,
                             const std::vector<Box>& anchors, int r,
                             double img_w, double img_h, double nms_thresh) {
    if (r < 1) throw std::invalid_argument("select_proposals: R must be >= 1");
    if (logits.size() != anchors.size() || deltas.size() != 4 * anchors.size()) {
        throw std::invalid_argument("select_proposals: size mismatch");
    }
    std::vector<std::pair<Box, double>> cands;
    std::vector<int> src;
    for (size_t i = 0; i < anchors.size(); ++i) {
        Box b = decode_deltas(anchors[i],
                              {deltas[4 * i], deltas[4 * i + 1], deltas[4 * i + 2],
                               deltas[4 * i + 3]});
        b = clip_box(b, img_w, img_h);
        if (b.width() <= 0.0 || b.height() <= 0.0) continue;
        cands.emplace_back(b, logits[i]);
        src.push_back(static_cast<int>(i));
    }
    std::vector<int> kept = nms(cands, nms_thresh);
    if (static_cast<int>(kept.size()) > r) kept.resize(r);
    ProposalSet out;
    for (int k : kept) {
        out.boxes.push_back(cands[k].first);
        out.scores.push_back(cands[k].second);
        out.anchor_idx.push_back(src[k]);
    }
    return out;
}

}  // namespace actdet
