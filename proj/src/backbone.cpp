#include "actdet/backbone.hpp"

#include <stdexcept>

namespace actdet {

TrunkShape trunk_output_shape(int64_t t, int64_t h, int64_t w) {
    if (t <= 0 || h <= 0 || w <= 0 || t % ModelConfig::temporal_stride != 0 ||
        h % ModelConfig::spatial_stride != 0 || w % ModelConfig::spatial_stride != 0) {
        throw std::invalid_argument(
            "trunk: input dims (" + std::to_string(t) + "," + std::to_string(h) +
            "," + std::to_string(w) + ") must be divisible by (4,16,16)");
    }
    return {t / ModelConfig::temporal_stride, h / ModelConfig::spatial_stride,
            w / ModelConfig::spatial_stride};
}

NodeId trunk_forward(Graph& g, const ModelConfig& cfg, ParamStore& ps, NodeId clip) {
    const Tensor& x = g.value(clip);
    if (x.ndim() != 4 || x.dim(3) != 3) {
        throw std::invalid_argument("trunk: expected (T,H,W,3), got " +
                                    shape_str(x.shape));
    }
    trunk_output_shape(x.dim(0), x.dim(1), x.dim(2));  // validate before compute

    auto block = [&](NodeId in, const char* name, std::array<int, 3> stride) {
        return g.relu(g.conv3d(in, ps.node(g, std::string(name) + ".w"),
                               ps.node(g, std::string(name) + ".b"), stride,
                               {1, 1, 1}));
    };
    NodeId h = block(clip, "trunk.conv1", {1, 2, 2});
    h = block(h, "trunk.conv2", {2, 2, 2});
    h = block(h, "trunk.conv3", {2, 2, 2});
    h = block(h, "trunk.conv4", {1, 2, 2});
    return h;
}

NodeId slice_center(Graph& g, NodeId features) {
    const int64_t tp = g.value(features).dim(0);
    return g.slice0(features, tp / 2);
}

NodeId location_embedding(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                          int64_t tp, int64_t hp, int64_t wp) {
    if (tp <= 0 || hp <= 0 || wp <= 0) {
        throw std::invalid_argument("location_embedding: non-positive dims");
    }
    // coordinate grids, normalized to [-1,1] about the center
    auto norm = [](int64_t i, int64_t n) {
        return n > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0
                     : 0.0;
    };
    Tensor spatial({hp * wp, 2});
    for (int64_t h = 0; h < hp; ++h) {
        for (int64_t w = 0; w < wp; ++w) {
            spatial.data[(h * wp + w) * 2 + 0] = norm(h, hp);
            spatial.data[(h * wp + w) * 2 + 1] = norm(w, wp);
        }
    }
    Tensor temporal({tp, 1});
    for (int64_t t = 0; t < tp; ++t) temporal.data[t] = norm(t, tp);

    auto mlp = [&](NodeId in, const char* prefix) {
        NodeId h = g.relu(g.linear(in, ps.node(g, std::string(prefix) + ".fc1.w"),
                                   ps.node(g, std::string(prefix) + ".fc1.b")));
        return g.linear(h, ps.node(g, std::string(prefix) + ".fc2.w"),
                        ps.node(g, std::string(prefix) + ".fc2.b"));
    };
    NodeId spat = mlp(g.constant(std::move(spatial)), "emb.spatial");   // (hp*wp,E/2)
    NodeId temp = mlp(g.constant(std::move(temporal)), "emb.temporal");  // (tp,E/2)

    // broadcast to the full (tp,hp,wp,E) grid through graph ops so the MLP
    // params stay trainable
    const int64_t e = cfg.emb_out;
    std::vector<NodeId> frames;
    frames.reserve(tp);
    for (int64_t t = 0; t < tp; ++t) {
        NodeId trow = g.slice0(temp, t);                         // (E/2,)
        NodeId trep = g.stack0(std::vector<NodeId>(hp * wp, trow));  // (hp*wp,E/2)
        NodeId frame = g.concat_last({spat, trep});              // (hp*wp,E)
        frames.push_back(frame);
    }
    NodeId stacked = g.stack0(frames);  // (tp,hp*wp,E)
    return g.reshape(stacked, {tp, hp, wp, 2 * e});
}

NodeId append_embedding(Graph& g, NodeId features, NodeId embedding) {
    const Tensor& f = g.value(features);
    const Tensor& e = g.value(embedding);
    if (f.ndim() != 4 || e.ndim() != 4 || f.dim(0) != e.dim(0) ||
        f.dim(1) != e.dim(1) || f.dim(2) != e.dim(2)) {
        throw std::invalid_argument("append_embedding: shape mismatch " +
                                    shape_str(f.shape) + " vs " + shape_str(e.shape));
    }
    return g.concat_last({features, embedding});
}

}  // namespace actdet
