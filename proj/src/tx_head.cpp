#include "actdet/tx_head.hpp"

#include <cmath>
#include <stdexcept>

namespace actdet {

NodeId qpr(Graph& g, const ModelConfig& cfg, ParamStore& ps, NodeId roi) {
    const Tensor& r = g.value(roi);
    const int s = ModelConfig::roi_size;
    if (r.ndim() != 3 || r.dim(0) != s || r.dim(1) != s) {
        throw std::invalid_argument("qpr: expected (7,7,F) roi, got " +
                                    shape_str(r.shape));
    }
    if (cfg.qpr == QprMode::HighRes) {
        NodeId reduced = g.linear(roi, ps.node(g, "tx.qpr.reduce.w"),
                                  ps.node(g, "tx.qpr.reduce.b"));
        NodeId flat = g.reshape(reduced, {s * s * cfg.qpr_reduce_channels});
        return g.linear(flat, ps.node(g, "tx.qpr.proj.w"),
                        ps.node(g, "tx.qpr.proj.b"));
    }
    NodeId mean = g.spatial_mean(roi);
    return g.linear(mean, ps.node(g, "tx.qpr.proj.w"), ps.node(g, "tx.qpr.proj.b"));
}

TxUnitOut tx_unit(Graph& g, const ModelConfig& cfg, ParamStore& ps, int layer,
                  int head, NodeId query, NodeId memory_flat) {
    const Tensor& q = g.value(query);
    const Tensor& m = g.value(memory_flat);
    const int64_t d = cfg.tx_dim;
    if (q.ndim() != 1 || q.dim(0) != d || m.ndim() != 2 ||
        m.dim(1) != cfg.feat_channels()) {
        throw std::invalid_argument("tx_unit: shape mismatch " + shape_str(q.shape) +
                                    " vs " + shape_str(m.shape));
    }
    const std::string p =
        "tx.layer" + std::to_string(layer) + ".head" + std::to_string(head);
    const uint64_t lid = static_cast<uint64_t>(layer * cfg.tx_heads + head) * 2;

    NodeId keys = g.linear(memory_flat, ps.node(g, p + ".key.w"),
                           ps.node(g, p + ".key.b"));  // (N,D)
    NodeId values = g.linear(memory_flat, ps.node(g, p + ".value.w"),
                             ps.node(g, p + ".value.b"));  // (N,D)
    NodeId logits = g.matmul(keys, g.reshape(query, {d, 1}));  // (N,1)
    logits = g.scale(g.reshape(logits, {m.dim(0)}), 1.0 / std::sqrt(static_cast<double>(d)));
    NodeId attn = g.softmax(logits);
    NodeId pooled = g.attend(attn, values);  // (D,)

    NodeId q1 = g.layernorm(g.add(query, g.dropout(pooled, cfg.tx_dropout, lid)),
                            ps.node(g, p + ".ln1.g"), ps.node(g, p + ".ln1.b"));
    NodeId ffn = g.linear(
        g.relu(g.linear(q1, ps.node(g, p + ".ffn1.w"), ps.node(g, p + ".ffn1.b"))),
        ps.node(g, p + ".ffn2.w"), ps.node(g, p + ".ffn2.b"));
    NodeId q2 = g.layernorm(g.add(q1, g.dropout(ffn, cfg.tx_dropout, lid + 1)),
                            ps.node(g, p + ".ln2.g"), ps.node(g, p + ".ln2.b"));
    return {q2, attn};
}

TxOut tx_stack(Graph& g, const ModelConfig& cfg, ParamStore& ps, NodeId query,
               NodeId memory) {
    const Tensor& m = g.value(memory);
    NodeId mem_flat = memory;
    if (m.ndim() == 4) {
        mem_flat = g.reshape(memory, {m.dim(0) * m.dim(1) * m.dim(2), m.dim(3)});
    } else if (m.ndim() != 2) {
        throw std::invalid_argument("tx_stack: expected (T',H',W',F) or (N,F) memory");
    }
    TxOut out;
    NodeId q = query;
    for (int l = 0; l < cfg.tx_layers; ++l) {
        std::vector<NodeId> head_feats;
        std::vector<NodeId> head_attn;
        for (int h = 0; h < cfg.tx_heads; ++h) {
            TxUnitOut u = tx_unit(g, cfg, ps, l, h, q, mem_flat);
            head_feats.push_back(u.feature);
            head_attn.push_back(u.attention);
        }
        NodeId cat = head_feats.size() == 1 ? head_feats[0] : g.concat_last(head_feats);
        const std::string lp = "tx.layer" + std::to_string(l);
        q = g.linear(cat, ps.node(g, lp + ".out.w"), ps.node(g, lp + ".out.b"));
        out.attention.push_back(std::move(head_attn));
    }
    out.feature = q;
    return out;
}

HeadOut tx_head_outputs(Graph& g, const ModelConfig& cfg, ParamStore& ps,
                        NodeId feature) {
    return {g.linear(feature, ps.node(g, "tx.cls.w"), ps.node(g, "tx.cls.b")),
            g.linear(feature, ps.node(g, "tx.reg.w"), ps.node(g, "tx.reg.b"))};
}

CombinedOut combined_head_mode(const ModelConfig& cfg, Graph& g,
                               const HeadOut* tx, const HeadOut* i3d) {
    const HeadOut* cls_src = nullptr;
    const HeadOut* reg_src = nullptr;
    switch (cfg.head) {
        case HeadMode::Tx: cls_src = reg_src = tx; break;
        case HeadMode::I3d: cls_src = reg_src = i3d; break;
        case HeadMode::TxI3d: cls_src = tx; reg_src = i3d; break;
    }
    if (!cls_src || !reg_src) {
        throw std::invalid_argument("combined_head_mode: missing head outputs");
    }
    const Tensor& logits = g.value(cls_src->logits);
    CombinedOut out;
    const int c = cfg.eff_classes();
    out.scores.resize(c);
    for (int i = 0; i < c; ++i) out.scores[i] = 1.0 / (1.0 + std::exp(-logits.data[i]));
    out.background = 1.0 / (1.0 + std::exp(-logits.data[c]));
    out.reg_deltas = g.value(reg_src->deltas).data;
    return out;
}

AttentionTraceSlice collect_trace(const Graph& g, const TxOut& out, int64_t tp,
                                  int64_t hp, int64_t wp) {
    AttentionTraceSlice s;
    s.tp = tp;
    s.hp = hp;
    s.wp = wp;
    for (const auto& layer : out.attention) {
        std::vector<std::vector<double>> lw;
        for (NodeId id : layer) lw.push_back(g.value(id).data);
        s.weights.push_back(std::move(lw));
    }
    return s;
}

}  // namespace actdet
