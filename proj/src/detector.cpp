#include "actdet/detector.hpp"

#include <algorithm>
#include <cmath>

#include "actdet/pipeline.hpp"
#include "actdet/rpn.hpp"

namespace actdet {

ClipDetections detect_clip(const ModelConfig& cfg, ParamStore& params,
                           const Tensor& video, int clip_id,
                           const DetectOptions& opt) {
    Graph g;
    g.training = false;

    const double img_h = static_cast<double>(video.dim(1));
    const double img_w = static_cast<double>(video.dim(2));
    FeaturePipeline fp = build_features(g, cfg, params, video);

    std::vector<Box> boxes;
    if (opt.gt_boxes) {
        boxes = *opt.gt_boxes;
    } else {
        RpnOut rpn = rpn_forward(g, cfg, params, fp.center_pre);
        const std::vector<Box> anchors =
            make_anchors(static_cast<int>(fp.shape.h), static_cast<int>(fp.shape.w),
                         ModelConfig::spatial_stride, cfg.anchor_scales,
                         cfg.anchor_ratios);
        ProposalSet props = select_proposals(
            g.value(rpn.logits).data, g.value(rpn.deltas).data, anchors,
            opt.max_proposals, img_w, img_h, cfg.rpn_nms_thresh);
        boxes = props.boxes;
    }

    ClipDetections out;
    const int ec = cfg.eff_classes();
    std::vector<std::vector<std::pair<Box, double>>> per_class(ec);
    for (const Box& b : boxes) {
        ProposalHead ph = proposal_forward(g, cfg, params, fp, b);
        const Tensor& logits = g.value(ph.logits);
        const Tensor& deltas = g.value(ph.deltas);
        if (opt.collect_attention && ph.has_tx) {
            out.traces.push_back(
                collect_trace(g, ph.tx, fp.shape.t, fp.shape.h, fp.shape.w));
            out.trace_boxes.push_back(b);
        }
        for (int c = 0; c < ec; ++c) {
            const double score = 1.0 / (1.0 + std::exp(-logits.data[c]));
            if (score < opt.min_score) continue;
            std::array<double, 4> d;
            const int base = cfg.class_agnostic_reg ? 0 : 4 * c;
            for (int k = 0; k < 4; ++k) d[k] = deltas.data[base + k];
            Box refined = clip_box(decode_deltas(b, d), img_w, img_h);
            if (refined.area() <= 0) continue;
            per_class[c].emplace_back(refined, score);
        }
    }
    for (int c = 0; c < ec; ++c) {
        for (int k : nms(per_class[c], opt.nms_thresh)) {
            out.dets.push_back(
                {clip_id, c, per_class[c][k].second, per_class[c][k].first});
        }
    }
    return out;
}

}  // namespace actdet
