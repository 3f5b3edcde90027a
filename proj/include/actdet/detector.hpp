#pragma once

#include <vector>

#include "actdet/config.hpp"
#include "actdet/geometry.hpp"
#include "actdet/params.hpp"
#include "actdet/synthdata.hpp"
#include "actdet/tx_head.hpp"

namespace actdet {

// One scored box of one action class, the evaluator's unit of input.
struct ClassDet {
    int clip_id = 0;
    int class_id = 0;
    double score = 0.0;
    Box box;
};

struct ClipDetections {
    std::vector<ClassDet> dets;  // after per-class NMS
    // per kept proposal: attention weights for every (layer, head), present
    // when requested and the attention head ran
    std::vector<AttentionTraceSlice> traces;
    std::vector<Box> trace_boxes;
};

struct DetectOptions {
    const std::vector<Box>* gt_boxes = nullptr;  // bypass the RPN when set
    int max_proposals = 16;     // proposals scored by the heads at eval
    double nms_thresh = 0.5;    // final per-class NMS
    double min_score = 0.02;    // drop near-zero class scores early
    bool collect_attention = false;
};

// Full eval-mode pass over one clip. Deterministic: identical inputs produce
// bit-identical outputs.
ClipDetections detect_clip(const ModelConfig& cfg, ParamStore& params,
                           const Tensor& video, int clip_id,
                           const DetectOptions& opt);

}  // namespace actdet
