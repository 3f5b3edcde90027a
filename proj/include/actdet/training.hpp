#pragma once

#include <vector>

#include "actdet/config.hpp"
#include "actdet/geometry.hpp"
#include "actdet/params.hpp"
#include "actdet/synthdata.hpp"

namespace actdet {

// Warmup then half-cosine decay to zero over the remaining steps.
double lr_at(const TrainConfig& tc, int64_t step);

// Per-anchor targets for the objectness and box branches. Anchors overlapping
// a box above the positive bound, plus the best anchor of every box, train as
// positive; those below the negative bound train as background; the band in
// between gets zero weight.
struct RpnTargets {
    Tensor obj_targets, obj_weights;      // (A,)
    Tensor delta_targets, delta_weights;  // (A,4)
    int num_pos = 0;
};
RpnTargets rpn_targets(const std::vector<Box>& anchors,
                       const std::vector<Box>& gts, double pos_iou,
                       double neg_iou);

// Proposal-to-box assignment at `match_iou`, then a deterministic sample of
// all positives plus up to ratio*pos negatives.
struct SampledProposals {
    std::vector<Box> boxes;
    std::vector<int> gt;  // matched box index, -1 for background samples
};
SampledProposals sample_proposals(const std::vector<Box>& proposals,
                                  const std::vector<Box>& gts, double match_iou,
                                  int neg_pos_ratio, uint64_t seed,
                                  uint64_t stream);

// Horizontal flip (p=0.5) and a random crop of side fraction [0.8,1] scaled
// back to full size; boxes follow, clips that would lose every box keep the
// original frame. Deterministic in (seed, stream).
ClipSample augment_clip(const ClipSample& clip, uint64_t seed, uint64_t stream);

struct StepStats {
    int64_t step = 0;
    double lr = 0.0;
    double loss = 0.0;  // total, per clip
    double rpn_obj = 0.0, rpn_reg = 0.0;
    double head_cls = 0.0, head_reg = 0.0;
    int positives = 0;
};

// One optimizer over one model. train_step consumes batch_size clips, runs
// per-clip graphs, averages grads and applies momentum SGD.
class Trainer {
  public:
    Trainer(ModelConfig mc, TrainConfig tc, ParamStore& params, OptState& opt);

    StepStats train_step(const std::vector<ClipSample>& batch);
    int64_t step() const { return opt_.step; }

  private:
    double clip_loss(const ClipSample& clip, uint64_t substream, StepStats& stats);

    ModelConfig mc_;
    TrainConfig tc_;
    ParamStore& params_;
    OptState& opt_;
};

}  // namespace actdet
