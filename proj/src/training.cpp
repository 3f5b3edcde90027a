#include "actdet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "actdet/pipeline.hpp"
#include "actdet/rng.hpp"
#include "actdet/rpn.hpp"

namespace actdet {

double lr_at(const TrainConfig& tc, int64_t step) {
    if (step < tc.warmup_steps) {
        const double t = static_cast<double>(step) / tc.warmup_steps;
        return tc.warmup_lr + (tc.base_lr - tc.warmup_lr) * t;
    }
    const double denom = std::max<int64_t>(1, tc.total_steps - tc.warmup_steps);
    const double p = std::min(1.0, (step - tc.warmup_steps) / denom);
    return tc.base_lr * 0.5 * (1.0 + std::cos(M_PI * p));
}

RpnTargets rpn_targets(const std::vector<Box>& anchors,
                       const std::vector<Box>& gts, double pos_iou,
                       double neg_iou) {
    const int64_t a = static_cast<int64_t>(anchors.size());
    RpnTargets t;
    t.obj_targets = Tensor({a});
    t.obj_weights = Tensor({a});
    t.delta_targets = Tensor({a, 4});
    t.delta_weights = Tensor({a, 4});

    std::vector<double> best_iou(anchors.size(), 0.0);
    std::vector<int> best_gt(anchors.size(), -1);
    std::vector<int> gt_best_anchor(gts.size(), -1);
    std::vector<double> gt_best_iou(gts.size(), -1.0);
    for (size_t i = 0; i < anchors.size(); ++i) {
        for (size_t j = 0; j < gts.size(); ++j) {
            const double v = iou(anchors[i], gts[j]);
            if (v > best_iou[i]) {
                best_iou[i] = v;
                best_gt[i] = static_cast<int>(j);
            }
            if (v > gt_best_iou[j]) {
                gt_best_iou[j] = v;
                gt_best_anchor[j] = static_cast<int>(i);
            }
        }
    }
    std::vector<bool> pos(anchors.size(), false);
    for (size_t i = 0; i < anchors.size(); ++i) pos[i] = best_iou[i] >= pos_iou;
    // every box trains its best-overlapping anchor even below the bound
    for (size_t j = 0; j < gts.size(); ++j) {
        if (gt_best_anchor[j] >= 0 && gt_best_iou[j] > 0.0) {
            pos[gt_best_anchor[j]] = true;
            if (best_gt[gt_best_anchor[j]] < 0) {
                best_gt[gt_best_anchor[j]] = static_cast<int>(j);
            }
        }
    }
    for (size_t i = 0; i < anchors.size(); ++i) {
        if (pos[i]) {
            t.obj_targets.data[i] = 1.0;
            t.obj_weights.data[i] = 1.0;
            const auto d = encode_deltas(anchors[i], gts[best_gt[i]]);
            for (int k = 0; k < 4; ++k) {
                t.delta_targets.data[i * 4 + k] = d[k];
                t.delta_weights.data[i * 4 + k] = 1.0;
            }
            ++t.num_pos;
        } else if (best_iou[i] < neg_iou) {
            t.obj_weights.data[i] = 1.0;
        }
    }
    return t;
}

SampledProposals sample_proposals(const std::vector<Box>& proposals,
                                  const std::vector<Box>& gts, double match_iou,
                                  int neg_pos_ratio, uint64_t seed,
                                  uint64_t stream) {
    std::vector<int> pos_idx, neg_idx;
    std::vector<int> match(proposals.size(), -1);
    for (size_t i = 0; i < proposals.size(); ++i) {
        double best = 0.0;
        for (size_t j = 0; j < gts.size(); ++j) {
            const double v = iou(proposals[i], gts[j]);
            if (v > best) {
                best = v;
                match[i] = static_cast<int>(j);
            }
        }
        if (best >= match_iou) {
            pos_idx.push_back(static_cast<int>(i));
        } else {
            match[i] = -1;
            neg_idx.push_back(static_cast<int>(i));
        }
    }
    const size_t want_neg =
        static_cast<size_t>(neg_pos_ratio) * std::max<size_t>(1, pos_idx.size());
    if (neg_idx.size() > want_neg) {
        // deterministic subsample: order negatives by a counter-hashed key
        std::stable_sort(neg_idx.begin(), neg_idx.end(), [&](int a, int b) {
            return counter_uniform(seed, stream, a) < counter_uniform(seed, stream, b);
        });
        neg_idx.resize(want_neg);
        std::sort(neg_idx.begin(), neg_idx.end());
    }
    SampledProposals out;
    for (int i : pos_idx) {
        out.boxes.push_back(proposals[i]);
        out.gt.push_back(match[i]);
    }
    for (int i : neg_idx) {
        out.boxes.push_back(proposals[i]);
        out.gt.push_back(-1);
    }
    return out;
}

namespace {

double bilinear_at(const Tensor& video, int t, double y, double x, int c) {
    const int64_t h = video.dim(1), w = video.dim(2);
    const double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const int64_t y0 = static_cast<int64_t>(std::floor(yc));
    const int64_t x0 = static_cast<int64_t>(std::floor(xc));
    const int64_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = yc - y0, fx = xc - x0;
    auto at = [&](int64_t yy, int64_t xx) {
        return video.data[((t * h + yy) * w + xx) * 3 + c];
    };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
           fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

}  // namespace

ClipSample augment_clip(const ClipSample& clip, uint64_t seed, uint64_t stream) {
    SeqRng rng(hash_combine(seed, stream));
    const bool flip = rng.bernoulli(0.5);
    const int64_t tt = clip.video.dim(0);
    const int64_t s = clip.video.dim(1);
    const double sd = static_cast<double>(s);

    double frac = 1.0, x0 = 0.0, y0 = 0.0;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double f = rng.uniform(0.8, 1.0);
        const double cx0 = rng.uniform(0.0, sd * (1.0 - f));
        const double cy0 = rng.uniform(0.0, sd * (1.0 - f));
        bool all_kept = true;
        for (const auto& gt : clip.gts) {
            const Box in{cx0, cy0, cx0 + f * sd, cy0 + f * sd};
            const double inter = iou(gt.box, in) > 0
                                     ? (std::min(gt.box.x2, in.x2) - std::max(gt.box.x1, in.x1)) *
                                           (std::min(gt.box.y2, in.y2) - std::max(gt.box.y1, in.y1))
                                     : 0.0;
            if (gt.box.area() <= 0 || inter < 0.3 * gt.box.area()) {
                all_kept = false;
                break;
            }
        }
        if (all_kept) {
            frac = f;
            x0 = cx0;
            y0 = cy0;
            break;
        }
    }

    ClipSample out;
    out.clip_id = clip.clip_id;
    out.scene = clip.scene;
    out.video = Tensor(clip.video.shape);
    for (int64_t t = 0; t < tt; ++t) {
        for (int64_t y = 0; y < s; ++y) {
            for (int64_t x = 0; x < s; ++x) {
                // output pixel center mapped into the crop, flip applied in
                // source coordinates
                double sx = x0 + (x + 0.5) * frac - 0.5;
                const double sy = y0 + (y + 0.5) * frac - 0.5;
                if (flip) sx = sd - 1.0 - sx;
                for (int c = 0; c < 3; ++c) {
                    out.video.data[((t * s + y) * s + x) * 3 + c] =
                        bilinear_at(clip.video, static_cast<int>(t), sy, sx, c);
                }
            }
        }
    }
    for (const auto& gt : clip.gts) {
        GtBox g = gt;
        double bx1 = gt.box.x1, bx2 = gt.box.x2;
        if (flip) {
            bx1 = sd - gt.box.x2;
            bx2 = sd - gt.box.x1;
        }
        g.box = clip_box(Box{(bx1 - x0) / frac, (gt.box.y1 - y0) / frac,
                             (bx2 - x0) / frac, (gt.box.y2 - y0) / frac},
                         sd, sd);
        if (g.box.area() > 1.0) out.gts.push_back(std::move(g));
    }
    if (out.gts.empty()) return clip;
    return out;
}

Trainer::Trainer(ModelConfig mc, TrainConfig tc, ParamStore& params, OptState& opt)
    : mc_(std::move(mc)), tc_(tc), params_(params), opt_(opt) {
    for (auto& [name, t] : params_.tensors) {
        if (!opt_.momentum.count(name)) opt_.momentum[name] = Tensor(t.shape);
    }
}

double Trainer::clip_loss(const ClipSample& clip, uint64_t substream,
                          StepStats& stats) {
    Graph g;
    g.training = true;
    g.seed = tc_.seed;
    g.step = substream;

    const double img = static_cast<double>(clip.video.dim(1));
    std::vector<Box> gtb;
    for (const auto& gt : clip.gts) gtb.push_back(gt.box);

    FeaturePipeline fp = build_features(g, mc_, params_, clip.video);

    NodeId total = g.input(Tensor::scalar(0.0));
    std::vector<Box> prop_boxes;
    if (tc_.gt_boxes) {
        prop_boxes = gtb;
    } else {
        RpnOut rpn = rpn_forward(g, mc_, params_, fp.center_pre);
        const std::vector<Box> anchors =
            make_anchors(static_cast<int>(fp.shape.h), static_cast<int>(fp.shape.w),
                         ModelConfig::spatial_stride, mc_.anchor_scales,
                         mc_.anchor_ratios);
        RpnTargets rt = rpn_targets(anchors, gtb, tc_.rpn_pos_iou, tc_.rpn_neg_iou);
        double n_obj = 0;
        for (double w : rt.obj_weights.data) n_obj += w;
        if (n_obj > 0) {
            for (double& w : rt.obj_weights.data) w /= n_obj;
        }
        if (rt.num_pos > 0) {
            for (double& w : rt.delta_weights.data) w /= rt.num_pos;
        }
        NodeId obj_l = g.sigmoid_ce(rpn.logits, rt.obj_targets, rt.obj_weights);
        NodeId reg_l = g.smooth_l1(rpn.deltas, rt.delta_targets, rt.delta_weights);
        stats.rpn_obj += g.value(obj_l).data[0];
        stats.rpn_reg += g.value(reg_l).data[0];
        total = g.add(total, g.scale(g.add(obj_l, reg_l), tc_.rpn_loss_weight));

        ProposalSet props = select_proposals(
            g.value(rpn.logits).data, g.value(rpn.deltas).data, anchors,
            mc_.proposal_count, img, img, mc_.rpn_nms_thresh);
        prop_boxes = props.boxes;
        // boxes themselves join the training pool so the head sees clean
        // positives from the start
        prop_boxes.insert(prop_boxes.end(), gtb.begin(), gtb.end());
    }

    SampledProposals sp =
        sample_proposals(prop_boxes, gtb, tc_.match_iou, tc_.neg_pos_ratio,
                         tc_.seed, hash_combine(substream, 0x70726f70ULL));
    if (sp.boxes.empty()) return g.value(total).data[0];

    const int ec = mc_.eff_classes();
    int pos_pairs = 0, num_pos = 0;
    for (size_t i = 0; i < sp.boxes.size(); ++i) {
        if (sp.gt[i] < 0) continue;
        ++num_pos;
        if (mc_.class_agnostic_reg) {
            ++pos_pairs;
        } else {
            const auto& labels = clip.gts[sp.gt[i]].labels;
            pos_pairs += mc_.action_agnostic ? (labels.empty() ? 0 : 1)
                                             : static_cast<int>(labels.size());
        }
    }
    stats.positives += num_pos;

    const double cls_w = 1.0 / static_cast<double>(sp.boxes.size());
    NodeId cls_total = g.input(Tensor::scalar(0.0));
    NodeId reg_total = g.input(Tensor::scalar(0.0));
    for (size_t i = 0; i < sp.boxes.size(); ++i) {
        ProposalHead ph = proposal_forward(g, mc_, params_, fp, sp.boxes[i]);
        Tensor t({static_cast<int64_t>(ec + 1)});
        if (sp.gt[i] >= 0) {
            const auto& labels = clip.gts[sp.gt[i]].labels;
            if (mc_.action_agnostic) {
                if (!labels.empty()) t.data[0] = 1.0;
            } else {
                for (int c : labels) t.data[c] = 1.0;
            }
            if (labels.empty()) t.data[ec] = 1.0;  // person with no action
        } else {
            t.data[ec] = 1.0;
        }
        cls_total = g.add(cls_total,
                          g.sigmoid_ce(ph.logits, t, Tensor::full({ec + 1}, cls_w)));

        if (sp.gt[i] < 0) continue;
        const auto d = encode_deltas(sp.boxes[i], gtb[sp.gt[i]]);
        if (mc_.class_agnostic_reg) {
            Tensor dt({4}), dw({4});
            for (int k = 0; k < 4; ++k) {
                dt.data[k] = d[k];
                dw.data[k] = 1.0 / std::max(1, pos_pairs);
            }
            reg_total = g.add(reg_total, g.smooth_l1(ph.deltas, dt, dw));
        } else {
            Tensor dt({static_cast<int64_t>(4 * ec)}), dw({static_cast<int64_t>(4 * ec)});
            std::vector<int> classes;
            const auto& labels = clip.gts[sp.gt[i]].labels;
            if (mc_.action_agnostic) {
                if (!labels.empty()) classes.push_back(0);
            } else {
                classes.assign(labels.begin(), labels.end());
            }
            for (int c : classes) {
                for (int k = 0; k < 4; ++k) {
                    dt.data[c * 4 + k] = d[k];
                    dw.data[c * 4 + k] = 1.0 / std::max(1, pos_pairs);
                }
            }
            if (!classes.empty()) {
                reg_total = g.add(reg_total, g.smooth_l1(ph.deltas, dt, dw));
            }
        }
    }
    stats.head_cls += g.value(cls_total).data[0];
    stats.head_reg += g.value(reg_total).data[0];
    total = g.add(total, g.add(cls_total, reg_total));

    const double loss = g.value(total).data[0];
    if (!std::isfinite(loss)) {
        throw std::runtime_error("non-finite loss at step " +
                                 std::to_string(opt_.step) + " (clip " +
                                 std::to_string(clip.clip_id) + ")");
    }
    g.backward(total);
    return loss;
}

StepStats Trainer::train_step(const std::vector<ClipSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    StepStats stats;
    stats.step = opt_.step;
    stats.lr = lr_at(tc_, opt_.step);

    params_.zero_grads();
    for (size_t b = 0; b < batch.size(); ++b) {
        const uint64_t substream =
            static_cast<uint64_t>(opt_.step) * batch.size() + b;
        if (tc_.augment) {
            const ClipSample aug = augment_clip(
                batch[b], tc_.seed, hash_combine(substream, 0x61756758ULL));
            stats.loss += clip_loss(aug, substream, stats);
        } else {
            stats.loss += clip_loss(batch[b], substream, stats);
        }
    }
    const double inv_b = 1.0 / batch.size();
    stats.loss *= inv_b;
    stats.rpn_obj *= inv_b;
    stats.rpn_reg *= inv_b;
    stats.head_cls *= inv_b;
    stats.head_reg *= inv_b;

    for (auto& [name, p] : params_.tensors) {
        Tensor& v = opt_.momentum[name];
        p.ensure_grad();
        for (size_t i = 0; i < p.data.size(); ++i) {
            v.data[i] = tc_.momentum * v.data[i] + p.grad[i] * inv_b;
            p.data[i] -= stats.lr * v.data[i];
        }
    }
    ++opt_.step;
    return stats;
}

}  // namespace actdet
