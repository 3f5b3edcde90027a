#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace actdet {

enum class QprMode { HighRes, LowRes };
enum class HeadMode { Tx, I3d, TxI3d };

const char* to_string(QprMode m);
const char* to_string(HeadMode m);
QprMode qpr_from_string(const std::string& s);
HeadMode head_from_string(const std::string& s);

struct ModelConfig {
    int num_classes = 6;  // C (before any action-agnostic collapse)

    // trunk: 4 strided 3-d convs, temporal strides 1,2,2,1, spatial 2,2,2,2
    int trunk_c1 = 16, trunk_c2 = 16, trunk_c3 = 32, trunk_c4 = 32;
    int emb_hidden = 8, emb_out = 8;  // per branch; E = 2*emb_out

    int rpn_channels = 32;
    std::vector<double> anchor_scales = {12.0, 20.0, 28.0};
    std::vector<double> anchor_ratios = {1.0};
    double rpn_nms_thresh = 0.7;
    int proposal_count = 300;  // R

    int tx_dim = 128;  // D; value dim kept equal
    int tx_heads = 2;
    int tx_layers = 3;
    double tx_dropout = 0.3;
    int tx_ffn_hidden = 256;
    int qpr_reduce_channels = 32;
    QprMode qpr = QprMode::HighRes;
    HeadMode head = HeadMode::Tx;
    bool class_agnostic_reg = true;
    bool action_agnostic = false;

    static constexpr int spatial_stride = 16;
    static constexpr int temporal_stride = 4;
    static constexpr int roi_size = 7;

    int emb_channels() const { return 2 * emb_out; }
    int trunk_channels() const { return trunk_c4; }
    int feat_channels() const { return trunk_c4 + emb_channels(); }
    // effective action classes after optional collapse to a single one
    int eff_classes() const { return action_agnostic ? 1 : num_classes; }
    int num_logits() const { return eff_classes() + 1; }  // + background
    int num_anchors_per_cell() const {
        return static_cast<int>(anchor_scales.size() * anchor_ratios.size());
    }
    int reg_outputs() const { return class_agnostic_reg ? 4 : 4 * eff_classes(); }

    // Canonical serialization; its hash guards checkpoint compatibility.
    std::string canonical() const;
    uint64_t hash() const;
};

struct TrainConfig {
    double base_lr = 0.1;
    double warmup_lr = 0.01;
    int warmup_steps = 100;
    int total_steps = 2000;
    int batch_size = 2;
    uint64_t seed = 1;
    double momentum = 0.9;
    bool gt_boxes = false;
    bool augment = true;
    double rpn_loss_weight = 1.0;
    int neg_pos_ratio = 3;
    double rpn_pos_iou = 0.7;
    double rpn_neg_iou = 0.3;
    double match_iou = 0.5;
};

}  // namespace actdet
