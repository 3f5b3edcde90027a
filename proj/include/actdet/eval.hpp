#pragma once

#include <string>
#include <vector>

#include "actdet/detector.hpp"
#include "actdet/geometry.hpp"

namespace actdet {

struct EvalGt {
    int clip_id = 0;
    Box box;
    std::vector<int> labels;
};

// Greedy matching for one class: detections in descending score order, each
// claiming the unmatched same-clip box of highest overlap at or above the
// threshold. Returns per-detection true/false-positive flags aligned with the
// score-sorted order.
struct MatchResult {
    std::vector<int> det_order;  // indices into dets, descending score
    std::vector<bool> tp;
    int num_gt = 0;
};
MatchResult match_detections(const std::vector<ClassDet>& dets,
                             const std::vector<EvalGt>& gts, int class_id,
                             double iou_thresh);

// Average precision with the monotone precision envelope (all-points
// interpolation). Zero when the class has no boxes.
double average_precision(const MatchResult& m);

struct ClassAp {
    int class_id = 0;
    double ap = 0.0;
    int num_gt = 0;
};
struct EvalReport {
    std::vector<ClassAp> per_class;
    double mean_ap = 0.0;  // over classes with at least one box
};
EvalReport evaluate(const std::vector<ClassDet>& dets,
                    const std::vector<EvalGt>& gts, int num_classes,
                    double iou_thresh);

// mAP within equal-count bins of a per-box statistic (box area, or boxes per
// clip). Bin edges come from sorting the statistic over all ground truth.
struct BinReport {
    std::vector<double> lo, hi;  // inclusive stat range of each bin
    std::vector<double> mean_ap;
    std::vector<int> num_gt;
};
BinReport binned_by_area(const std::vector<ClassDet>& dets,
                         const std::vector<EvalGt>& gts, int num_classes,
                         double iou_thresh, int bins);
BinReport binned_by_count(const std::vector<ClassDet>& dets,
                          const std::vector<EvalGt>& gts, int num_classes,
                          double iou_thresh, int bins);

// CSV interchange. Detections: clip_id,class_id,score,x1,y1,x2,y2.
// Ground truth: clip_id,person_id,x1,y1,x2,y2[,label...].
void write_detections_csv(const std::string& path,
                          const std::vector<ClassDet>& dets);
std::vector<ClassDet> read_detections_csv(const std::string& path);
void write_gt_csv(const std::string& path, const std::vector<EvalGt>& gts);
std::vector<EvalGt> read_gt_csv(const std::string& path);

}  // namespace actdet
