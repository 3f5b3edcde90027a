#include "actdet/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace actdet {

namespace {

// Core greedy matcher. Boxes flagged in `ignore` never count as positives;
// detections whose only overlap is an ignored box are dropped from scoring.
MatchResult match_core(const std::vector<ClassDet>& dets,
                       const std::vector<EvalGt>& gts,
                       const std::vector<bool>& ignore, int class_id,
                       double iou_thresh, std::vector<bool>* dropped) {
    MatchResult m;
    std::vector<int> gt_idx;
    for (size_t i = 0; i < gts.size(); ++i) {
        if (std::count(gts[i].labels.begin(), gts[i].labels.end(), class_id)) {
            gt_idx.push_back(static_cast<int>(i));
            if (!ignore[i]) ++m.num_gt;
        }
    }
    std::vector<int> order;
    for (size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].class_id == class_id) order.push_back(static_cast<int>(i));
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dets[a].score > dets[b].score; });

    std::vector<bool> used(gts.size(), false);
    if (dropped) dropped->assign(order.size(), false);
    for (size_t oi = 0; oi < order.size(); ++oi) {
        const ClassDet& d = dets[order[oi]];
        int best = -1;
        double best_iou = 0.0;
        bool ignored_hit = false;
        for (int gi : gt_idx) {
            if (gts[gi].clip_id != d.clip_id) continue;
            const double v = iou(d.box, gts[gi].box);
            if (v < iou_thresh) continue;
            if (ignore[gi]) {
                ignored_hit = true;
                continue;
            }
            if (!used[gi] && v > best_iou) {
                best_iou = v;
                best = gi;
            }
        }
        if (best >= 0) {
            used[best] = true;
            m.det_order.push_back(order[oi]);
            m.tp.push_back(true);
        } else if (ignored_hit) {
            if (dropped) (*dropped)[oi] = true;  // neither TP nor FP
        } else {
            m.det_order.push_back(order[oi]);
            m.tp.push_back(false);
        }
    }
    return m;
}

EvalReport evaluate_with_ignore(const std::vector<ClassDet>& dets,
                                const std::vector<EvalGt>& gts,
                                const std::vector<bool>& ignore, int num_classes,
                                double iou_thresh) {
    EvalReport r;
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
        MatchResult m = match_core(dets, gts, ignore, c, iou_thresh, nullptr);
        ClassAp ap{c, average_precision(m), m.num_gt};
        if (m.num_gt > 0) {
            sum += ap.ap;
            ++counted;
        }
        r.per_class.push_back(ap);
    }
    r.mean_ap = counted ? sum / counted : 0.0;
    return r;
}

BinReport binned_by_stat(const std::vector<ClassDet>& dets,
                         const std::vector<EvalGt>& gts,
                         const std::vector<double>& stat, int num_classes,
                         double iou_thresh, int bins) {
    if (bins < 1 || stat.size() != gts.size()) {
        throw std::invalid_argument("binned report: bad bins or stat size");
    }
    std::vector<int> order(gts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return stat[a] < stat[b]; });
    BinReport r;
    const size_t n = gts.size();
    for (int b = 0; b < bins; ++b) {
        const size_t lo = n * b / bins, hi = n * (b + 1) / bins;
        std::vector<bool> ignore(gts.size(), true);
        double slo = 0, shi = 0;
        for (size_t i = lo; i < hi; ++i) {
            ignore[order[i]] = false;
            if (i == lo) slo = stat[order[i]];
            shi = stat[order[i]];
        }
        EvalReport er = evaluate_with_ignore(dets, gts, ignore, num_classes, iou_thresh);
        int num_gt = 0;
        for (const auto& c : er.per_class) num_gt += c.num_gt;
        r.lo.push_back(slo);
        r.hi.push_back(shi);
        r.mean_ap.push_back(er.mean_ap);
        r.num_gt.push_back(num_gt);
    }
    return r;
}

}  // namespace

MatchResult match_detections(const std::vector<ClassDet>& dets,
                             const std::vector<EvalGt>& gts, int class_id,
                             double iou_thresh) {
    return match_core(dets, gts, std::vector<bool>(gts.size(), false), class_id,
                      iou_thresh, nullptr);
}

double average_precision(const MatchResult& m) {
    if (m.num_gt == 0) return 0.0;
    std::vector<double> prec, rec;
    int tp = 0, fp = 0;
    for (bool t : m.tp) {
        t ? ++tp : ++fp;
        prec.push_back(static_cast<double>(tp) / (tp + fp));
        rec.push_back(static_cast<double>(tp) / m.num_gt);
    }
    // monotone envelope from the right, then sum area under the step curve
    for (int i = static_cast<int>(prec.size()) - 2; i >= 0; --i) {
        prec[i] = std::max(prec[i], prec[i + 1]);
    }
    double ap = 0.0, prev_r = 0.0;
    for (size_t i = 0; i < prec.size(); ++i) {
        ap += (rec[i] - prev_r) * prec[i];
        prev_r = rec[i];
    }
    return ap;
}

EvalReport evaluate(const std::vector<ClassDet>& dets,
                    const std::vector<EvalGt>& gts, int num_classes,
                    double iou_thresh) {
    return evaluate_with_ignore(dets, gts, std::vector<bool>(gts.size(), false),
                                num_classes, iou_thresh);
}

BinReport binned_by_area(const std::vector<ClassDet>& dets,
                         const std::vector<EvalGt>& gts, int num_classes,
                         double iou_thresh, int bins) {
    std::vector<double> stat;
    for (const auto& g : gts) stat.push_back(g.box.area());
    return binned_by_stat(dets, gts, stat, num_classes, iou_thresh, bins);
}

BinReport binned_by_count(const std::vector<ClassDet>& dets,
                          const std::vector<EvalGt>& gts, int num_classes,
                          double iou_thresh, int bins) {
    std::map<int, int> per_clip;
    for (const auto& g : gts) ++per_clip[g.clip_id];
    std::vector<double> stat;
    for (const auto& g : gts) stat.push_back(per_clip[g.clip_id]);
    return binned_by_stat(dets, gts, stat, num_classes, iou_thresh, bins);
}

void write_detections_csv(const std::string& path,
                          const std::vector<ClassDet>& dets) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.precision(17);
    os << "clip_id,class_id,score,x1,y1,x2,y2\n";
    for (const auto& d : dets) {
        os << d.clip_id << "," << d.class_id << "," << d.score << "," << d.box.x1
           << "," << d.box.y1 << "," << d.box.x2 << "," << d.box.y2 << "\n";
    }
}

namespace {
std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
}
}  // namespace

std::vector<ClassDet> read_detections_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<ClassDet> out;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 7) throw std::runtime_error("bad detection row: " + line);
        out.push_back({std::stoi(f[0]), std::stoi(f[1]), std::stod(f[2]),
                       Box{std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                           std::stod(f[6])}});
    }
    return out;
}

void write_gt_csv(const std::string& path, const std::vector<EvalGt>& gts) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.precision(17);
    int pid = 0, prev_clip = -1;
    for (const auto& g : gts) {
        if (g.clip_id != prev_clip) {
            pid = 0;
            prev_clip = g.clip_id;
        }
        os << g.clip_id << "," << pid++ << "," << g.box.x1 << "," << g.box.y1
           << "," << g.box.x2 << "," << g.box.y2;
        for (int l : g.labels) os << "," << l;
        os << "\n";
    }
}

std::vector<EvalGt> read_gt_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::vector<EvalGt> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() < 6) throw std::runtime_error("bad annotation row: " + line);
        EvalGt g;
        g.clip_id = std::stoi(f[0]);
        g.box = Box{std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                    std::stod(f[5])};
        for (size_t i = 6; i < f.size(); ++i) g.labels.push_back(std::stoi(f[i]));
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace actdet
