#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "actdet/tensor.hpp"

namespace actdet {

using NodeId = int;

// Single-use forward tape. Ops append nodes in topological order; backward
// walks the tape in reverse, accumulating grads. Parameter leaves created
// with param() additionally push their grads into the bound Tensor.
class Graph {
  public:
    // Dropout behaves as identity unless `training` is set; masks are a pure
    // function of (seed, step, layer id, element index).
    bool training = false;
    uint64_t seed = 0;
    uint64_t step = 0;

    NodeId input(Tensor t);
    NodeId param(Tensor& t);      // leaf bound to an external parameter
    NodeId constant(Tensor t);    // leaf that never receives grad

    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId matmul(NodeId a, NodeId b);            // (m,k)x(k,n)
    NodeId linear(NodeId x, NodeId w, NodeId b);  // affine over last axis; also the 1x1 conv
    NodeId conv3d(NodeId x, NodeId w, NodeId b, std::array<int, 3> stride,
                  std::array<int, 3> pad);  // x:(T,H,W,Ci) w:(kt,kh,kw,Ci,Co)
    // Bilinear crop of x:(H,W,C) over the rectangle [y1,y2]x[x1,x2] in
    // feature-pixel coordinates, resampled to (oh,ow,C).
    NodeId crop_resize(NodeId x, double y1, double x1, double y2, double x2,
                       int oh, int ow);
    NodeId maxpool2d(NodeId x, int k, int s);  // x:(H,W,C)
    NodeId spatial_mean(NodeId x);             // (...,C) -> (C), mean over leading axes
    NodeId concat_last(const std::vector<NodeId>& xs);
    NodeId stack0(const std::vector<NodeId>& xs);  // new leading axis
    NodeId relu(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId softmax(NodeId x);  // over the flattened tensor; canonical-order sums
    NodeId layernorm(NodeId x, NodeId gain, NodeId bias);  // over last axis
    NodeId dropout(NodeId x, double rate, uint64_t layer_id);
    NodeId reshape(NodeId x, std::vector<int64_t> shape);
    NodeId slice0(NodeId x, int64_t index);  // drop leading axis
    NodeId transpose2(NodeId x);             // (m,n) -> (n,m)
    NodeId sum(NodeId x);                    // scalar
    // Weighted attention readout: weights:(N,) values:(N,D) -> (D,). Sums in
    // canonical (sorted) order so the result is invariant under joint
    // permutation of rows.
    NodeId attend(NodeId weights, NodeId values);
    // Losses; targets/weights are plain tensors (no grad path).
    NodeId sigmoid_ce(NodeId logits, Tensor targets, Tensor weights);
    NodeId smooth_l1(NodeId pred, Tensor targets, Tensor weights);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const std::vector<double>& grad_of(NodeId id) const { return nodes_[id].grad; }
    size_t size() const { return nodes_.size(); }

    // Reverse-mode accumulation from a scalar loss node. Parameter tensors
    // bound via param() get grads accumulated (+=) into Tensor::grad.
    void backward(NodeId loss);

  private:
    struct Node {
        Tensor value;
        std::vector<NodeId> inputs;
        std::function<void(Graph&, NodeId)> backfn;  // empty for leaves
        std::vector<double> grad;
        Tensor* bound = nullptr;
        // per-op scratch kept for backward
        std::vector<int32_t> iscratch;
        std::vector<double> dscratch;
        Tensor aux0, aux1;  // loss targets / weights
    };

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }
    std::vector<double>& grad_buf(NodeId id);
    void check_same_shape(const char* op, NodeId a, NodeId b) const;

    std::vector<Node> nodes_;
};

// The differentiable primitive catalog provided by this module.
const std::vector<std::string>& forward_ops_catalog();

// Per-parameter comparison of analytic grads against central finite
// differences of `build` (which must rebuild the same graph each call and
// return the scalar loss node).
struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};
struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool pass = true;
    double max_rel_err = 0.0;
};
GradCheckReport grad_check(const std::function<NodeId(Graph&)>& build,
                           const std::vector<std::pair<std::string, Tensor*>>& params,
                           double tolerance, double fd_step = 1e-5);

}  // namespace actdet
