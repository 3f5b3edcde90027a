#include "actdet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "actdet/rng.hpp"

namespace actdet {

namespace {

constexpr double kLayerNormEps = 1e-6;

// Sum in value-sorted order: the result depends only on the multiset of
// addends, so reductions over permuted cells are bit-identical.
double canonical_sum(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double d : v) s += d;
    return s;
}

}  // namespace

const std::vector<std::string>& forward_ops_catalog() {
    static const std::vector<std::string> ops = {
        "add",          "multiply",     "matmul",      "conv3d",
        "conv1x1",      "crop_resize",  "maxpool2d",   "spatial_mean",
        "concat",       "linear",       "relu",        "sigmoid",
        "softmax",      "layernorm",    "dropout",     "reshape",
        "slice",        "transpose",
    };
    return ops;
}

std::vector<double>& Graph::grad_buf(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.data.size()) n.grad.assign(n.value.data.size(), 0.0);
    return n.grad;
}

void Graph::check_same_shape(const char* op, NodeId a, NodeId b) const {
    if (nodes_[a].value.shape != nodes_[b].value.shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(nodes_[a].value.shape) + " vs " +
                                    shape_str(nodes_[b].value.shape));
    }
}

NodeId Graph::input(Tensor t) {
    Node n;
    n.value = std::move(t);
    return push(std::move(n));
}

NodeId Graph::constant(Tensor t) { return input(std::move(t)); }

NodeId Graph::param(Tensor& t) {
    Node n;
    n.value = t;
    n.bound = &t;
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    check_same_shape("add", a, b);
    Node n;
    n.value = nodes_[a].value;
    const auto& bd = nodes_[b].value.data;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += bd[i];
    n.inputs = {a, b};
    n.backfn = [](Graph& g, NodeId self) {
        const auto& gr = g.nodes_[self].grad;
        auto& ga = g.grad_buf(g.nodes_[self].inputs[0]);
        auto& gb = g.grad_buf(g.nodes_[self].inputs[1]);
        for (size_t i = 0; i < gr.size(); ++i) {
            ga[i] += gr[i];
            gb[i] += gr[i];
        }
    };
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    check_same_shape("multiply", a, b);
    Node n;
    n.value = nodes_[a].value;
    const auto& bd = nodes_[b].value.data;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= bd[i];
    n.inputs = {a, b};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const auto& ad = g.nodes_[s.inputs[0]].value.data;
        const auto& bd2 = g.nodes_[s.inputs[1]].value.data;
        auto& ga = g.grad_buf(s.inputs[0]);
        auto& gb = g.grad_buf(s.inputs[1]);
        for (size_t i = 0; i < s.grad.size(); ++i) {
            ga[i] += s.grad[i] * bd2[i];
            gb[i] += s.grad[i] * ad[i];
        }
    };
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    Node n;
    n.value = nodes_[a].value;
    for (double& v : n.value.data) v *= c;
    n.inputs = {a};
    n.dscratch = {c};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        auto& ga = g.grad_buf(s.inputs[0]);
        double c2 = s.dscratch[0];
        for (size_t i = 0; i < s.grad.size(); ++i) ga[i] += s.grad[i] * c2;
    };
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(0)) {
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(A.shape) +
                                    " vs " + shape_str(B.shape));
    }
    const int64_t m = A.dim(0), k = A.dim(1), p = B.dim(1);
    Node n;
    n.value = Tensor({m, p});
    for (int64_t i = 0; i < m; ++i) {
        double* out = n.value.data.data() + i * p;
        const double* arow = A.data.data() + i * k;
        for (int64_t t = 0; t < k; ++t) {
            const double av = arow[t];
            const double* brow = B.data.data() + t * p;
            for (int64_t j = 0; j < p; ++j) out[j] += av * brow[j];
        }
    }
    n.inputs = {a, b};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& A2 = g.nodes_[s.inputs[0]].value;
        const Tensor& B2 = g.nodes_[s.inputs[1]].value;
        const int64_t m2 = A2.dim(0), k2 = A2.dim(1), p2 = B2.dim(1);
        auto& ga = g.grad_buf(s.inputs[0]);
        auto& gb = g.grad_buf(s.inputs[1]);
        for (int64_t i = 0; i < m2; ++i) {
            const double* grow = s.grad.data() + i * p2;
            const double* arow = A2.data.data() + i * k2;
            for (int64_t t = 0; t < k2; ++t) {
                const double* brow = B2.data.data() + t * p2;
                double acc = 0.0;
                double* gbrow = gb.data() + t * p2;
                const double av = arow[t];
                for (int64_t j = 0; j < p2; ++j) {
                    acc += grow[j] * brow[j];
                    gbrow[j] += av * grow[j];
                }
                ga[i * k2 + t] += acc;
            }
        }
    };
    return push(std::move(n));
}

NodeId Graph::linear(NodeId x, NodeId w, NodeId b) {
    const Tensor& X = nodes_[x].value;
    const Tensor& W = nodes_[w].value;
    const Tensor& B = nodes_[b].value;
    if (X.ndim() < 1 || W.ndim() != 2 || X.shape.back() != W.dim(0) ||
        B.numel() != W.dim(1)) {
        throw std::invalid_argument("linear: shape mismatch " + shape_str(X.shape) +
                                    " vs " + shape_str(W.shape));
    }
    const int64_t in = W.dim(0), out = W.dim(1);
    const int64_t rows = X.numel() / in;
    std::vector<int64_t> oshape(X.shape.begin(), X.shape.end() - 1);
    oshape.push_back(out);
    Node n;
    n.value = Tensor(std::move(oshape));
    for (int64_t r = 0; r < rows; ++r) {
        double* orow = n.value.data.data() + r * out;
        const double* xrow = X.data.data() + r * in;
        for (int64_t j = 0; j < out; ++j) orow[j] = B.data[j];
        for (int64_t i = 0; i < in; ++i) {
            const double xv = xrow[i];
            const double* wrow = W.data.data() + i * out;
            for (int64_t j = 0; j < out; ++j) orow[j] += xv * wrow[j];
        }
    }
    n.inputs = {x, w, b};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& X2 = g.nodes_[s.inputs[0]].value;
        const Tensor& W2 = g.nodes_[s.inputs[1]].value;
        const int64_t in2 = W2.dim(0), out2 = W2.dim(1);
        const int64_t rows2 = X2.numel() / in2;
        auto& gx = g.grad_buf(s.inputs[0]);
        auto& gw = g.grad_buf(s.inputs[1]);
        auto& gb = g.grad_buf(s.inputs[2]);
        for (int64_t r = 0; r < rows2; ++r) {
            const double* grow = s.grad.data() + r * out2;
            const double* xrow = X2.data.data() + r * in2;
            for (int64_t j = 0; j < out2; ++j) gb[j] += grow[j];
            for (int64_t i = 0; i < in2; ++i) {
                const double* wrow = W2.data.data() + i * out2;
                double* gwrow = gw.data() + i * out2;
                const double xv = xrow[i];
                double acc = 0.0;
                for (int64_t j = 0; j < out2; ++j) {
                    acc += grow[j] * wrow[j];
                    gwrow[j] += xv * grow[j];
                }
                gx[r * in2 + i] += acc;
            }
        }
    };
    return push(std::move(n));
}

NodeId Graph::conv3d(NodeId x, NodeId w, NodeId b, std::array<int, 3> stride,
                     std::array<int, 3> pad) {
    const Tensor& X = nodes_[x].value;
    const Tensor& W = nodes_[w].value;
    if (X.ndim() != 4 || W.ndim() != 5 || X.dim(3) != W.dim(3)) {
        throw std::invalid_argument("conv3d: shape mismatch " + shape_str(X.shape) +
                                    " vs " + shape_str(W.shape));
    }
    const int64_t T = X.dim(0), H = X.dim(1), Wd = X.dim(2), Ci = X.dim(3);
    const int64_t kt = W.dim(0), kh = W.dim(1), kw = W.dim(2), Co = W.dim(4);
    const int64_t ot = (T + 2 * pad[0] - kt) / stride[0] + 1;
    const int64_t oh = (H + 2 * pad[1] - kh) / stride[1] + 1;
    const int64_t ow = (Wd + 2 * pad[2] - kw) / stride[2] + 1;
    if (ot < 1 || oh < 1 || ow < 1) {
        throw std::invalid_argument("conv3d: input too small " + shape_str(X.shape));
    }
    Node n;
    n.value = Tensor({ot, oh, ow, Co});
    const double* bias = nodes_[b].value.data.data();
    for (int64_t to = 0; to < ot; ++to) {
        for (int64_t ho = 0; ho < oh; ++ho) {
            for (int64_t wo = 0; wo < ow; ++wo) {
                double* out = n.value.data.data() + ((to * oh + ho) * ow + wo) * Co;
                for (int64_t c = 0; c < Co; ++c) out[c] = bias[c];
                for (int64_t dt = 0; dt < kt; ++dt) {
                    const int64_t ti = to * stride[0] + dt - pad[0];
                    if (ti < 0 || ti >= T) continue;
                    for (int64_t dh = 0; dh < kh; ++dh) {
                        const int64_t hi = ho * stride[1] + dh - pad[1];
                        if (hi < 0 || hi >= H) continue;
                        for (int64_t dw = 0; dw < kw; ++dw) {
                            const int64_t wi = wo * stride[2] + dw - pad[2];
                            if (wi < 0 || wi >= Wd) continue;
                            const double* xin =
                                X.data.data() + ((ti * H + hi) * Wd + wi) * Ci;
                            const double* wk =
                                W.data.data() + ((dt * kh + dh) * kw + dw) * Ci * Co;
                            for (int64_t ci = 0; ci < Ci; ++ci) {
                                const double xv = xin[ci];
                                const double* wrow = wk + ci * Co;
                                for (int64_t c = 0; c < Co; ++c) out[c] += xv * wrow[c];
                            }
                        }
                    }
                }
            }
        }
    }
    n.inputs = {x, w, b};
    n.iscratch = {stride[0], stride[1], stride[2], pad[0], pad[1], pad[2]};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& X2 = g.nodes_[s.inputs[0]].value;
        const Tensor& W2 = g.nodes_[s.inputs[1]].value;
        const int64_t T = X2.dim(0), H = X2.dim(1), Wd = X2.dim(2), Ci = X2.dim(3);
        const int64_t kt = W2.dim(0), kh = W2.dim(1), kw = W2.dim(2), Co = W2.dim(4);
        const int st = s.iscratch[0], sh = s.iscratch[1], sw = s.iscratch[2];
        const int pt = s.iscratch[3], ph = s.iscratch[4], pw = s.iscratch[5];
        const int64_t ot = s.value.dim(0), oh = s.value.dim(1), ow = s.value.dim(2);
        auto& gx = g.grad_buf(s.inputs[0]);
        auto& gw = g.grad_buf(s.inputs[1]);
        auto& gb = g.grad_buf(s.inputs[2]);
        for (int64_t to = 0; to < ot; ++to) {
            for (int64_t ho = 0; ho < oh; ++ho) {
                for (int64_t wo = 0; wo < ow; ++wo) {
                    const double* go = s.grad.data() + ((to * oh + ho) * ow + wo) * Co;
                    for (int64_t c = 0; c < Co; ++c) gb[c] += go[c];
                    for (int64_t dt = 0; dt < kt; ++dt) {
                        const int64_t ti = to * st + dt - pt;
                        if (ti < 0 || ti >= T) continue;
                        for (int64_t dh = 0; dh < kh; ++dh) {
                            const int64_t hi = ho * sh + dh - ph;
                            if (hi < 0 || hi >= H) continue;
                            for (int64_t dw = 0; dw < kw; ++dw) {
                                const int64_t wi = wo * sw + dw - pw;
                                if (wi < 0 || wi >= Wd) continue;
                                const int64_t xoff = ((ti * H + hi) * Wd + wi) * Ci;
                                const int64_t woff = ((dt * kh + dh) * kw + dw) * Ci * Co;
                                const double* xin = X2.data.data() + xoff;
                                for (int64_t ci = 0; ci < Ci; ++ci) {
                                    const double* wrow = W2.data.data() + woff + ci * Co;
                                    double* gwrow = gw.data() + woff + ci * Co;
                                    const double xv = xin[ci];
                                    double acc = 0.0;
                                    for (int64_t c = 0; c < Co; ++c) {
                                        acc += go[c] * wrow[c];
                                        gwrow[c] += xv * go[c];
                                    }
                                    gx[xoff + ci] += acc;
                                }
                            }
                        }
                    }
                }
            }
        }
    };
    return push(std::move(n));
}

NodeId Graph::crop_resize(NodeId x, double y1, double x1, double y2, double x2,
                          int oh, int ow) {
    const Tensor& X = nodes_[x].value;
    if (X.ndim() != 3) {
        throw std::invalid_argument("crop_resize: expected (H,W,C), got " +
                                    shape_str(X.shape));
    }
    const int64_t H = X.dim(0), W = X.dim(1), C = X.dim(2);
    Node n;
    n.value = Tensor({oh, ow, C});
    n.iscratch.resize(static_cast<size_t>(oh) * ow * 2);
    n.dscratch.resize(static_cast<size_t>(oh) * ow * 2);
    for (int i = 0; i < oh; ++i) {
        double y = (oh > 1) ? y1 + (y2 - y1) * i / (oh - 1) : 0.5 * (y1 + y2);
        y = std::min(std::max(y, 0.0), static_cast<double>(H - 1));
        const int64_t y0 = std::min(static_cast<int64_t>(y), H - 1);
        const int64_t y0b = std::min(y0 + 1, H - 1);
        const double fy = y - y0;
        for (int j = 0; j < ow; ++j) {
            double xx = (ow > 1) ? x1 + (x2 - x1) * j / (ow - 1) : 0.5 * (x1 + x2);
            xx = std::min(std::max(xx, 0.0), static_cast<double>(W - 1));
            const int64_t x0 = std::min(static_cast<int64_t>(xx), W - 1);
            const int64_t x0b = std::min(x0 + 1, W - 1);
            const double fx = xx - x0;
            n.iscratch[(i * ow + j) * 2 + 0] = static_cast<int32_t>(y0);
            n.iscratch[(i * ow + j) * 2 + 1] = static_cast<int32_t>(x0);
            n.dscratch[(i * ow + j) * 2 + 0] = fy;
            n.dscratch[(i * ow + j) * 2 + 1] = fx;
            double* out = n.value.data.data() + (static_cast<int64_t>(i) * ow + j) * C;
            const double* p00 = X.data.data() + (y0 * W + x0) * C;
            const double* p01 = X.data.data() + (y0 * W + x0b) * C;
            const double* p10 = X.data.data() + (y0b * W + x0) * C;
            const double* p11 = X.data.data() + (y0b * W + x0b) * C;
            const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
            const double w10 = fy * (1 - fx), w11 = fy * fx;
            for (int64_t c = 0; c < C; ++c) {
                out[c] = w00 * p00[c] + w01 * p01[c] + w10 * p10[c] + w11 * p11[c];
            }
        }
    }
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& X2 = g.nodes_[s.inputs[0]].value;
        const int64_t H = X2.dim(0), W = X2.dim(1), C = X2.dim(2);
        const int64_t oh = s.value.dim(0), ow = s.value.dim(1);
        auto& gx = g.grad_buf(s.inputs[0]);
        for (int64_t i = 0; i < oh; ++i) {
            for (int64_t j = 0; j < ow; ++j) {
                const int64_t y0 = s.iscratch[(i * ow + j) * 2 + 0];
                const int64_t x0 = s.iscratch[(i * ow + j) * 2 + 1];
                const int64_t y0b = std::min(y0 + 1, H - 1);
                const int64_t x0b = std::min(x0 + 1, W - 1);
                const double fy = s.dscratch[(i * ow + j) * 2 + 0];
                const double fx = s.dscratch[(i * ow + j) * 2 + 1];
                const double* go = s.grad.data() + (i * ow + j) * C;
                double* g00 = gx.data() + (y0 * W + x0) * C;
                double* g01 = gx.data() + (y0 * W + x0b) * C;
                double* g10 = gx.data() + (y0b * W + x0) * C;
                double* g11 = gx.data() + (y0b * W + x0b) * C;
                const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
                const double w10 = fy * (1 - fx), w11 = fy * fx;
                for (int64_t c = 0; c < C; ++c) {
                    g00[c] += w00 * go[c];
                    g01[c] += w01 * go[c];
                    g10[c] += w10 * go[c];
                    g11[c] += w11 * go[c];
                }
            }
        }
    };
    return push(std::move(n));
}

NodeId Graph::maxpool2d(NodeId x, int k, int s) {
    const Tensor& X = nodes_[x].value;
    if (X.ndim() != 3) {
        throw std::invalid_argument("maxpool2d: expected (H,W,C), got " +
                                    shape_str(X.shape));
    }
    const int64_t H = X.dim(0), W = X.dim(1), C = X.dim(2);
    const int64_t oh = (H - k) / s + 1, ow = (W - k) / s + 1;
    Node n;
    n.value = Tensor({oh, ow, C});
    n.iscratch.resize(static_cast<size_t>(oh) * ow * C);
    for (int64_t i = 0; i < oh; ++i) {
        for (int64_t j = 0; j < ow; ++j) {
            for (int64_t c = 0; c < C; ++c) {
                double best = -1e300;
                int32_t arg = 0;
                for (int di = 0; di < k; ++di) {
                    for (int dj = 0; dj < k; ++dj) {
                        const int64_t idx = ((i * s + di) * W + (j * s + dj)) * C + c;
                        if (X.data[idx] > best) {
                            best = X.data[idx];
                            arg = static_cast<int32_t>(idx);
                        }
                    }
                }
                n.value.data[(i * ow + j) * C + c] = best;
                n.iscratch[(i * ow + j) * C + c] = arg;
            }
        }
    }
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s2 = g.nodes_[self];
        auto& gx = g.grad_buf(s2.inputs[0]);
        for (size_t i = 0; i < s2.grad.size(); ++i) gx[s2.iscratch[i]] += s2.grad[i];
    };
    return push(std::move(n));
}

NodeId Graph::spatial_mean(NodeId x) {
    const Tensor& X = nodes_[x].value;
    if (X.ndim() < 2) {
        throw std::invalid_argument("spatial_mean: expected rank >= 2, got " +
                                    shape_str(X.shape));
    }
    const int64_t C = X.shape.back();
    const int64_t rows = X.numel() / C;
    Node n;
    n.value = Tensor({C});
    for (int64_t r = 0; r < rows; ++r) {
        const double* p = X.data.data() + r * C;
        for (int64_t c = 0; c < C; ++c) n.value.data[c] += p[c];
    }
    for (int64_t c = 0; c < C; ++c) n.value.data[c] /= static_cast<double>(rows);
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& X2 = g.nodes_[s.inputs[0]].value;
        const int64_t C2 = X2.shape.back();
        const int64_t rows2 = X2.numel() / C2;
        auto& gx = g.grad_buf(s.inputs[0]);
        const double inv = 1.0 / static_cast<double>(rows2);
        for (int64_t r = 0; r < rows2; ++r) {
            for (int64_t c = 0; c < C2; ++c) gx[r * C2 + c] += s.grad[c] * inv;
        }
    };
    return push(std::move(n));
}

NodeId Graph::concat_last(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    const Tensor& first = nodes_[xs[0]].value;
    std::vector<int64_t> lead(first.shape.begin(), first.shape.end() - 1);
    int64_t total = 0;
    for (NodeId id : xs) {
        const Tensor& t = nodes_[id].value;
        std::vector<int64_t> l(t.shape.begin(), t.shape.end() - 1);
        if (l != lead) {
            throw std::invalid_argument("concat: shape mismatch " +
                                        shape_str(first.shape) + " vs " +
                                        shape_str(t.shape));
        }
        total += t.shape.back();
    }
    int64_t rows = 1;
    for (int64_t e : lead) rows *= e;
    std::vector<int64_t> oshape = lead;
    oshape.push_back(total);
    Node n;
    n.value = Tensor(std::move(oshape));
    int64_t off = 0;
    for (NodeId id : xs) {
        const Tensor& t = nodes_[id].value;
        const int64_t c = t.shape.back();
        for (int64_t r = 0; r < rows; ++r) {
            std::copy_n(t.data.data() + r * c, c,
                        n.value.data.data() + r * total + off);
        }
        off += c;
    }
    n.inputs = xs;
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const int64_t total2 = s.value.shape.back();
        const int64_t rows2 = s.value.numel() / total2;
        int64_t off2 = 0;
        for (NodeId id : s.inputs) {
            const int64_t c = g.nodes_[id].value.shape.back();
            auto& gi = g.grad_buf(id);
            for (int64_t r = 0; r < rows2; ++r) {
                const double* src = s.grad.data() + r * total2 + off2;
                double* dst = gi.data() + r * c;
                for (int64_t k = 0; k < c; ++k) dst[k] += src[k];
            }
            off2 += c;
        }
    };
    return push(std::move(n));
}

NodeId Graph::stack0(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw std::invalid_argument("stack: empty input list");
    const Tensor& first = nodes_[xs[0]].value;
    for (NodeId id : xs) {
        if (nodes_[id].value.shape != first.shape) {
            throw std::invalid_argument("stack: shape mismatch " +
                                        shape_str(first.shape) + " vs " +
                                        shape_str(nodes_[id].value.shape));
        }
    }
    std::vector<int64_t> oshape = {static_cast<int64_t>(xs.size())};
    oshape.insert(oshape.end(), first.shape.begin(), first.shape.end());
    Node n;
    n.value = Tensor(std::move(oshape));
    const int64_t block = first.numel();
    for (size_t i = 0; i < xs.size(); ++i) {
        std::copy_n(nodes_[xs[i]].value.data.data(), block,
                    n.value.data.data() + static_cast<int64_t>(i) * block);
    }
    n.inputs = xs;
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const int64_t block2 = g.nodes_[s.inputs[0]].value.numel();
        for (size_t i = 0; i < s.inputs.size(); ++i) {
            auto& gi = g.grad_buf(s.inputs[i]);
            const double* src = s.grad.data() + static_cast<int64_t>(i) * block2;
            for (int64_t k = 0; k < block2; ++k) gi[k] += src[k];
        }
    };
    return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
    Node n;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v = v > 0 ? v : 0.0;
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const auto& xd = g.nodes_[s.inputs[0]].value.data;
        auto& gx = g.grad_buf(s.inputs[0]);
        for (size_t i = 0; i < s.grad.size(); ++i) {
            if (xd[i] > 0) gx[i] += s.grad[i];
        }
    };
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
    Node n;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        auto& gx = g.grad_buf(s.inputs[0]);
        for (size_t i = 0; i < s.grad.size(); ++i) {
            const double y = s.value.data[i];
            gx[i] += s.grad[i] * y * (1.0 - y);
        }
    };
    return push(std::move(n));
}

NodeId Graph::softmax(NodeId x) {
    const Tensor& X = nodes_[x].value;
    Node n;
    n.value = X;
    double mx = -1e300;
    for (double v : X.data) mx = std::max(mx, v);
    std::vector<double> exps(X.data.size());
    for (size_t i = 0; i < X.data.size(); ++i) exps[i] = std::exp(X.data[i] - mx);
    std::vector<double> addends = exps;
    const double z = canonical_sum(addends);
    for (size_t i = 0; i < X.data.size(); ++i) n.value.data[i] = exps[i] / z;
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        auto& gx = g.grad_buf(s.inputs[0]);
        double dot = 0.0;
        for (size_t i = 0; i < s.grad.size(); ++i) dot += s.grad[i] * s.value.data[i];
        for (size_t i = 0; i < s.grad.size(); ++i) {
            gx[i] += s.value.data[i] * (s.grad[i] - dot);
        }
    };
    return push(std::move(n));
}

NodeId Graph::layernorm(NodeId x, NodeId gain, NodeId bias) {
    const Tensor& X = nodes_[x].value;
    const int64_t V = X.shape.back();
    if (nodes_[gain].value.numel() != V || nodes_[bias].value.numel() != V) {
        throw std::invalid_argument("layernorm: shape mismatch " + shape_str(X.shape) +
                                    " vs " + shape_str(nodes_[gain].value.shape));
    }
    const int64_t rows = X.numel() / V;
    Node n;
    n.value = Tensor(X.shape);
    n.dscratch.resize(X.data.size() + rows);  // normalized values + per-row rstd
    const double* gvals = nodes_[gain].value.data.data();
    const double* bvals = nodes_[bias].value.data.data();
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = X.data.data() + r * V;
        double mean = 0.0;
        for (int64_t i = 0; i < V; ++i) mean += xr[i];
        mean /= static_cast<double>(V);
        double var = 0.0;
        for (int64_t i = 0; i < V; ++i) var += (xr[i] - mean) * (xr[i] - mean);
        var /= static_cast<double>(V);
        // epsilon acts as a variance floor; for non-degenerate vectors the
        // normalized output has variance exactly 1
        const double rstd = 1.0 / std::sqrt(std::max(var, kLayerNormEps));
        n.dscratch[X.data.size() + r] = (var >= kLayerNormEps) ? rstd : -rstd;
        for (int64_t i = 0; i < V; ++i) {
            const double y = (xr[i] - mean) * rstd;
            n.dscratch[r * V + i] = y;
            n.value.data[r * V + i] = gvals[i] * y + bvals[i];
        }
    }
    n.inputs = {x, gain, bias};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& X2 = g.nodes_[s.inputs[0]].value;
        const int64_t V2 = X2.shape.back();
        const int64_t rows2 = X2.numel() / V2;
        const double* gvals2 = g.nodes_[s.inputs[1]].value.data.data();
        auto& gx = g.grad_buf(s.inputs[0]);
        auto& gg = g.grad_buf(s.inputs[1]);
        auto& gb = g.grad_buf(s.inputs[2]);
        for (int64_t r = 0; r < rows2; ++r) {
            const double* go = s.grad.data() + r * V2;
            const double* y = s.dscratch.data() + r * V2;
            const double rstd_signed = s.dscratch[X2.data.size() + r];
            const double rstd = std::abs(rstd_signed);
            const bool floored = rstd_signed < 0;
            double gy_mean = 0.0, gyy_mean = 0.0;
            for (int64_t i = 0; i < V2; ++i) {
                gg[i] += go[i] * y[i];
                gb[i] += go[i];
                const double gy = go[i] * gvals2[i];
                gy_mean += gy;
                gyy_mean += gy * y[i];
            }
            gy_mean /= static_cast<double>(V2);
            gyy_mean /= static_cast<double>(V2);
            for (int64_t i = 0; i < V2; ++i) {
                const double gy = go[i] * gvals2[i];
                double dx = gy - gy_mean;
                if (!floored) dx -= y[i] * gyy_mean;
                gx[r * V2 + i] += rstd * dx;
            }
        }
    };
    return push(std::move(n));
}

NodeId Graph::dropout(NodeId x, double rate, uint64_t layer_id) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("dropout: rate out of range");
    }
    Node n;
    n.value = nodes_[x].value;
    n.inputs = {x};
    if (!training || rate == 0.0) {
        // eval mode: exact identity
        n.backfn = [](Graph& g, NodeId self) {
            const Node& s = g.nodes_[self];
            auto& gx = g.grad_buf(s.inputs[0]);
            for (size_t i = 0; i < s.grad.size(); ++i) gx[i] += s.grad[i];
        };
        return push(std::move(n));
    }
    const uint64_t stream = hash_combine(step, layer_id);
    const double keep_scale = 1.0 / (1.0 - rate);
    n.dscratch.resize(n.value.data.size());
    for (size_t i = 0; i < n.value.data.size(); ++i) {
        const double m = counter_uniform(seed, stream, i) >= rate ? keep_scale : 0.0;
        n.dscratch[i] = m;
        n.value.data[i] *= m;
    }
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        auto& gx = g.grad_buf(s.inputs[0]);
        for (size_t i = 0; i < s.grad.size(); ++i) gx[i] += s.grad[i] * s.dscratch[i];
    };
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, std::vector<int64_t> shape) {
    const Tensor& X = nodes_[x].value;
    int64_t n2 = 1;
    for (int64_t e : shape) n2 *= e;
    if (n2 != X.numel()) {
        throw std::invalid_argument("reshape: element count mismatch " +
                                    shape_str(X.shape) + " vs " + shape_str(shape));
    }
    Node n;
    n.value = Tensor(std::move(shape), X.data);
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        auto& gx = g.grad_buf(s.inputs[0]);
        for (size_t i = 0; i < s.grad.size(); ++i) gx[i] += s.grad[i];
    };
    return push(std::move(n));
}

NodeId Graph::slice0(NodeId x, int64_t index) {
    const Tensor& X = nodes_[x].value;
    if (X.ndim() < 1 || index < 0 || index >= X.dim(0)) {
        throw std::invalid_argument("slice: index " + std::to_string(index) +
                                    " out of range for " + shape_str(X.shape));
    }
    std::vector<int64_t> oshape(X.shape.begin() + 1, X.shape.end());
    int64_t block = 1;
    for (int64_t e : oshape) block *= e;
    Node n;
    n.value = Tensor(oshape);
    std::copy_n(X.data.data() + index * block, block, n.value.data.data());
    n.inputs = {x};
    n.iscratch = {static_cast<int32_t>(index)};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        auto& gx = g.grad_buf(s.inputs[0]);
        const int64_t block2 = s.value.numel();
        const int64_t off = s.iscratch[0] * block2;
        for (int64_t i = 0; i < block2; ++i) gx[off + i] += s.grad[i];
    };
    return push(std::move(n));
}

NodeId Graph::transpose2(NodeId x) {
    const Tensor& X = nodes_[x].value;
    if (X.ndim() != 2) {
        throw std::invalid_argument("transpose: expected rank 2, got " +
                                    shape_str(X.shape));
    }
    const int64_t m = X.dim(0), k = X.dim(1);
    Node n;
    n.value = Tensor({k, m});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < k; ++j) n.value.data[j * m + i] = X.data[i * k + j];
    }
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const int64_t k2 = s.value.dim(0), m2 = s.value.dim(1);
        auto& gx = g.grad_buf(s.inputs[0]);
        for (int64_t j = 0; j < k2; ++j) {
            for (int64_t i = 0; i < m2; ++i) gx[i * k2 + j] += s.grad[j * m2 + i];
        }
    };
    return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
    const Tensor& X = nodes_[x].value;
    Node n;
    double s = 0.0;
    for (double v : X.data) s += v;
    n.value = Tensor::scalar(s);
    n.inputs = {x};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s2 = g.nodes_[self];
        auto& gx = g.grad_buf(s2.inputs[0]);
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += s2.grad[0];
    };
    return push(std::move(n));
}

NodeId Graph::attend(NodeId weights, NodeId values) {
    const Tensor& W = nodes_[weights].value;
    const Tensor& V = nodes_[values].value;
    if (W.ndim() != 1 || V.ndim() != 2 || W.dim(0) != V.dim(0)) {
        throw std::invalid_argument("attend: shape mismatch " + shape_str(W.shape) +
                                    " vs " + shape_str(V.shape));
    }
    const int64_t N = V.dim(0), D = V.dim(1);
    Node n;
    n.value = Tensor({D});
    std::vector<double> addends(N);
    for (int64_t d = 0; d < D; ++d) {
        for (int64_t c = 0; c < N; ++c) addends[c] = W.data[c] * V.data[c * D + d];
        n.value.data[d] = canonical_sum(addends);
    }
    n.inputs = {weights, values};
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& W2 = g.nodes_[s.inputs[0]].value;
        const Tensor& V2 = g.nodes_[s.inputs[1]].value;
        const int64_t N2 = V2.dim(0), D2 = V2.dim(1);
        auto& gw = g.grad_buf(s.inputs[0]);
        auto& gv = g.grad_buf(s.inputs[1]);
        for (int64_t c = 0; c < N2; ++c) {
            const double* vrow = V2.data.data() + c * D2;
            double* gvrow = gv.data() + c * D2;
            double acc = 0.0;
            const double wv = W2.data[c];
            for (int64_t d = 0; d < D2; ++d) {
                acc += s.grad[d] * vrow[d];
                gvrow[d] += wv * s.grad[d];
            }
            gw[c] += acc;
        }
    };
    return push(std::move(n));
}

NodeId Graph::sigmoid_ce(NodeId logits, Tensor targets, Tensor weights) {
    const Tensor& X = nodes_[logits].value;
    if (targets.shape != X.shape || weights.shape != X.shape) {
        throw std::invalid_argument("sigmoid_ce: shape mismatch " +
                                    shape_str(X.shape) + " vs " +
                                    shape_str(targets.shape));
    }
    for (double t : targets.data) {
        if (t != 0.0 && t != 1.0) {
            throw std::invalid_argument("sigmoid_ce: target outside {0,1}");
        }
    }
    Node n;
    double loss = 0.0;
    for (size_t i = 0; i < X.data.size(); ++i) {
        const double x = X.data[i];
        loss += weights.data[i] *
                (std::max(x, 0.0) - x * targets.data[i] + std::log1p(std::exp(-std::abs(x))));
    }
    n.value = Tensor::scalar(loss);
    n.inputs = {logits};
    n.aux0 = std::move(targets);
    n.aux1 = std::move(weights);
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& X2 = g.nodes_[s.inputs[0]].value;
        auto& gx = g.grad_buf(s.inputs[0]);
        for (size_t i = 0; i < X2.data.size(); ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-X2.data[i]));
            gx[i] += s.grad[0] * s.aux1.data[i] * (sig - s.aux0.data[i]);
        }
    };
    return push(std::move(n));
}

NodeId Graph::smooth_l1(NodeId pred, Tensor targets, Tensor weights) {
    const Tensor& X = nodes_[pred].value;
    if (targets.shape != X.shape || weights.shape != X.shape) {
        throw std::invalid_argument("smooth_l1: shape mismatch " + shape_str(X.shape) +
                                    " vs " + shape_str(targets.shape));
    }
    Node n;
    double loss = 0.0;
    for (size_t i = 0; i < X.data.size(); ++i) {
        const double d = X.data[i] - targets.data[i];
        const double a = std::abs(d);
        loss += weights.data[i] * (a < 1.0 ? 0.5 * d * d : a - 0.5);
    }
    n.value = Tensor::scalar(loss);
    n.inputs = {pred};
    n.aux0 = std::move(targets);
    n.aux1 = std::move(weights);
    n.backfn = [](Graph& g, NodeId self) {
        const Node& s = g.nodes_[self];
        const Tensor& X2 = g.nodes_[s.inputs[0]].value;
        auto& gx = g.grad_buf(s.inputs[0]);
        for (size_t i = 0; i < X2.data.size(); ++i) {
            const double d = X2.data[i] - s.aux0.data[i];
            gx[i] += s.grad[0] * s.aux1.data[i] * std::min(std::max(d, -1.0), 1.0);
        }
    };
    return push(std::move(n));
}

void Graph::backward(NodeId loss) {
    if (nodes_[loss].value.numel() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    shape_str(nodes_[loss].value.shape));
    }
    grad_buf(loss)[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) continue;
        if (n.backfn) n.backfn(*this, id);
        if (n.bound) {
            n.bound->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
        }
    }
}

GradCheckReport grad_check(const std::function<NodeId(Graph&)>& build,
                           const std::vector<std::pair<std::string, Tensor*>>& params,
                           double tolerance, double fd_step) {
    // determinism probe: two builds must agree bitwise (rules out live
    // dropout without a fixed mask)
    double probe;
    {
        Graph g;
        probe = g.value(build(g)).data[0];
    }
    {
        Graph g;
        if (g.value(build(g)).data[0] != probe) {
            throw std::runtime_error("grad_check: non-deterministic graph");
        }
    }
    for (auto& [name, t] : params) t->zero_grad();
    {
        Graph g;
        NodeId loss = build(g);
        if (g.value(loss).numel() != 1) {
            throw std::invalid_argument("grad_check: loss must be scalar");
        }
        g.backward(loss);
    }
    GradCheckReport report;
    for (auto& [name, t] : params) {
        GradCheckEntry e;
        e.name = name;
        for (size_t i = 0; i < t->data.size(); ++i) {
            const double saved = t->data[i];
            t->data[i] = saved + fd_step;
            Graph gp;
            const double lp = gp.value(build(gp)).data[0];
            t->data[i] = saved - fd_step;
            Graph gm;
            const double lm = gm.value(build(gm)).data[0];
            t->data[i] = saved;
            const double numeric = (lp - lm) / (2.0 * fd_step);
            const double analytic = t->grad.empty() ? 0.0 : t->grad[i];
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            e.max_rel_err = std::max(e.max_rel_err, std::abs(analytic - numeric) / denom);
        }
        e.pass = e.max_rel_err < tolerance;
        report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
        report.pass = report.pass && e.pass;
        report.entries.push_back(std::move(e));
    }
    return report;
}

}  // namespace actdet
