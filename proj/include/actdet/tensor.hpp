#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace actdet {

// Dense row-major N-d array. `grad` is either empty or the same size as
// `data`; it is filled by Graph::backward for parameter tensors.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;
    std::vector<double> grad;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(numel(), 0.0);
    }
    Tensor(std::vector<int64_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {}

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t e : shape) n *= e;
        return n;
    }
    int64_t dim(size_t i) const { return shape[i]; }
    size_t ndim() const { return shape.size(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { grad.assign(data.size(), 0.0); }

    static Tensor scalar(double v) { return Tensor({}, {v}); }
    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int64_t> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
};

inline std::string shape_str(const std::vector<int64_t>& s) {
    std::string r = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + ")";
}

inline bool same_shape(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape;
}

}  // namespace actdet
