#include "actdet/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "actdet/rng.hpp"

namespace actdet {

namespace {

constexpr uint32_t kMagic = 0x4b435441;  // "ATCK"
constexpr uint32_t kVersion = 1;

void init_fan_in(Tensor& t, int64_t fan_in, SeqRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

}  // namespace

Tensor& ParamStore::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grads() {
    for (auto& [name, t] : tensors) t.zero_grad();
}

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
    ParamStore ps;
    SeqRng rng(hash_combine(seed, 0x70617261));
    auto conv = [&](const std::string& name, int64_t kt, int64_t kh, int64_t kw,
                    int64_t ci, int64_t co) {
        Tensor w({kt, kh, kw, ci, co});
        init_fan_in(w, kt * kh * kw * ci, rng);
        ps.tensors[name + ".w"] = std::move(w);
        ps.tensors[name + ".b"] = Tensor({co});
    };
    auto lin = [&](const std::string& name, int64_t in, int64_t out) {
        Tensor w({in, out});
        init_fan_in(w, in, rng);
        ps.tensors[name + ".w"] = std::move(w);
        ps.tensors[name + ".b"] = Tensor({out});
    };
    auto ln = [&](const std::string& name, int64_t dim) {
        ps.tensors[name + ".g"] = Tensor::full({dim}, 1.0);
        ps.tensors[name + ".b"] = Tensor({dim});
    };

    conv("trunk.conv1", 3, 3, 3, 3, cfg.trunk_c1);
    conv("trunk.conv2", 3, 3, 3, cfg.trunk_c1, cfg.trunk_c2);
    conv("trunk.conv3", 3, 3, 3, cfg.trunk_c2, cfg.trunk_c3);
    conv("trunk.conv4", 3, 3, 3, cfg.trunk_c3, cfg.trunk_c4);

    lin("emb.spatial.fc1", 2, cfg.emb_hidden);
    lin("emb.spatial.fc2", cfg.emb_hidden, cfg.emb_out);
    lin("emb.temporal.fc1", 1, cfg.emb_hidden);
    lin("emb.temporal.fc2", cfg.emb_hidden, cfg.emb_out);

    const int a = cfg.num_anchors_per_cell();
    conv("rpn.conv", 1, 3, 3, cfg.trunk_channels(), cfg.rpn_channels);
    lin("rpn.obj", cfg.rpn_channels, a);
    lin("rpn.delta", cfg.rpn_channels, 4 * a);

    const int f = cfg.feat_channels();
    const int d = cfg.tx_dim;
    const int roi = ModelConfig::roi_size;
    if (cfg.head == HeadMode::Tx || cfg.head == HeadMode::TxI3d) {
        if (cfg.qpr == QprMode::HighRes) {
            lin("tx.qpr.reduce", f, cfg.qpr_reduce_channels);
            lin("tx.qpr.proj", roi * roi * cfg.qpr_reduce_channels, d);
        } else {
            lin("tx.qpr.proj", f, d);
        }
        for (int l = 0; l < cfg.tx_layers; ++l) {
            const std::string lp = "tx.layer" + std::to_string(l);
            for (int h = 0; h < cfg.tx_heads; ++h) {
                const std::string hp = lp + ".head" + std::to_string(h);
                lin(hp + ".key", f, d);
                lin(hp + ".value", f, d);
                lin(hp + ".ffn1", d, cfg.tx_ffn_hidden);
                lin(hp + ".ffn2", cfg.tx_ffn_hidden, d);
                ln(hp + ".ln1", d);
                ln(hp + ".ln2", d);
            }
            lin(lp + ".out", cfg.tx_heads * d, d);
        }
        lin("tx.cls", d, cfg.num_logits());
        lin("tx.reg", d, cfg.reg_outputs());
    }
    if (cfg.head == HeadMode::I3d || cfg.head == HeadMode::TxI3d) {
        conv("i3d.block1", 3, 3, 3, f, cfg.trunk_c4);
        conv("i3d.block2", 3, 3, 3, cfg.trunk_c4, cfg.trunk_c4);
        lin("i3d.cls", cfg.trunk_c4, cfg.num_logits());
        lin("i3d.reg", cfg.trunk_c4, cfg.reg_outputs());
    }
    return ps;
}

namespace {

void write_u32(std::ofstream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ofstream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_tensor(std::ofstream& os, const std::string& name, const Tensor& t) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) write_u64(os, static_cast<uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

uint32_t read_u32(std::ifstream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}
uint64_t read_u64(std::ifstream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}
std::pair<std::string, Tensor> read_tensor(std::ifstream& is) {
    const uint32_t nlen = read_u32(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    const uint32_t ndim = read_u32(is);
    std::vector<int64_t> shape(ndim);
    for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int64_t>(read_u64(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParamStore& params, const OptState& opt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
    write_u32(os, kMagic);
    write_u32(os, kVersion);
    write_u64(os, cfg.hash());
    write_u64(os, static_cast<uint64_t>(opt.step));
    write_u32(os, static_cast<uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) write_tensor(os, name, t);
    write_u32(os, static_cast<uint32_t>(opt.momentum.size()));
    for (const auto& [name, t] : opt.momentum) write_tensor(os, name, t);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, const ModelConfig& cfg,
                     ParamStore& params, OptState& opt) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    if (read_u32(is) != kMagic) throw std::runtime_error("checkpoint: bad magic");
    const uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version));
    }
    const uint64_t h = read_u64(is);
    if (h != cfg.hash()) {
        throw std::runtime_error(
            "checkpoint: config hash mismatch; refusing to load weights trained "
            "with a different configuration");
    }
    opt.step = static_cast<int64_t>(read_u64(is));
    params.tensors.clear();
    opt.momentum.clear();
    const uint32_t np = read_u32(is);
    for (uint32_t i = 0; i < np; ++i) {
        auto [name, t] = read_tensor(is);
        params.tensors[name] = std::move(t);
    }
    const uint32_t nm = read_u32(is);
    for (uint32_t i = 0; i < nm; ++i) {
        auto [name, t] = read_tensor(is);
        opt.momentum[name] = std::move(t);
    }
}

}  // namespace actdet
