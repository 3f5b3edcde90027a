#include "actdet/config.hpp"

#include <sstream>
#include <stdexcept>

namespace actdet {

const char* to_string(QprMode m) {
    return m == QprMode::HighRes ? "highres" : "lowres";
}

const char* to_string(HeadMode m) {
    switch (m) {
        case HeadMode::Tx: return "tx";
        case HeadMode::I3d: return "i3d";
        default: return "tx+i3d";
    }
}

QprMode qpr_from_string(const std::string& s) {
    if (s == "highres") return QprMode::HighRes;
    if (s == "lowres") return QprMode::LowRes;
    throw std::invalid_argument("unknown qpr mode: " + s);
}

HeadMode head_from_string(const std::string& s) {
    if (s == "tx") return HeadMode::Tx;
    if (s == "i3d") return HeadMode::I3d;
    if (s == "tx+i3d") return HeadMode::TxI3d;
    throw std::invalid_argument("unknown head mode: " + s);
}

std::string ModelConfig::canonical() const {
    std::ostringstream os;
    os << "classes=" << num_classes << ";trunk=" << trunk_c1 << "," << trunk_c2
       << "," << trunk_c3 << "," << trunk_c4 << ";emb=" << emb_hidden << ","
       << emb_out << ";rpn=" << rpn_channels << ";scales=";
    for (double s : anchor_scales) os << s << ",";
    os << ";ratios=";
    for (double r : anchor_ratios) os << r << ",";
    os << ";rpn_nms=" << rpn_nms_thresh << ";R=" << proposal_count
       << ";D=" << tx_dim << ";heads=" << tx_heads << ";layers=" << tx_layers
       << ";dropout=" << tx_dropout << ";ffn=" << tx_ffn_hidden
       << ";qpr_reduce=" << qpr_reduce_channels << ";qpr=" << to_string(qpr)
       << ";head=" << to_string(head)
       << ";class_agnostic=" << (class_agnostic_reg ? 1 : 0)
       << ";action_agnostic=" << (action_agnostic ? 1 : 0);
    return os.str();
}

uint64_t ModelConfig::hash() const {
    // FNV-1a
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : canonical()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace actdet
