#include "actdet/attention_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace actdet {

void write_attention_csv(const std::string& path, int clip_id,
                         const ClipDetections& result) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.precision(17);
    os << "clip_id,proposal,x1,y1,x2,y2,layer,head,t,h,w,weight\n";
    for (size_t p = 0; p < result.traces.size(); ++p) {
        const AttentionTraceSlice& s = result.traces[p];
        const Box& b = result.trace_boxes[p];
        for (size_t l = 0; l < s.weights.size(); ++l) {
            for (size_t h = 0; h < s.weights[l].size(); ++h) {
                const auto& w = s.weights[l][h];
                for (int64_t t = 0; t < s.tp; ++t) {
                    for (int64_t y = 0; y < s.hp; ++y) {
                        for (int64_t x = 0; x < s.wp; ++x) {
                            os << clip_id << "," << p << "," << b.x1 << "," << b.y1
                               << "," << b.x2 << "," << b.y2 << "," << l << ","
                               << h << "," << t << "," << y << "," << x << ","
                               << w[(t * s.hp + y) * s.wp + x] << "\n";
                        }
                    }
                }
            }
        }
    }
}

void write_attention_maps(const std::string& dir, int clip_id,
                          const ClipDetections& result, int upscale) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
    for (size_t p = 0; p < result.traces.size(); ++p) {
        const AttentionTraceSlice& s = result.traces[p];
        for (size_t l = 0; l < s.weights.size(); ++l) {
            for (size_t h = 0; h < s.weights[l].size(); ++h) {
                const auto& w = s.weights[l][h];
                const double peak = *std::max_element(w.begin(), w.end());
                for (int64_t t = 0; t < s.tp; ++t) {
                    char name[128];
                    std::snprintf(name, sizeof(name),
                                  "clip%05d_p%02zu_l%zu_h%zu_t%02lld.pgm", clip_id,
                                  p, l, h, static_cast<long long>(t));
                    std::ofstream os(fs::path(dir) / name,
                                     std::ios::binary | std::ios::trunc);
                    const int64_t oh = s.hp * upscale, ow = s.wp * upscale;
                    os << "P5\n" << ow << " " << oh << "\n255\n";
                    for (int64_t y = 0; y < oh; ++y) {
                        for (int64_t x = 0; x < ow; ++x) {
                            const double v =
                                w[(t * s.hp + y / upscale) * s.wp + x / upscale];
                            const int g = peak > 0
                                              ? static_cast<int>(255.0 * v / peak)
                                              : 0;
                            os.put(static_cast<char>(std::clamp(g, 0, 255)));
                        }
                    }
                    if (!os) {
                        throw std::runtime_error("write failed in " + dir);
                    }
                }
            }
        }
    }
}

}  // namespace actdet
