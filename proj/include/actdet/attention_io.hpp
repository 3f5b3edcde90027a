#pragma once

#include <string>
#include <vector>

#include "actdet/detector.hpp"

namespace actdet {

// Flat export of attention weights: one CSV row per
// (clip, proposal, layer, head, t, h, w) cell, plus per-frame grayscale
// images (binary PGM, weights normalized per map) for quick inspection.
void write_attention_csv(const std::string& path, int clip_id,
                         const ClipDetections& result);
void write_attention_maps(const std::string& dir, int clip_id,
                          const ClipDetections& result, int upscale = 8);

}  // namespace actdet
