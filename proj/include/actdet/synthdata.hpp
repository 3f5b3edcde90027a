#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actdet/geometry.hpp"
#include "actdet/tensor.hpp"

namespace actdet {

// Action taxonomy. The first three are decidable from an actor's own tube;
// the last three require looking at other entities, possibly at other times.
namespace cls {
constexpr int kSpinning = 0;
constexpr int kFast = 1;
constexpr int kBlinking = 2;
constexpr int kFacingActor = 3;
constexpr int kNearObject = 4;
constexpr int kActorLeft = 5;
constexpr int kCount = 6;
inline bool is_context(int c) { return c >= kFacingActor; }
const char* name(int c);
}  // namespace cls

struct SceneSpec {
    uint64_t seed = 7;
    int image_size = 64;  // H = W, divisible by 16
    int clip_t = 8;       // divisible by 4
    int min_actors = 2, max_actors = 3;
    int min_objects = 0, max_objects = 2;
    // sampling rates, tuned so context-class prevalence tracks box-local
    double p_spin = 0.40, p_fast = 0.40, p_blink = 0.40;
    double p_face = 0.55, p_near_object = 0.42, p_exit = 0.40;
};

// Full geometric description of one scene; labels are a pure function of it.
struct Scene {
    struct Actor {
        double cx, cy;        // keyframe center
        double vx, vy;        // px/frame
        double size;          // triangle "radius"
        double angle;         // keyframe orientation
        double spin_rate;     // rad/frame
        double jitter_phase;  // phase of the small positional jitter
        bool blink;
        int color;            // palette index
        bool transient;       // rendered entity that exits before the keyframe
    };
    struct Object {
        double cx, cy, size;
        int color;
    };
    int image_size, clip_t;
    std::vector<Actor> actors;
    std::vector<Object> objects;

    int keyframe() const { return clip_t / 2; }
    // actor center/orientation at frame t (keyframe-anchored linear motion)
    void actor_pose(int actor, int frame, double& cx, double& cy, double& ang) const;
    Box actor_box(int actor, int frame) const;
};

struct GtBox {
    Box box;
    std::vector<int> labels;  // class indices; may be empty (background person)
    int person_id = 0;
};

struct ClipSample {
    Tensor video;  // (T,H,W,3), values k/255
    std::vector<GtBox> gts;
    Scene scene;
    int clip_id = 0;
};

// Deterministic labels from scene geometry alone.
std::vector<std::vector<int>> derive_labels(const Scene& scene);

// Renders and labels clip `index` of the virtual dataset; bit-identical for
// identical (spec.seed, index).
ClipSample generate_clip(const SceneSpec& spec, int index);

std::vector<ClipSample> generate_clips(const SceneSpec& spec, int n,
                                       int first_index = 0);

// On-disk dataset: raw clip files, manifest, annotation interchange file and
// a class-frequency summary.
void generate_dataset(const SceneSpec& spec, int n, const std::string& out_dir);

// Raw clip format: magic, version, T,H,W, then uint8 RGB frames.
void write_clip_file(const std::string& path, const Tensor& video);
Tensor read_clip_file(const std::string& path);

}  // namespace actdet
