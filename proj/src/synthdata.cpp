#include "actdet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "actdet/rng.hpp"

namespace actdet {

namespace cls {
const char* name(int c) {
    switch (c) {
        case kSpinning: return "spinning";
        case kFast: return "fast";
        case kBlinking: return "blinking";
        case kFacingActor: return "facing_actor";
        case kNearObject: return "near_object";
        case kActorLeft: return "actor_left";
        default: return "unknown";
    }
}
}  // namespace cls

namespace {

// label thresholds, shared by the sampler and the label rule
constexpr double kSpinThresh = 0.15;      // rad/frame
constexpr double kFastThresh = 1.8;       // px/frame at image_size 64
constexpr double kFaceHalfAngle = 0.35;   // rad
constexpr double kFaceMaxDistFrac = 0.75; // of image size
constexpr double kNearObjFactor = 1.7;    // of actor size

constexpr uint8_t kPalette[][3] = {
    {230, 70, 70}, {70, 210, 90}, {80, 110, 235}, {225, 205, 60}, {200, 90, 220},
};
constexpr uint8_t kObjPalette[][3] = {{245, 245, 245}, {250, 160, 40}};
constexpr uint8_t kBackground[3] = {28, 28, 32};

double wrap_angle(double a) {
    while (a > M_PI) a -= 2 * M_PI;
    while (a < -M_PI) a += 2 * M_PI;
    return a;
}

}  // namespace

void Scene::actor_pose(int actor, int frame, double& cx, double& cy,
                       double& ang) const {
    const Actor& a = actors[actor];
    const double dt = static_cast<double>(frame - keyframe());
    const double jit = 0.2 * image_size / 64.0;
    cx = a.cx + a.vx * dt + jit * std::sin(1.7 * frame + a.jitter_phase);
    cy = a.cy + a.vy * dt + jit * std::cos(1.9 * frame + a.jitter_phase);
    ang = a.angle + a.spin_rate * dt;
}

Box Scene::actor_box(int actor, int frame) const {
    double cx, cy, ang;
    actor_pose(actor, frame, cx, cy, ang);
    const double s = actors[actor].size;
    const double dx = std::cos(ang), dy = std::sin(ang);
    const double px = -dy, py = dx;
    const double vx[3] = {cx + 1.2 * s * dx, cx - 0.8 * s * dx + 0.7 * s * px,
                          cx - 0.8 * s * dx - 0.7 * s * px};
    const double vy[3] = {cy + 1.2 * s * dy, cy - 0.8 * s * dy + 0.7 * s * py,
                          cy - 0.8 * s * dy - 0.7 * s * py};
    Box b{*std::min_element(vx, vx + 3), *std::min_element(vy, vy + 3),
          *std::max_element(vx, vx + 3), *std::max_element(vy, vy + 3)};
    return b;
}

std::vector<std::vector<int>> derive_labels(const Scene& scene) {
    const int k = scene.keyframe();
    const double scale = scene.image_size / 64.0;
    const double img = static_cast<double>(scene.image_size);

    // entities that were visible early but are fully out of frame by the
    // keyframe ("someone left earlier")
    bool someone_left = false;
    for (size_t i = 0; i < scene.actors.size(); ++i) {
        const Box b0 = scene.actor_box(static_cast<int>(i), 0);
        const Box bk = scene.actor_box(static_cast<int>(i), k);
        const bool visible0 = b0.x2 > 0 && b0.x1 < img && b0.y2 > 0 && b0.y1 < img;
        const bool gone_k = bk.x2 <= 0 || bk.x1 >= img || bk.y2 <= 0 || bk.y1 >= img;
        if (visible0 && gone_k) someone_left = true;
    }

    std::vector<std::vector<int>> labels;
    for (size_t i = 0; i < scene.actors.size(); ++i) {
        const Scene::Actor& a = scene.actors[i];
        std::vector<int> l;
        if (a.transient) {
            labels.push_back(std::move(l));
            continue;
        }
        double cx, cy, ang;
        scene.actor_pose(static_cast<int>(i), k, cx, cy, ang);
        if (std::abs(a.spin_rate) >= kSpinThresh) l.push_back(cls::kSpinning);
        if (std::hypot(a.vx, a.vy) >= kFastThresh * scale) l.push_back(cls::kFast);
        if (a.blink) l.push_back(cls::kBlinking);
        for (size_t j = 0; j < scene.actors.size(); ++j) {
            if (j == i || scene.actors[j].transient) continue;
            double ox, oy, oang;
            scene.actor_pose(static_cast<int>(j), k, ox, oy, oang);
            const double dist = std::hypot(ox - cx, oy - cy);
            if (dist > kFaceMaxDistFrac * img) continue;
            if (std::abs(wrap_angle(std::atan2(oy - cy, ox - cx) - ang)) <=
                kFaceHalfAngle) {
                l.push_back(cls::kFacingActor);
                break;
            }
        }
        for (const auto& o : scene.objects) {
            if (std::hypot(o.cx - cx, o.cy - cy) <= kNearObjFactor * a.size) {
                l.push_back(cls::kNearObject);
                break;
            }
        }
        if (someone_left) l.push_back(cls::kActorLeft);
        labels.push_back(std::move(l));
    }
    return labels;
}

namespace {

void fill_triangle(std::vector<uint8_t>& img, int s, double vx[3], double vy[3],
                   const uint8_t color[3]) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(
                                     *std::min_element(vx, vx + 3))));
    const int x_hi = std::min(s - 1, static_cast<int>(std::ceil(
                                         *std::max_element(vx, vx + 3))));
    const int y_lo = std::max(0, static_cast<int>(std::floor(
                                     *std::min_element(vy, vy + 3))));
    const int y_hi = std::min(s - 1, static_cast<int>(std::ceil(
                                         *std::max_element(vy, vy + 3))));
    auto edge = [](double ax, double ay, double bx, double by, double px,
                   double py) {
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    };
    const double area = edge(vx[0], vy[0], vx[1], vy[1], vx[2], vy[2]);
    if (area == 0.0) return;
    const double sgn = area > 0 ? 1.0 : -1.0;
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            if (sgn * edge(vx[0], vy[0], vx[1], vy[1], px, py) >= 0 &&
                sgn * edge(vx[1], vy[1], vx[2], vy[2], px, py) >= 0 &&
                sgn * edge(vx[2], vy[2], vx[0], vy[0], px, py) >= 0) {
                uint8_t* p = img.data() + (y * s + x) * 3;
                p[0] = color[0];
                p[1] = color[1];
                p[2] = color[2];
            }
        }
    }
}

void fill_square(std::vector<uint8_t>& img, int s, double cx, double cy,
                 double half, const uint8_t color[3]) {
    const int x_lo = std::max(0, static_cast<int>(std::floor(cx - half)));
    const int x_hi = std::min(s - 1, static_cast<int>(std::ceil(cx + half)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(cy - half)));
    const int y_hi = std::min(s - 1, static_cast<int>(std::ceil(cy + half)));
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            if (std::abs(x + 0.5 - cx) <= half && std::abs(y + 0.5 - cy) <= half) {
                uint8_t* p = img.data() + (y * s + x) * 3;
                p[0] = color[0];
                p[1] = color[1];
                p[2] = color[2];
            }
        }
    }
}

Scene sample_scene(const SceneSpec& spec, int index) {
    if (spec.image_size % 16 != 0 || spec.clip_t % 4 != 0) {
        throw std::invalid_argument("scene spec: image_size/clip_t not divisible");
    }
    const double s = static_cast<double>(spec.image_size);
    const double scale = s / 64.0;
    SeqRng rng(hash_combine(spec.seed, static_cast<uint64_t>(index)));
    Scene scene;
    scene.image_size = spec.image_size;
    scene.clip_t = spec.clip_t;
    const int k = scene.keyframe();

    const int n_actors =
        static_cast<int>(rng.uniform_int(spec.min_actors, spec.max_actors));
    for (int i = 0; i < n_actors; ++i) {
        Scene::Actor a{};
        a.size = rng.uniform(9.0, 14.0) * scale;
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            a.cx = rng.uniform(a.size * 0.8, s - a.size * 0.8);
            a.cy = rng.uniform(a.size * 0.8, s - a.size * 0.8);
            placed = true;
            for (const auto& other : scene.actors) {
                if (std::hypot(other.cx - a.cx, other.cy - a.cy) <
                    0.9 * (other.size + a.size)) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) {
            throw std::runtime_error(
                "scene spec unsatisfiable: cannot place actors in frame");
        }
        const double dir = rng.uniform(0.0, 2 * M_PI);
        const double speed = rng.bernoulli(spec.p_fast)
                                 ? rng.uniform(2.2, 3.2) * scale
                                 : rng.uniform(0.1, 1.0) * scale;
        a.vx = speed * std::cos(dir);
        a.vy = speed * std::sin(dir);
        a.spin_rate = rng.bernoulli(spec.p_spin)
                          ? (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.25, 0.5)
                          : rng.uniform(-0.03, 0.03);
        a.blink = rng.bernoulli(spec.p_blink);
        a.jitter_phase = rng.uniform(0.0, 2 * M_PI);
        a.color = static_cast<int>(rng.uniform_int(0, 4));
        a.angle = rng.uniform(0.0, 2 * M_PI);  // oriented below once all placed
        scene.actors.push_back(a);
    }
    // orientations: aim some actors at another; keep the rest pointed away
    for (int i = 0; i < n_actors; ++i) {
        Scene::Actor& a = scene.actors[i];
        if (n_actors >= 2 && rng.bernoulli(spec.p_face)) {
            int j = static_cast<int>(rng.uniform_int(0, n_actors - 2));
            if (j >= i) ++j;
            a.angle = std::atan2(scene.actors[j].cy - a.cy,
                                 scene.actors[j].cx - a.cx) +
                      rng.uniform(-0.15, 0.15);
        } else {
            for (int attempt = 0; attempt < 30; ++attempt) {
                a.angle = rng.uniform(0.0, 2 * M_PI);
                bool facing = false;
                for (int j = 0; j < n_actors; ++j) {
                    if (j == i) continue;
                    const double da = wrap_angle(
                        std::atan2(scene.actors[j].cy - a.cy,
                                   scene.actors[j].cx - a.cx) -
                        a.angle);
                    if (std::abs(da) <= kFaceHalfAngle + 0.1) facing = true;
                }
                if (!facing) break;
            }
        }
    }
    // transient actor that exits the frame before the keyframe
    if (rng.bernoulli(spec.p_exit)) {
        Scene::Actor t{};
        t.size = rng.uniform(9.0, 14.0) * scale;
        t.transient = true;
        const int edge = static_cast<int>(rng.uniform_int(0, 3));
        double x0 = rng.uniform(t.size * 1.2, s - t.size * 1.2);
        double y0 = rng.uniform(t.size * 1.2, s - t.size * 1.2);
        const int exit_frame = std::max(1, k - 1);
        double vx = 0, vy = 0;
        switch (edge) {
            case 0: vx = -(x0 + 1.6 * t.size + 2) / exit_frame; break;  // left
            case 1: vx = (s - x0 + 1.6 * t.size + 2) / exit_frame; break;
            case 2: vy = -(y0 + 1.6 * t.size + 2) / exit_frame; break;  // top
            default: vy = (s - y0 + 1.6 * t.size + 2) / exit_frame; break;
        }
        t.vx = vx;
        t.vy = vy;
        // keyframe-anchored storage
        t.cx = x0 + vx * k;
        t.cy = y0 + vy * k;
        t.angle = rng.uniform(0.0, 2 * M_PI);
        t.jitter_phase = rng.uniform(0.0, 2 * M_PI);
        t.color = static_cast<int>(rng.uniform_int(0, 4));
        scene.actors.push_back(t);
    }
    // objects near specific actors, then ambient ones kept far from everyone
    for (int i = 0; i < n_actors; ++i) {
        if (!rng.bernoulli(spec.p_near_object)) continue;
        const Scene::Actor& a = scene.actors[i];
        for (int attempt = 0; attempt < 30; ++attempt) {
            const double phi = rng.uniform(0.0, 2 * M_PI);
            const double dist = a.size * rng.uniform(1.1, 1.5);
            Scene::Object o{a.cx + dist * std::cos(phi), a.cy + dist * std::sin(phi),
                            rng.uniform(3.0, 5.0) * scale,
                            static_cast<int>(rng.uniform_int(0, 1))};
            if (o.cx < 1 || o.cx > s - 1 || o.cy < 1 || o.cy > s - 1) continue;
            bool clean = true;
            for (int j = 0; j < n_actors; ++j) {
                if (j == i) continue;
                const Scene::Actor& b = scene.actors[j];
                if (std::hypot(o.cx - b.cx, o.cy - b.cy) <=
                    kNearObjFactor * b.size + 2) {
                    clean = false;
                    break;
                }
            }
            if (clean) {
                scene.objects.push_back(o);
                break;
            }
        }
    }
    const int n_ambient =
        static_cast<int>(rng.uniform_int(spec.min_objects, spec.max_objects));
    for (int i = 0; i < n_ambient; ++i) {
        for (int attempt = 0; attempt < 40; ++attempt) {
            Scene::Object o{rng.uniform(3.0, s - 3.0), rng.uniform(3.0, s - 3.0),
                            rng.uniform(3.0, 5.0) * scale,
                            static_cast<int>(rng.uniform_int(0, 1))};
            bool far = true;
            for (int j = 0; j < n_actors; ++j) {
                const Scene::Actor& b = scene.actors[j];
                if (std::hypot(o.cx - b.cx, o.cy - b.cy) <=
                    kNearObjFactor * b.size + 3) {
                    far = false;
                    break;
                }
            }
            if (far) {
                scene.objects.push_back(o);
                break;
            }
        }
    }
    return scene;
}

std::vector<uint8_t> render_frame(const Scene& scene, int frame) {
    const int s = scene.image_size;
    std::vector<uint8_t> img(static_cast<size_t>(s) * s * 3);
    for (int i = 0; i < s * s; ++i) {
        img[i * 3 + 0] = kBackground[0];
        img[i * 3 + 1] = kBackground[1];
        img[i * 3 + 2] = kBackground[2];
    }
    for (const auto& o : scene.objects) {
        fill_square(img, s, o.cx, o.cy, 0.5 * o.size, kObjPalette[o.color]);
    }
    for (size_t i = 0; i < scene.actors.size(); ++i) {
        const Scene::Actor& a = scene.actors[i];
        double cx, cy, ang;
        scene.actor_pose(static_cast<int>(i), frame, cx, cy, ang);
        const double dx = std::cos(ang), dy = std::sin(ang);
        const double px = -dy, py = dx;
        double vx[3] = {cx + 1.2 * a.size * dx, cx - 0.8 * a.size * dx + 0.7 * a.size * px,
                        cx - 0.8 * a.size * dx - 0.7 * a.size * px};
        double vy[3] = {cy + 1.2 * a.size * dy, cy - 0.8 * a.size * dy + 0.7 * a.size * py,
                        cy - 0.8 * a.size * dy - 0.7 * a.size * py};
        uint8_t color[3] = {kPalette[a.color][0], kPalette[a.color][1],
                            kPalette[a.color][2]};
        if (a.blink && frame % 2 == 1) {
            color[0] = static_cast<uint8_t>(color[0] * 0.3);
            color[1] = static_cast<uint8_t>(color[1] * 0.3);
            color[2] = static_cast<uint8_t>(color[2] * 0.3);
        }
        fill_triangle(img, s, vx, vy, color);
    }
    return img;
}

}  // namespace

ClipSample generate_clip(const SceneSpec& spec, int index) {
    const Scene scene = sample_scene(spec, index);
    const int s = scene.image_size, t = scene.clip_t;
    ClipSample clip;
    clip.clip_id = index;
    clip.scene = scene;
    clip.video = Tensor({t, s, s, 3});
    for (int f = 0; f < t; ++f) {
        const std::vector<uint8_t> img = render_frame(scene, f);
        double* dst = clip.video.data.data() + static_cast<int64_t>(f) * s * s * 3;
        for (size_t i = 0; i < img.size(); ++i) dst[i] = img[i] / 255.0;
    }
    const auto labels = derive_labels(scene);
    const int k = scene.keyframe();
    int pid = 0;
    for (size_t i = 0; i < scene.actors.size(); ++i) {
        if (scene.actors[i].transient) continue;
        GtBox gt;
        gt.box = clip_box(scene.actor_box(static_cast<int>(i), k),
                          static_cast<double>(s), static_cast<double>(s));
        gt.labels = labels[i];
        gt.person_id = pid++;
        clip.gts.push_back(std::move(gt));
    }
    return clip;
}

std::vector<ClipSample> generate_clips(const SceneSpec& spec, int n,
                                       int first_index) {
    std::vector<ClipSample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) out.push_back(generate_clip(spec, first_index + i));
    return out;
}

namespace {
constexpr uint32_t kClipMagic = 0x4c435441;  // "ATCL"
constexpr uint32_t kClipVersion = 1;
}  // namespace

void write_clip_file(const std::string& path, const Tensor& video) {
    if (video.ndim() != 4 || video.dim(3) != 3) {
        throw std::invalid_argument("write_clip_file: expected (T,H,W,3)");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    const uint32_t hdr[5] = {kClipMagic, kClipVersion,
                             static_cast<uint32_t>(video.dim(0)),
                             static_cast<uint32_t>(video.dim(1)),
                             static_cast<uint32_t>(video.dim(2))};
    os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    std::vector<uint8_t> bytes(video.data.size());
    for (size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<uint8_t>(std::lround(video.data[i] * 255.0));
    }
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

Tensor read_clip_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    uint32_t hdr[5];
    is.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (!is || hdr[0] != kClipMagic) throw std::runtime_error("bad clip file: " + path);
    if (hdr[1] != kClipVersion) {
        throw std::runtime_error("unsupported clip version in " + path);
    }
    Tensor video({hdr[2], hdr[3], hdr[4], 3});
    std::vector<uint8_t> bytes(video.data.size());
    is.read(reinterpret_cast<char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!is) throw std::runtime_error("truncated clip file: " + path);
    for (size_t i = 0; i < bytes.size(); ++i) video.data[i] = bytes[i] / 255.0;
    return video;
}

void generate_dataset(const SceneSpec& spec, int n, const std::string& out_dir) {
    if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "clips", ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());

    std::ofstream manifest(fs::path(out_dir) / "manifest.txt");
    std::ofstream ann(fs::path(out_dir) / "annotations.csv");
    if (!manifest || !ann) throw std::runtime_error("cannot write into " + out_dir);
    manifest << "clips=" << n << "\n";
    std::vector<int64_t> freq(cls::kCount, 0);
    for (int i = 0; i < n; ++i) {
        const ClipSample clip = generate_clip(spec, i);
        char name[64];
        std::snprintf(name, sizeof(name), "clips/clip_%05d.bin", i);
        write_clip_file((fs::path(out_dir) / name).string(), clip.video);
        manifest << i << "," << name << "," << spec.clip_t << ","
                 << spec.image_size << "," << spec.image_size << "\n";
        for (const auto& gt : clip.gts) {
            ann << clip.clip_id << "," << gt.person_id << "," << gt.box.x1 << ","
                << gt.box.y1 << "," << gt.box.x2 << "," << gt.box.y2;
            for (int l : gt.labels) {
                ann << "," << l;
                ++freq[l];
            }
            ann << "\n";
        }
    }
    std::ofstream fr(fs::path(out_dir) / "class_freq.csv");
    fr << "class_id,name,count\n";
    for (int c = 0; c < cls::kCount; ++c) {
        fr << c << "," << cls::name(c) << "," << freq[c] << "\n";
    }
}

}  // namespace actdet
