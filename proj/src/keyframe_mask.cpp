#include "tdg/keyframe_mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace tdg {

std::vector<double> keyframe_scores(const Keypoints2D& kps, const KeyframeConfig& cfg) {
    if (kps.frames.empty()) throw std::invalid_argument("select_keyframe: no frames");
    if (kps.image_h < 1 || kps.image_w < 1)
        throw std::invalid_argument("select_keyframe: bad image size");

    std::vector<double> scores;
    scores.reserve(kps.frames.size());
    for (const KeypointFrame& frame : kps.frames) {
        int total = static_cast<int>(frame.points.size());
        int confident = 0;
        double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
        const Keypoint* ls = nullptr;
        const Keypoint* rs = nullptr;
        const Keypoint* lh = nullptr;
        const Keypoint* rh = nullptr;
        for (const auto& [name, kp] : frame.points) {
            bool ok = kp.conf >= cfg.conf_threshold && kp.x >= 0 && kp.x < kps.image_w &&
                      kp.y >= 0 && kp.y < kps.image_h;
            if (!ok) continue;
            ++confident;
            min_x = std::min(min_x, kp.x);
            max_x = std::max(max_x, kp.x);
            min_y = std::min(min_y, kp.y);
            max_y = std::max(max_y, kp.y);
            if (name == "left_shoulder") ls = &kp;
            if (name == "right_shoulder") rs = &kp;
            if (name == "left_hip") lh = &kp;
            if (name == "right_hip") rh = &kp;
        }
        if (total == 0 || confident == 0) {
            scores.push_back(0.0);
            continue;
        }
        double conf_frac = static_cast<double>(confident) / total;
        double area = (max_x - min_x) * (max_y - min_y) /
                      (static_cast<double>(kps.image_w) * kps.image_h);
        area = std::clamp(area, 0.0, 1.0);
        double frontality = 0.0;
        if (ls && rs) {
            // midline from the hips when available; the shoulders themselves
            // usually span the bounding box and would read as symmetric
            double cx = (lh && rh) ? 0.5 * (lh->x + rh->x) : 0.5 * (min_x + max_x);
            double dl = std::abs(ls->x - cx);
            double dr = std::abs(rs->x - cx);
            double asym = std::abs(dl - dr) / std::max({dl, dr, 1e-9});
            frontality = 1.0 - std::min(asym, 1.0);
        }
        scores.push_back(conf_frac * frontality * area);
    }
    return scores;
}

int select_keyframe(const Keypoints2D& kps, const KeyframeConfig& cfg) {
    std::vector<double> scores = keyframe_scores(kps, cfg);
    bool any_confident = false;
    for (const KeypointFrame& frame : kps.frames)
        for (const auto& [name, kp] : frame.points)
            if (kp.conf >= cfg.conf_threshold) any_confident = true;
    if (!any_confident)
        throw std::runtime_error("select_keyframe: no usable frame (all confidences zero)");

    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
        if (scores[i] > scores[best]) best = i;  // ties keep the lowest index
    return best;
}

namespace {

FrameRect garment_bbox(const MaskU8& mask) {
    FrameRect r;
    r.x0 = mask.w;
    r.y0 = mask.h;
    r.x1 = -1;
    r.y1 = -1;
    for (int y = 0; y < mask.h; ++y)
        for (int x = 0; x < mask.w; ++x)
            if (mask.at(y, x)) {
                r.x0 = std::min(r.x0, x);
                r.y0 = std::min(r.y0, y);
                r.x1 = std::max(r.x1, x);
                r.y1 = std::max(r.y1, y);
            }
    return r;
}

FrameRect union_rect(const FrameRect& a, const FrameRect& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
            std::max(a.y1, b.y1)};
}

}  // namespace

RectMaskResult rect_mask(const std::vector<MaskU8>& garment_masks,
                         const std::vector<MaskU8>& keep_regions, const RectMaskConfig& cfg) {
    const int n = static_cast<int>(garment_masks.size());
    if (n == 0) throw std::invalid_argument("rect_mask: no frames");
    if (cfg.margin < 0) throw std::invalid_argument("rect_mask: margin must be >= 0");
    if (cfg.window < 1) throw std::invalid_argument("rect_mask: window must be >= 1");
    if (!keep_regions.empty() && static_cast<int>(keep_regions.size()) != n)
        throw std::invalid_argument("rect_mask: keep_regions frame count mismatch");
    const int H = garment_masks[0].h, W = garment_masks[0].w;
    for (const MaskU8& m : garment_masks)
        if (m.h != H || m.w != W) throw std::invalid_argument("rect_mask: frame shape mismatch");
    for (const MaskU8& m : keep_regions)
        if (m.h != H || m.w != W) throw std::invalid_argument("rect_mask: keep shape mismatch");

    // per-frame boxes; empty frames borrow the nearest non-empty frame
    std::vector<FrameRect> boxes(n);
    std::vector<char> has_box(n, 0);
    for (int f = 0; f < n; ++f) {
        boxes[f] = garment_bbox(garment_masks[f]);
        has_box[f] = !boxes[f].empty();
    }
    if (std::none_of(has_box.begin(), has_box.end(), [](char c) { return c != 0; }))
        throw std::runtime_error("rect_mask: every garment mask is empty");
    for (int f = 0; f < n; ++f) {
        if (has_box[f]) continue;
        int best = -1, best_dist = 1 << 30;
        for (int g = 0; g < n; ++g)
            if (has_box[g]) {
                int dist = std::abs(g - f);
                if (dist < best_dist) {  // ties resolve to the earlier frame
                    best_dist = dist;
                    best = g;
                }
            }
        boxes[f] = boxes[best];
    }

    // dilate, then union over the temporal window
    for (FrameRect& r : boxes) {
        r.x0 = std::max(0, r.x0 - cfg.margin);
        r.y0 = std::max(0, r.y0 - cfg.margin);
        r.x1 = std::min(W - 1, r.x1 + cfg.margin);
        r.y1 = std::min(H - 1, r.y1 + cfg.margin);
    }
    const int lo_off = (cfg.window - 1) / 2;
    const int hi_off = cfg.window / 2;
    std::vector<FrameRect> final_rects(n);
    for (int f = 0; f < n; ++f) {
        FrameRect r;
        for (int g = std::max(0, f - lo_off); g <= std::min(n - 1, f + hi_off); ++g)
            r = union_rect(r, boxes[g]);
        final_rects[f] = r;
    }

    RectMaskResult out;
    out.rects = final_rects;
    out.masks.reserve(n);
    for (int f = 0; f < n; ++f) {
        MaskU8 m(H, W, 0);
        const FrameRect& r = final_rects[f];
        for (int y = r.y0; y <= r.y1; ++y)
            for (int x = r.x0; x <= r.x1; ++x) m.at(y, x) = 255;
        if (!keep_regions.empty()) {
            const MaskU8& keep = keep_regions[f];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    if (keep.at(y, x)) m.at(y, x) = 0;
        }
        out.masks.push_back(std::move(m));
    }
    return out;
}

Keypoints2D load_keypoints_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_keypoints_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    Keypoints2D kps;
    kps.image_h = j.at("image_size")[0].get<int>();
    kps.image_w = j.at("image_size")[1].get<int>();
    for (const auto& jf : j.at("frames")) {
        KeypointFrame frame;
        for (auto it = jf.begin(); it != jf.end(); ++it) {
            const auto& arr = it.value();
            frame.points[it.key()] = {arr[0].get<double>(), arr[1].get<double>(),
                                      arr[2].get<double>()};
        }
        kps.frames.push_back(std::move(frame));
    }
    return kps;
}

void save_keypoints_json(const std::string& path, const Keypoints2D& kps) {
    nlohmann::json j;
    j["image_size"] = {kps.image_h, kps.image_w};
    nlohmann::json frames = nlohmann::json::array();
    for (const KeypointFrame& frame : kps.frames) {
        nlohmann::json jf = nlohmann::json::object();
        for (const auto& [name, kp] : frame.points) jf[name] = {kp.x, kp.y, kp.conf};
        frames.push_back(std::move(jf));
    }
    j["frames"] = std::move(frames);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_keypoints_json: cannot open " + path);
    out << j.dump(1) << '\n';
}

}  // namespace tdg
