#pragma once

#include <map>
#include <string>
#include <vector>

#include "tdg/image.hpp"

namespace tdg {

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double conf = 0.0;
};

struct KeypointFrame {
    std::map<std::string, Keypoint> points;  // ordered: deterministic iteration
};

struct Keypoints2D {
    std::vector<KeypointFrame> frames;
    int image_h = 0;
    int image_w = 0;
};

struct KeyframeConfig {
    double conf_threshold = 0.5;
};

// Per-frame score = (fraction of confident keypoints)
//                 x (frontality: 1 - normalized shoulder-offset asymmetry)
//                 x (confident-keypoint bounding-box area / image area).
// Frontality needs both "left_shoulder" and "right_shoulder" confident and
// measures how unevenly they sit about the body midline (mid-hip x when the
// hips are confident, bounding-box center otherwise). Argmax wins, ties to
// the lowest index. Throws when no frame has a confident keypoint.
int select_keyframe(const Keypoints2D& kps, const KeyframeConfig& cfg = {});
std::vector<double> keyframe_scores(const Keypoints2D& kps, const KeyframeConfig& cfg = {});

struct RectMaskConfig {
    int margin = 0;   // box dilation, pixels
    int window = 5;   // temporal union width, frames
};

struct FrameRect {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive pixel bounds; empty when x1 < x0
    bool empty() const { return x1 < x0 || y1 < y0; }
};

struct RectMaskResult {
    std::vector<MaskU8> masks;      // 1 = region to inpaint
    std::vector<FrameRect> rects;   // pre-subtraction rectangle per frame
};

// Per frame: garment bounding box, dilated by margin, unioned over the
// temporal window, filled, then keep regions subtracted. Frames with an
// empty garment mask borrow the nearest non-empty frame's box; an all-empty
// sequence throws.
RectMaskResult rect_mask(const std::vector<MaskU8>& garment_masks,
                         const std::vector<MaskU8>& keep_regions,  // empty: no keeps
                         const RectMaskConfig& cfg);

// COCO-style JSON: {"image_size": [H, W], "frames": [{name: [x, y, conf]}]}.
Keypoints2D load_keypoints_json(const std::string& path);
void save_keypoints_json(const std::string& path, const Keypoints2D& kps);

}  // namespace tdg
