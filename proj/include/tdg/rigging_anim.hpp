#pragma once

#include <string>
#include <vector>

#include "tdg/body_model.hpp"
#include "tdg/rasterizer.hpp"
#include "tdg/surface_recon.hpp"

namespace tdg {

// Per-clothed-vertex KNN control points on the binding body with
// softmax-of-negative-squared-distance weights, plus the derived per-joint
// LBS weights. Records the binding body's content hash and canonical pose,
// so animation can refuse a mismatched template.
struct SkinningBinding {
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> control_indices;  // N x K
    Eigen::MatrixXd control_weights;  // N x K, rows on the simplex
    Eigen::MatrixXd joint_weights;    // N x J, rows on the simplex
    BodyParams canonical;             // pose the binding was built in
    uint64_t body_hash = 0;

    int count() const { return static_cast<int>(control_indices.rows()); }
    int k() const { return static_cast<int>(control_indices.cols()); }
};

// K nearest canonical-body vertices per clothed vertex (exact linear scan
// below 50k body vertices, grid-hash accelerated above; ties resolved by
// lower index), weighted per w_hat = exp(-d^2), normalized.
SkinningBinding bind_knn(const Points& clothed_vertices, const ParametricBody& body,
                         const BodyParams& canonical, int k);

struct FramePose {
    Eigen::MatrixXd theta;  // J x 3
    Vec3 trans = Vec3::Zero();
};

struct PoseSequence {
    Eigen::VectorXd beta;  // shared across frames
    std::vector<FramePose> frames;
    double frame_rate = 30.0;

    int frame_count() const { return static_cast<int>(frames.size()); }
    BodyParams params_at(int frame, double cam_scale) const;
    void validate(const ParametricBody& body) const;
};

// LBS the clothed mesh with its derived joint weights: unpose through the
// canonical transforms, repose through the frame transforms, carrying colors
// unchanged. Throws if the body hash or joint count disagrees with the
// binding.
TriMesh animate(const ClothedMesh& clothed, const SkinningBinding& binding,
                const ParametricBody& body, const BodyParams& frame);

// One textured render per frame of the sequence; frames may be processed in
// parallel. Per-vertex colors are identical across frames by construction.
std::vector<RenderTargets> animate_and_render(const ClothedMesh& clothed,
                                              const SkinningBinding& binding,
                                              const ParametricBody& body,
                                              const PoseSequence& seq,
                                              const WeakPerspectiveCam& cam,
                                              const RenderWant& want = {true, true},
                                              int threads = 1);

// Binary binding container (layout documented in the README).
void save_binding(const std::string& path, const SkinningBinding& binding);
SkinningBinding load_binding(const std::string& path);

void save_pose_sequence_json(const std::string& path, const PoseSequence& seq);
PoseSequence load_pose_sequence_json(const std::string& path);

}  // namespace tdg
