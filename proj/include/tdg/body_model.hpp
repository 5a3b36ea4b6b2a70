#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "tdg/mesh.hpp"

namespace tdg {

// Parametric skinned humanoid: shaped template mesh posed by linear blend
// skinning over a single-rooted kinematic tree. Pose-corrective blendshapes
// are carried in the data model (one V x 3 basis map per element of the
// flattened rotation feature, 9*(J-1) entries) so converted SMPL assets can
// be loaded; the toy generator leaves them empty.
struct ParametricBody {
    Points template_vertices;          // V x 3, meters
    Faces faces;                       // F x 3
    std::vector<Points> shape_dirs;    // S entries, each V x 3
    std::vector<Points> pose_dirs;     // 0 or 9*(J-1) entries, each V x 3
    Eigen::MatrixXd joint_regressor;   // J x V, rows nonnegative, sum to 1
    std::vector<int> parent;           // length J, parent[0] == -1
    Eigen::MatrixXd blend_weights;     // V x J, rows nonnegative, sum to 1
    std::vector<std::string> joint_names;  // length J

    int vertex_count() const { return static_cast<int>(template_vertices.rows()); }
    int joint_count() const { return static_cast<int>(parent.size()); }
    int shape_count() const { return static_cast<int>(shape_dirs.size()); }

    // Throws std::invalid_argument on any structural invariant violation.
    void validate() const;
};

struct BodyParams {
    Eigen::VectorXd beta;      // length S
    Eigen::MatrixXd theta;     // J x 3 axis-angle, radians
    Vec3 trans = Vec3::Zero();
    double cam_scale = 1.0;    // pixels per meter, > 0

    static BodyParams rest(const ParametricBody& body);
    void validate(const ParametricBody& body) const;
};

// Posed mesh plus its rest-pose correspondence (the shaped template T_p).
struct SkinnedMesh {
    Points vertices;
    Faces faces;
    Points rest_vertices;

    TriMesh as_tri_mesh() const;
};

// Axis-angle to rotation matrix (Rodrigues).
Mat3 rodrigues(const Vec3& axis_angle);

// Template plus shape offsets: T-bar + B_s(beta).
Points shaped_template(const ParametricBody& body, const Eigen::VectorXd& beta);

// Joint centers J(beta) = joint_regressor x shaped template.
Points regress_joints(const ParametricBody& body, const Eigen::VectorXd& beta);

// Per-joint skinning transforms A'_j: forward kinematics over `parent`,
// composed with the inverse rest-joint translation. Does not include trans.
std::vector<Mat4> skinning_transforms(const ParametricBody& body, const BodyParams& params);

// Full pose: T_p = T-bar + B_s(beta) + B_p(theta), blended by the weighted
// joint transforms, then offset by trans.
SkinnedMesh skin(const ParametricBody& body, const BodyParams& params);

// Generator metadata: which bone each vertex belongs to, with its axis.
struct ToyBodyBuildInfo {
    struct VertexBone {
        int joint = -1;        // distal joint of the owning bone (-1: none)
        Vec3 axis_start = Vec3::Zero();
        Vec3 axis_end = Vec3::Zero();
    };
    std::vector<VertexBone> vertex_bones;  // length V
};

// Deterministic capsule-limb humanoid. Shape direction 0 inflates every
// vertex radially away from its bone axis ("girth"); direction 1 scales
// height about the pelvis. joint_count >= 2, ring_resolution >= 4.
ParametricBody make_toy_body(int joint_count, int ring_resolution, uint64_t seed,
                             ToyBodyBuildInfo* info = nullptr);

// FNV-1a over the serialized body arrays; identifies a binding template.
uint64_t content_hash(const ParametricBody& body);

// JSON container with fields mirroring ParametricBody (documented in README).
void save_body_json(const std::string& path, const ParametricBody& body);
ParametricBody load_body_json(const std::string& path);

void save_params_json(const std::string& path, const BodyParams& params);
BodyParams load_params_json(const std::string& path);

}  // namespace tdg
