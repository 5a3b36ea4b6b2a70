#include "tdg/body_model.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace tdg {

namespace {

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) { return m.allFinite(); }

}  // namespace

void ParametricBody::validate() const {
    const int V = vertex_count();
    const int J = joint_count();
    if (V < 3) throw std::invalid_argument("body: needs at least 3 vertices");
    if (J < 1) throw std::invalid_argument("body: needs at least 1 joint");
    if (!all_finite(template_vertices)) throw std::invalid_argument("body: non-finite template");
    for (const auto& d : shape_dirs)
        if (d.rows() != V || !all_finite(d))
            throw std::invalid_argument("body: bad shape direction");
    if (!pose_dirs.empty() && static_cast<int>(pose_dirs.size()) != 9 * (J - 1))
        throw std::invalid_argument("body: pose_dirs must be empty or have 9*(J-1) entries");
    for (const auto& d : pose_dirs)
        if (d.rows() != V || !all_finite(d))
            throw std::invalid_argument("body: bad pose direction");
    if (joint_regressor.rows() != J || joint_regressor.cols() != V)
        throw std::invalid_argument("body: joint_regressor must be J x V");
    if (blend_weights.rows() != V || blend_weights.cols() != J)
        throw std::invalid_argument("body: blend_weights must be V x J");
    for (int j = 0; j < J; ++j) {
        if (joint_regressor.row(j).minCoeff() < 0)
            throw std::invalid_argument("body: negative joint_regressor entry");
        if (std::abs(joint_regressor.row(j).sum() - 1.0) > 1e-6)
            throw std::invalid_argument("body: joint_regressor row does not sum to 1");
    }
    for (int v = 0; v < V; ++v) {
        if (blend_weights.row(v).minCoeff() < 0)
            throw std::invalid_argument("body: negative blend weight");
        if (std::abs(blend_weights.row(v).sum() - 1.0) > 1e-6)
            throw std::invalid_argument("body: blend weight row does not sum to 1");
    }
    if (parent[0] != -1) throw std::invalid_argument("body: parent[0] must be -1");
    for (int j = 1; j < J; ++j)
        if (parent[j] < 0 || parent[j] >= j)
            throw std::invalid_argument("body: parent[j] must precede j (single-rooted tree)");
    for (int f = 0; f < faces.rows(); ++f)
        for (int k = 0; k < 3; ++k)
            if (faces(f, k) < 0 || faces(f, k) >= V)
                throw std::invalid_argument("body: face index out of range");
    if (static_cast<int>(joint_names.size()) != J)
        throw std::invalid_argument("body: joint_names length mismatch");
}

BodyParams BodyParams::rest(const ParametricBody& body) {
    BodyParams p;
    p.beta = Eigen::VectorXd::Zero(body.shape_count());
    p.theta = Eigen::MatrixXd::Zero(body.joint_count(), 3);
    return p;
}

void BodyParams::validate(const ParametricBody& body) const {
    if (beta.size() != body.shape_count())
        throw std::invalid_argument("params: beta length must equal shape count");
    if (theta.rows() != body.joint_count() || theta.cols() != 3)
        throw std::invalid_argument("params: theta must be J x 3");
    if (!beta.allFinite() || !theta.allFinite() || !trans.allFinite() ||
        !std::isfinite(cam_scale))
        throw std::invalid_argument("params: non-finite value");
    if (cam_scale <= 0) throw std::invalid_argument("params: cam_scale must be positive");
}

TriMesh SkinnedMesh::as_tri_mesh() const {
    TriMesh m;
    m.vertices = vertices;
    m.faces = faces;
    return m;
}

Mat3 rodrigues(const Vec3& axis_angle) {
    double angle = axis_angle.norm();
    if (angle < 1e-12) return Mat3::Identity();
    Vec3 axis = axis_angle / angle;
    Mat3 k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

Points shaped_template(const ParametricBody& body, const Eigen::VectorXd& beta) {
    if (beta.size() != body.shape_count())
        throw std::invalid_argument("shaped_template: beta length mismatch");
    Points out = body.template_vertices;
    for (int s = 0; s < body.shape_count(); ++s)
        if (beta[s] != 0.0) out += beta[s] * body.shape_dirs[s];
    return out;
}

Points regress_joints(const ParametricBody& body, const Eigen::VectorXd& beta) {
    return body.joint_regressor * shaped_template(body, beta);
}

std::vector<Mat4> skinning_transforms(const ParametricBody& body, const BodyParams& params) {
    params.validate(body);
    const int J = body.joint_count();
    Points joints = regress_joints(body, params.beta);
    std::vector<Mat4> global(J);
    for (int j = 0; j < J; ++j) {
        Mat4 local = Mat4::Identity();
        local.topLeftCorner<3, 3>() = rodrigues(params.theta.row(j).transpose());
        Vec3 offset = (j == 0) ? Vec3(joints.row(0).transpose())
                               : Vec3((joints.row(j) - joints.row(body.parent[j])).transpose());
        local.topRightCorner<3, 1>() = offset;
        global[j] = (j == 0) ? local : Mat4(global[body.parent[j]] * local);
    }
    // Compose with the inverse rest-joint translation so rest pose maps to
    // itself: A'_j = G_j * translate(-J_j).
    for (int j = 0; j < J; ++j) {
        Vec3 rest_joint = joints.row(j).transpose();
        global[j].topRightCorner<3, 1>() -= global[j].topLeftCorner<3, 3>() * rest_joint;
    }
    return global;
}

SkinnedMesh skin(const ParametricBody& body, const BodyParams& params) {
    params.validate(body);
    const int V = body.vertex_count();
    const int J = body.joint_count();

    Points rest = shaped_template(body, params.beta);
    if (!body.pose_dirs.empty()) {
        // Pose feature: flattened (R_j - I) over non-root joints.
        int p = 0;
        for (int j = 1; j < J; ++j) {
            Mat3 r = rodrigues(params.theta.row(j).transpose()) - Mat3::Identity();
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b, ++p)
                    if (r(a, b) != 0.0) rest += r(a, b) * body.pose_dirs[p];
        }
    }

    std::vector<Mat4> transforms = skinning_transforms(body, params);

    SkinnedMesh out;
    out.faces = body.faces;
    out.rest_vertices = rest;
    out.vertices.resize(V, 3);
    for (int v = 0; v < V; ++v) {
        Eigen::Vector4d hv(rest(v, 0), rest(v, 1), rest(v, 2), 1.0);
        Eigen::Vector4d acc = Eigen::Vector4d::Zero();
        for (int j = 0; j < J; ++j) {
            double w = body.blend_weights(v, j);
            if (w != 0.0) acc += w * (transforms[j] * hv);
        }
        out.vertices.row(v) = acc.head<3>().transpose() + params.trans.transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toy body generator
// ---------------------------------------------------------------------------

namespace {

struct JointSpec {
    const char* name;
    int parent;
    double dx, dy, dz;   // offset from parent
    double radius;       // bone tube radius (bone from parent to this joint)
};

// 22-entry humanoid table; parents always precede children so any prefix is
// a valid tree.
constexpr std::array<JointSpec, 22> kHumanoid = {{
    {"pelvis", -1, 0.00, 0.00, 0.00, 0.000},
    {"spine1", 0, 0.00, 0.12, 0.00, 0.090},
    {"spine2", 1, 0.00, 0.12, 0.00, 0.095},
    {"chest", 2, 0.00, 0.12, 0.00, 0.100},
    {"neck", 3, 0.00, 0.10, 0.00, 0.045},
    {"head", 4, 0.00, 0.15, 0.00, 0.080},
    {"left_hip", 0, 0.09, -0.06, 0.00, 0.070},
    {"left_knee", 6, 0.00, -0.40, 0.00, 0.060},
    {"left_ankle", 7, 0.00, -0.40, 0.00, 0.045},
    {"left_foot", 8, 0.00, -0.05, 0.10, 0.035},
    {"right_hip", 0, -0.09, -0.06, 0.00, 0.070},
    {"right_knee", 10, 0.00, -0.40, 0.00, 0.060},
    {"right_ankle", 11, 0.00, -0.40, 0.00, 0.045},
    {"right_foot", 12, 0.00, -0.05, 0.10, 0.035},
    {"left_shoulder", 3, 0.16, 0.06, 0.00, 0.050},
    {"left_elbow", 14, 0.26, 0.00, 0.00, 0.042},
    {"left_wrist", 15, 0.24, 0.00, 0.00, 0.036},
    {"left_hand", 16, 0.09, 0.00, 0.00, 0.030},
    {"right_shoulder", 3, -0.16, 0.06, 0.00, 0.050},
    {"right_elbow", 18, -0.26, 0.00, 0.00, 0.042},
    {"right_wrist", 19, -0.24, 0.00, 0.00, 0.036},
    {"right_hand", 20, -0.09, 0.00, 0.00, 0.030},
}};

constexpr int kRingsPerBone = 5;
constexpr double kGirthStep = 0.02;   // meters of radial inflation per unit beta
constexpr double kHeightStep = 0.10;  // relative height scale per unit beta

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Vec3 any_perpendicular(const Vec3& d) {
    Vec3 pick = std::abs(d.x()) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
    Vec3 e = d.cross(pick);
    return e.normalized();
}

}  // namespace

ParametricBody make_toy_body(int joint_count, int ring_resolution, uint64_t seed,
                             ToyBodyBuildInfo* info) {
    if (joint_count < 2) throw std::invalid_argument("make_toy_body: joint_count must be >= 2");
    if (ring_resolution < 4)
        throw std::invalid_argument("make_toy_body: ring_resolution must be >= 4");

    std::mt19937_64 rng(seed);
    const int J = joint_count;
    const int R = ring_resolution;

    // Skeleton: humanoid table prefix, extra joints chain off the last one.
    std::vector<std::string> names(J);
    std::vector<int> parent(J);
    std::vector<double> radius(J, 0.0);
    Points joints(J, 3);
    for (int j = 0; j < J; ++j) {
        Vec3 off;
        if (j < static_cast<int>(kHumanoid.size())) {
            const JointSpec& s = kHumanoid[j];
            names[j] = s.name;
            parent[j] = s.parent;
            off = Vec3(s.dx, s.dy, s.dz);
            radius[j] = s.radius;
        } else {
            names[j] = "extra_" + std::to_string(j);
            parent[j] = j - 1;
            double az = uniform01(rng) * 2.0 * M_PI;
            off = 0.08 * Vec3(std::cos(az), -0.4, std::sin(az)).normalized();
            radius[j] = 0.03;
        }
        if (j == 0) {
            joints.row(0).setZero();
        } else {
            double len_jitter = 0.97 + 0.06 * uniform01(rng);
            joints.row(j) = joints.row(parent[j]) + (len_jitter * off).transpose();
        }
        if (j > 0) radius[j] *= 0.95 + 0.10 * uniform01(rng);
    }

    // One tube per bone (parent -> joint j), kRingsPerBone rings of R
    // vertices plus two axial cap vertices. Blend weights are continuous
    // across joints: a bone's proximal end matches the 50/50 blend its
    // parent bone reaches at the shared joint.
    struct VertexRecord {
        Vec3 pos;
        Vec3 radial;       // unit radial at rest; zero for cap vertices
        int bone_joint;    // distal joint of the owning bone
        double w_distal;   // weight on the distal joint
        double w_grand;    // weight on the grandparent joint (proximal blend)
        int ring_joint;    // joint this vertex's ring is centered on, else -1
    };
    std::vector<VertexRecord> verts;
    std::vector<std::array<int, 3>> tris;
    ToyBodyBuildInfo build_info;

    for (int j = 1; j < J; ++j) {
        const int p = parent[j];
        const int q = p == 0 ? -1 : parent[p];  // grandparent joint
        const Vec3 a = joints.row(p).transpose();
        const Vec3 b = joints.row(j).transpose();
        Vec3 axis = b - a;
        double len = axis.norm();
        if (len < 1e-9) throw std::invalid_argument("make_toy_body: zero-length bone");
        Vec3 d = axis / len;
        Vec3 e1 = any_perpendicular(d);
        Vec3 e2 = d.cross(e1);
        const double r = radius[j];

        std::vector<std::vector<int>> rings(kRingsPerBone);
        for (int ri = 0; ri < kRingsPerBone; ++ri) {
            double t = static_cast<double>(ri) / (kRingsPerBone - 1);
            Vec3 center = a + t * axis;
            double w_distal = t <= 0.6 ? 0.0 : 0.5 * (t - 0.6) / 0.4;
            double w_grand = (q >= 0 && t < 0.4) ? 0.5 * (1.0 - t / 0.4) : 0.0;
            int ring_joint = ri == 0 ? p : (ri == kRingsPerBone - 1 ? j : -1);
            for (int k = 0; k < R; ++k) {
                double phi = 2.0 * M_PI * k / R;
                Vec3 radial = std::cos(phi) * e1 + std::sin(phi) * e2;
                rings[ri].push_back(static_cast<int>(verts.size()));
                verts.push_back({center + r * radial, radial, j, w_distal, w_grand, ring_joint});
            }
        }
        int cap_a = static_cast<int>(verts.size());
        verts.push_back({a - 0.4 * r * d, Vec3::Zero(), j, 0.0, q >= 0 ? 0.5 : 0.0, -1});
        int cap_b = static_cast<int>(verts.size());
        verts.push_back({b + 0.4 * r * d, Vec3::Zero(), j, 0.5, 0.0, -1});

        for (int ri = 0; ri + 1 < kRingsPerBone; ++ri) {
            for (int k = 0; k < R; ++k) {
                int k1 = (k + 1) % R;
                int a0 = rings[ri][k], a1 = rings[ri][k1];
                int b0 = rings[ri + 1][k], b1 = rings[ri + 1][k1];
                tris.push_back({a0, a1, b1});
                tris.push_back({a0, b1, b0});
            }
        }
        for (int k = 0; k < R; ++k) {
            int k1 = (k + 1) % R;
            tris.push_back({rings[0][k1], rings[0][k], cap_a});
            tris.push_back({rings[kRingsPerBone - 1][k], rings[kRingsPerBone - 1][k1], cap_b});
        }

        if (info) {
            for (size_t v = verts.size() - (kRingsPerBone * R + 2); v < verts.size(); ++v)
                build_info.vertex_bones.push_back({j, a, b});
        }
    }

    const int V = static_cast<int>(verts.size());
    ParametricBody body;
    body.joint_names = names;
    body.parent = parent;
    body.template_vertices.resize(V, 3);
    body.blend_weights = Eigen::MatrixXd::Zero(V, J);
    for (int v = 0; v < V; ++v) {
        body.template_vertices.row(v) = verts[v].pos.transpose();
        int j = verts[v].bone_joint;
        int p = parent[j];
        body.blend_weights(v, j) += verts[v].w_distal;
        if (verts[v].w_grand > 0.0) body.blend_weights(v, parent[p]) += verts[v].w_grand;
        body.blend_weights(v, p) += 1.0 - verts[v].w_distal - verts[v].w_grand;
    }

    body.faces.resize(static_cast<int>(tris.size()), 3);
    for (size_t f = 0; f < tris.size(); ++f)
        body.faces.row(static_cast<int>(f)) << tris[f][0], tris[f][1], tris[f][2];

    // Joint regressor: equal weight over the ring vertices centered on each
    // joint; ring averages land exactly on the joint.
    body.joint_regressor = Eigen::MatrixXd::Zero(J, V);
    std::vector<int> ring_counts(J, 0);
    for (int v = 0; v < V; ++v)
        if (verts[v].ring_joint >= 0) ring_counts[verts[v].ring_joint]++;
    for (int v = 0; v < V; ++v)
        if (verts[v].ring_joint >= 0)
            body.joint_regressor(verts[v].ring_joint, v) = 1.0 / ring_counts[verts[v].ring_joint];

    // Shape 0: global girth. Shape 1: global height about the pelvis.
    Points girth = Points::Zero(V, 3);
    Points height = Points::Zero(V, 3);
    for (int v = 0; v < V; ++v) {
        girth.row(v) = (kGirthStep * verts[v].radial).transpose();
        height(v, 1) = kHeightStep * verts[v].pos.y();
    }
    body.shape_dirs = {girth, height};

    body.validate();
    if (info) *info = std::move(build_info);
    return body;
}

// ---------------------------------------------------------------------------
// Hashing and JSON serialization
// ---------------------------------------------------------------------------

namespace {

void fnv_bytes(uint64_t& h, const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
}

void fnv_matrix(uint64_t& h, const Eigen::Ref<const Eigen::MatrixXd>& m) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            double v = m(r, c);
            fnv_bytes(h, &v, sizeof(v));
        }
}

using nlohmann::json;

json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    int rows = static_cast<int>(j.size());
    int cols = rows ? static_cast<int>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(j[r].size()) != cols)
            throw std::runtime_error("body json: ragged matrix");
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

}  // namespace

uint64_t content_hash(const ParametricBody& body) {
    uint64_t h = 1469598103934665603ULL;
    int v = body.vertex_count(), j = body.joint_count(), s = body.shape_count();
    fnv_bytes(h, &v, sizeof(v));
    fnv_bytes(h, &j, sizeof(j));
    fnv_bytes(h, &s, sizeof(s));
    fnv_matrix(h, body.template_vertices);
    for (const auto& d : body.shape_dirs) fnv_matrix(h, d);
    for (const auto& d : body.pose_dirs) fnv_matrix(h, d);
    fnv_matrix(h, body.joint_regressor);
    fnv_matrix(h, body.blend_weights);
    for (int f = 0; f < body.faces.rows(); ++f)
        for (int k = 0; k < 3; ++k) {
            int idx = body.faces(f, k);
            fnv_bytes(h, &idx, sizeof(idx));
        }
    for (int p : body.parent) fnv_bytes(h, &p, sizeof(p));
    return h;
}

void save_body_json(const std::string& path, const ParametricBody& body) {
    json j;
    j["template_vertices"] = matrix_to_json(body.template_vertices);
    j["faces"] = matrix_to_json(body.faces.cast<double>());
    json sd = json::array();
    for (const auto& d : body.shape_dirs) sd.push_back(matrix_to_json(d));
    j["shape_dirs"] = std::move(sd);
    json pd = json::array();
    for (const auto& d : body.pose_dirs) pd.push_back(matrix_to_json(d));
    j["pose_dirs"] = std::move(pd);
    j["joint_regressor"] = matrix_to_json(body.joint_regressor);
    j["parent"] = body.parent;
    j["blend_weights"] = matrix_to_json(body.blend_weights);
    j["joint_names"] = body.joint_names;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_body_json: cannot open " + path);
    out << j.dump(1) << '\n';
}

ParametricBody load_body_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_body_json: cannot open " + path);
    json j;
    in >> j;
    ParametricBody body;
    body.template_vertices = matrix_from_json(j.at("template_vertices"));
    Eigen::MatrixXd fd = matrix_from_json(j.at("faces"));
    body.faces.resize(fd.rows(), 3);
    if (fd.rows() > 0) body.faces = fd.cast<int>();
    for (const auto& d : j.at("shape_dirs")) body.shape_dirs.push_back(matrix_from_json(d));
    for (const auto& d : j.at("pose_dirs")) body.pose_dirs.push_back(matrix_from_json(d));
    body.joint_regressor = matrix_from_json(j.at("joint_regressor"));
    body.parent = j.at("parent").get<std::vector<int>>();
    body.blend_weights = matrix_from_json(j.at("blend_weights"));
    body.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    body.validate();
    return body;
}

void save_params_json(const std::string& path, const BodyParams& params) {
    json j;
    j["beta"] = std::vector<double>(params.beta.data(), params.beta.data() + params.beta.size());
    j["theta"] = matrix_to_json(params.theta);
    j["trans"] = {params.trans.x(), params.trans.y(), params.trans.z()};
    j["cam_scale"] = params.cam_scale;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_params_json: cannot open " + path);
    out << j.dump(1) << '\n';
}

BodyParams load_params_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_params_json: cannot open " + path);
    json j;
    in >> j;
    BodyParams p;
    std::vector<double> beta = j.at("beta").get<std::vector<double>>();
    p.beta = Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<int>(beta.size()));
    p.theta = matrix_from_json(j.at("theta"));
    auto t = j.at("trans");
    p.trans = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    p.cam_scale = j.at("cam_scale").get<double>();
    return p;
}

}  // namespace tdg
