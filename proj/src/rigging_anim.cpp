#include "tdg/rigging_anim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace tdg {

namespace {

constexpr int kLinearScanLimit = 50000;

struct Neighbor {
    double d2;
    int index;
    bool operator<(const Neighbor& o) const {
        return d2 != o.d2 ? d2 < o.d2 : index < o.index;
    }
};

void knn_linear(const Points& body_verts, const Vec3& q, int k, std::vector<Neighbor>& out) {
    out.clear();
    for (int v = 0; v < body_verts.rows(); ++v) {
        double d2 = (Vec3(body_verts.row(v).transpose()) - q).squaredNorm();
        out.push_back({d2, v});
    }
    std::partial_sort(out.begin(), out.begin() + k, out.end());
    out.resize(k);
}

// Uniform grid hash for large bodies; expands the cell ring until the kth
// distance is safely inside the searched radius.
struct GridHash {
    double cell = 1.0;
    Vec3 origin = Vec3::Zero();
    std::unordered_map<int64_t, std::vector<int>> cells;
    const Points* verts = nullptr;

    static int64_t key(int ix, int iy, int iz) {
        return (static_cast<int64_t>(ix) & 0x1fffff) |
               ((static_cast<int64_t>(iy) & 0x1fffff) << 21) |
               ((static_cast<int64_t>(iz) & 0x1fffff) << 42);
    }

    void build(const Points& v) {
        verts = &v;
        Vec3 lo = v.colwise().minCoeff().transpose();
        Vec3 hi = v.colwise().maxCoeff().transpose();
        origin = lo;
        double vol = std::max((hi - lo).prod(), 1e-9);
        cell = std::max(std::cbrt(vol / v.rows()) * 2.0, 1e-6);
        for (int i = 0; i < v.rows(); ++i) {
            Vec3 p = v.row(i).transpose();
            Eigen::Vector3i c = ((p - origin) / cell).array().floor().cast<int>();
            cells[key(c.x(), c.y(), c.z())].push_back(i);
        }
    }

    void query(const Vec3& q, int k, std::vector<Neighbor>& out) const {
        Eigen::Vector3i c0 = ((q - origin) / cell).array().floor().cast<int>();
        out.clear();
        for (int ring = 0;; ++ring) {
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring)
                            continue;  // shell only
                        auto it = cells.find(key(c0.x() + dx, c0.y() + dy, c0.z() + dz));
                        if (it == cells.end()) continue;
                        for (int v : it->second)
                            out.push_back(
                                {(Vec3(verts->row(v).transpose()) - q).squaredNorm(), v});
                    }
            if (static_cast<int>(out.size()) >= k) {
                std::sort(out.begin(), out.end());
                double kth = out[k - 1].d2;
                double safe = ring * cell;  // closest possible point in the next shell
                if (kth <= safe * safe || ring > 1024) {
                    out.resize(k);
                    return;
                }
            }
            if (ring > 2048) throw std::runtime_error("bind_knn: grid query failed to converge");
        }
    }
};

}  // namespace

SkinningBinding bind_knn(const Points& clothed_vertices, const ParametricBody& body,
                         const BodyParams& canonical, int k) {
    if (k < 1) throw std::invalid_argument("bind_knn: K must be >= 1");
    if (body.vertex_count() < k)
        throw std::invalid_argument("bind_knn: body has fewer vertices than K");
    canonical.validate(body);

    Points body_posed = skin(body, canonical).vertices;
    const int n = static_cast<int>(clothed_vertices.rows());
    const int J = body.joint_count();

    SkinningBinding binding;
    binding.control_indices.resize(n, k);
    binding.control_weights.resize(n, k);
    binding.joint_weights = Eigen::MatrixXd::Zero(n, J);
    binding.canonical = canonical;
    binding.body_hash = content_hash(body);

    GridHash grid;
    const bool use_grid = body.vertex_count() > kLinearScanLimit;
    if (use_grid) grid.build(body_posed);

    std::vector<Neighbor> nn;
    for (int i = 0; i < n; ++i) {
        Vec3 q = clothed_vertices.row(i).transpose();
        if (use_grid)
            grid.query(q, k, nn);
        else
            knn_linear(body_posed, q, k, nn);

        // w_hat = exp(-d^2), normalized; shift by the smallest d^2 so the
        // largest exponent is exactly zero (same normalized weights).
        double d2min = nn[0].d2;
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(-(nn[j].d2 - d2min));
        for (int j = 0; j < k; ++j) {
            double w = std::exp(-(nn[j].d2 - d2min)) / sum;
            binding.control_indices(i, j) = nn[j].index;
            binding.control_weights(i, j) = w;
            binding.joint_weights.row(i) += w * body.blend_weights.row(nn[j].index);
        }
    }
    return binding;
}

BodyParams PoseSequence::params_at(int frame, double cam_scale) const {
    BodyParams p;
    p.beta = beta;
    p.theta = frames.at(frame).theta;
    p.trans = frames.at(frame).trans;
    p.cam_scale = cam_scale;
    return p;
}

void PoseSequence::validate(const ParametricBody& body) const {
    if (beta.size() != body.shape_count())
        throw std::invalid_argument("pose sequence: beta length mismatch");
    for (const FramePose& f : frames) {
        if (f.theta.rows() != body.joint_count() || f.theta.cols() != 3)
            throw std::invalid_argument("pose sequence: theta must be J x 3 in every frame");
        if (!f.theta.allFinite() || !f.trans.allFinite())
            throw std::invalid_argument("pose sequence: non-finite frame");
    }
}

TriMesh animate(const ClothedMesh& clothed, const SkinningBinding& binding,
                const ParametricBody& body, const BodyParams& frame) {
    if (binding.body_hash != content_hash(body))
        throw std::invalid_argument("animate: binding was built against a different body");
    if (binding.joint_weights.cols() != body.joint_count())
        throw std::invalid_argument("animate: joint count mismatch");
    if (binding.count() != clothed.vertex_count())
        throw std::invalid_argument("animate: binding size does not match mesh");
    frame.validate(body);

    std::vector<Mat4> canon = skinning_transforms(body, binding.canonical);
    std::vector<Mat4> posed = skinning_transforms(body, frame);
    const int J = body.joint_count();

    TriMesh out;
    out.faces = clothed.faces;
    out.colors = clothed.colors;
    out.vertices.resize(clothed.vertex_count(), 3);
    for (int v = 0; v < clothed.vertex_count(); ++v) {
        Mat4 a_canon = Mat4::Zero();
        Mat4 a_frame = Mat4::Zero();
        for (int j = 0; j < J; ++j) {
            double w = binding.joint_weights(v, j);
            if (w == 0.0) continue;
            a_canon += w * canon[j];
            a_frame += w * posed[j];
        }
        Vec3 p = clothed.vertices.row(v).transpose();
        Eigen::Vector4d local =
            a_canon.inverse() * Eigen::Vector4d(p.x() - binding.canonical.trans.x(),
                                                p.y() - binding.canonical.trans.y(),
                                                p.z() - binding.canonical.trans.z(), 1.0);
        Eigen::Vector4d moved = a_frame * local;
        out.vertices.row(v) = (moved.head<3>() + frame.trans).transpose();
    }
    return out;
}

std::vector<RenderTargets> animate_and_render(const ClothedMesh& clothed,
                                              const SkinningBinding& binding,
                                              const ParametricBody& body,
                                              const PoseSequence& seq,
                                              const WeakPerspectiveCam& cam,
                                              const RenderWant& want, int threads) {
    seq.validate(body);
    const int n = seq.frame_count();
    std::vector<RenderTargets> out(n);
    auto work = [&](int f) {
        TriMesh posed = animate(clothed, binding, body, seq.params_at(f, cam.scale));
        out[f] = rasterize(posed, cam, want);
    };
    if (threads <= 1 || n <= 1) {
        for (int f = 0; f < n; ++f) work(f);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        int workers = std::min(threads, n);
        for (int t = 0; t < workers; ++t)
            pool.emplace_back([&] {
                for (int f = next.fetch_add(1); f < n; f = next.fetch_add(1)) work(f);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kBindingMagic[8] = {'T', 'D', 'G', 'B', 'I', 'N', 'D', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("binding: truncated file");
    return v;
}

}  // namespace

void save_binding(const std::string& path, const SkinningBinding& binding) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_binding: cannot open " + path);
    out.write(kBindingMagic, sizeof(kBindingMagic));
    const uint32_t n = binding.count(), k = binding.k();
    const uint32_t j = static_cast<uint32_t>(binding.joint_weights.cols());
    const uint32_t s = static_cast<uint32_t>(binding.canonical.beta.size());
    put(out, n);
    put(out, k);
    put(out, j);
    put(out, s);
    put(out, binding.body_hash);
    out.write(reinterpret_cast<const char*>(binding.canonical.beta.data()), sizeof(double) * s);
    out.write(reinterpret_cast<const char*>(binding.canonical.theta.data()),
              sizeof(double) * binding.canonical.theta.size());
    out.write(reinterpret_cast<const char*>(binding.canonical.trans.data()), sizeof(double) * 3);
    put(out, binding.canonical.cam_scale);
    out.write(reinterpret_cast<const char*>(binding.control_indices.data()),
              sizeof(int) * static_cast<std::streamsize>(n) * k);
    out.write(reinterpret_cast<const char*>(binding.control_weights.data()),
              sizeof(double) * static_cast<std::streamsize>(n) * k);
    out.write(reinterpret_cast<const char*>(binding.joint_weights.data()),
              sizeof(double) * static_cast<std::streamsize>(n) * j);
    if (!out) throw std::runtime_error("save_binding: write failed for " + path);
}

SkinningBinding load_binding(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_binding: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kBindingMagic, 8) != 0)
        throw std::runtime_error("load_binding: bad magic in " + path);
    const uint32_t n = get<uint32_t>(in), k = get<uint32_t>(in);
    const uint32_t j = get<uint32_t>(in), s = get<uint32_t>(in);
    SkinningBinding binding;
    binding.body_hash = get<uint64_t>(in);
    binding.canonical.beta.resize(s);
    in.read(reinterpret_cast<char*>(binding.canonical.beta.data()), sizeof(double) * s);
    binding.canonical.theta.resize(j, 3);
    in.read(reinterpret_cast<char*>(binding.canonical.theta.data()),
            sizeof(double) * binding.canonical.theta.size());
    in.read(reinterpret_cast<char*>(binding.canonical.trans.data()), sizeof(double) * 3);
    binding.canonical.cam_scale = get<double>(in);
    binding.control_indices.resize(n, k);
    in.read(reinterpret_cast<char*>(binding.control_indices.data()),
            sizeof(int) * static_cast<std::streamsize>(n) * k);
    binding.control_weights.resize(n, k);
    in.read(reinterpret_cast<char*>(binding.control_weights.data()),
            sizeof(double) * static_cast<std::streamsize>(n) * k);
    binding.joint_weights.resize(n, j);
    in.read(reinterpret_cast<char*>(binding.joint_weights.data()),
            sizeof(double) * static_cast<std::streamsize>(n) * j);
    if (!in) throw std::runtime_error("load_binding: truncated file " + path);
    return binding;
}

void save_pose_sequence_json(const std::string& path, const PoseSequence& seq) {
    nlohmann::json j;
    j["beta"] = std::vector<double>(seq.beta.data(), seq.beta.data() + seq.beta.size());
    j["frame_rate"] = seq.frame_rate;
    nlohmann::json frames = nlohmann::json::array();
    for (const FramePose& f : seq.frames) {
        nlohmann::json jf;
        nlohmann::json theta = nlohmann::json::array();
        for (int r = 0; r < f.theta.rows(); ++r)
            theta.push_back({f.theta(r, 0), f.theta(r, 1), f.theta(r, 2)});
        jf["theta"] = std::move(theta);
        jf["trans"] = {f.trans.x(), f.trans.y(), f.trans.z()};
        frames.push_back(std::move(jf));
    }
    j["frames"] = std::move(frames);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_pose_sequence_json: cannot open " + path);
    out << j.dump(1) << '\n';
}

PoseSequence load_pose_sequence_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_pose_sequence_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    PoseSequence seq;
    std::vector<double> beta = j.at("beta").get<std::vector<double>>();
    seq.beta = Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<int>(beta.size()));
    seq.frame_rate = j.at("frame_rate").get<double>();
    for (const auto& jf : j.at("frames")) {
        FramePose f;
        const auto& theta = jf.at("theta");
        f.theta.resize(static_cast<int>(theta.size()), 3);
        for (int r = 0; r < f.theta.rows(); ++r)
            for (int c = 0; c < 3; ++c) f.theta(r, c) = theta[r][c].get<double>();
        const auto& t = jf.at("trans");
        f.trans = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

}  // namespace tdg
