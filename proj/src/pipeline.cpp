#include "tdg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "json.hpp"
#include "tdg/io/pfm.hpp"
#include "tdg/io/png_io.hpp"
#include "tdg/io/toml.hpp"
#include "tdg/conditioning.hpp"

namespace fs = std::filesystem;

namespace tdg {

namespace {

std::string frame_name(const char* stem, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, index, ext);
    return buf;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// LBS a vertex set that borrows the body's blend weights row-for-row.
Points pose_with_weights(const Points& rest, const Eigen::MatrixXd& weights,
                         const std::vector<Mat4>& transforms, const Vec3& trans) {
    Points out(rest.rows(), 3);
    const int J = static_cast<int>(weights.cols());
    for (int v = 0; v < rest.rows(); ++v) {
        Eigen::Vector4d hv(rest(v, 0), rest(v, 1), rest(v, 2), 1.0);
        Eigen::Vector4d acc = Eigen::Vector4d::Zero();
        for (int j = 0; j < J; ++j) {
            double w = weights(v, j);
            if (w != 0.0) acc += w * (transforms[j] * hv);
        }
        out.row(v) = (acc.head<3>() + trans).transpose();
    }
    return out;
}

Points posed_joints(const ParametricBody& body, const BodyParams& params) {
    Points rest_joints = regress_joints(body, params.beta);
    std::vector<Mat4> transforms = skinning_transforms(body, params);
    Points out(rest_joints.rows(), 3);
    for (int j = 0; j < rest_joints.rows(); ++j) {
        Eigen::Vector4d hv(rest_joints(j, 0), rest_joints(j, 1), rest_joints(j, 2), 1.0);
        out.row(j) = ((transforms[j] * hv).head<3>() + params.trans).transpose();
    }
    return out;
}

ImageF normal_to_rgb(const RenderTargets& rt) {
    ImageF rgb(rt.normal.h, rt.normal.w, 3, 0.0f);
    for (int y = 0; y < rgb.h; ++y)
        for (int x = 0; x < rgb.w; ++x)
            if (rt.silhouette.at(y, x))
                for (int c = 0; c < 3; ++c)
                    rgb.at(y, x, c) = 0.5f * (rt.normal.at(y, x, c) + 1.0f);
    return rgb;
}

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    void log(const char* stage) {
        auto now = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(now - start).count();
        std::cerr << "[pipeline] " << stage << ": " << ms << " ms\n";
        start = now;
    }
};

}  // namespace

void PipelineConfig::validate() const {
    if (input_dir.empty() || out_dir.empty())
        throw std::invalid_argument("pipeline: input_dir and out_dir are required");
    if (cycles < 1) throw std::invalid_argument("pipeline: cycles must be >= 1");
    if (lambda < 0 || scale_threshold < 0)
        throw std::invalid_argument("pipeline: lambda and threshold must be >= 0");
    if (mu < 0) throw std::invalid_argument("pipeline: mu must be >= 0");
    if (knn_k < 1) throw std::invalid_argument("pipeline: knn_k must be >= 1");
    if (mask_margin < 0 || mask_window < 1)
        throw std::invalid_argument("pipeline: bad mask margin/window");
    if (threads < 1) throw std::invalid_argument("pipeline: threads must be >= 1");
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("hash: cannot open " + path);
    uint64_t h = 1469598103934665603ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void save_camera_json(const std::string& path, const WeakPerspectiveCam& cam) {
    nlohmann::json j;
    j["scale"] = cam.scale;
    j["offset"] = {cam.principal_offset.x(), cam.principal_offset.y()};
    j["height"] = cam.height;
    j["width"] = cam.width;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_camera_json: cannot open " + path);
    out << j.dump(1) << '\n';
}

WeakPerspectiveCam load_camera_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_camera_json: cannot open " + path);
    nlohmann::json j;
    in >> j;
    WeakPerspectiveCam cam;
    cam.scale = j.at("scale").get<double>();
    cam.principal_offset =
        Eigen::Vector2d(j.at("offset")[0].get<double>(), j.at("offset")[1].get<double>());
    cam.height = j.at("height").get<int>();
    cam.width = j.at("width").get<int>();
    cam.validate();
    return cam;
}

// ---------------------------------------------------------------------------
// Fixture
// ---------------------------------------------------------------------------

FixtureInfo make_fixture(const std::string& dir, uint64_t seed, int frames, int resolution) {
    if (frames < 1) throw std::invalid_argument("make_fixture: frames must be >= 1");
    if (resolution < 32) throw std::invalid_argument("make_fixture: resolution too small");
    std::mt19937_64 rng(seed);

    fs::create_directories(dir);
    for (const char* sub : {"frames", "garment", "keep", "keyframe", "gt"})
        fs::create_directories(fs::path(dir) / sub);

    ToyBodyBuildInfo build_info;
    ParametricBody body = make_toy_body(22, 12, seed, &build_info);
    save_body_json((fs::path(dir) / "body.json").string(), body);

    const int R = resolution;
    WeakPerspectiveCam cam = WeakPerspectiveCam::centered(R, R, R / 2.4);
    save_camera_json((fs::path(dir) / "camera.json").string(), cam);

    // scripted pose sequence: gentle seeded sinusoidal joint swings
    PoseSequence seq;
    seq.beta = Eigen::VectorXd::Zero(body.shape_count());
    for (int s = 0; s < body.shape_count(); ++s) seq.beta[s] = uniform(rng, -0.6, 0.6);
    seq.frame_rate = 8.0;
    const int J = body.joint_count();
    Eigen::MatrixXd amp(J, 3);
    Eigen::MatrixXd phase(J, 3);
    for (int j = 0; j < J; ++j)
        for (int k = 0; k < 3; ++k) {
            double swing = (j == 0) ? 0.06 : (j <= 5 ? 0.035 : 0.12);
            amp(j, k) = uniform(rng, 0.3, 1.0) * swing;
            phase(j, k) = uniform(rng, 0.0, 2.0 * M_PI);
        }
    for (int f = 0; f < frames; ++f) {
        FramePose fp;
        fp.theta.resize(J, 3);
        double t = frames > 1 ? static_cast<double>(f) / frames : 0.0;
        for (int j = 0; j < J; ++j)
            for (int k = 0; k < 3; ++k)
                fp.theta(j, k) = amp(j, k) * std::sin(2.0 * M_PI * t + phase(j, k));
        fp.trans = Vec3(0.04 * std::sin(2.0 * M_PI * t), 0.0, 0.0);
        seq.frames.push_back(std::move(fp));
    }
    save_pose_sequence_json((fs::path(dir) / "pose_seq.json").string(), seq);

    // ground-truth clothed shell: shaped template inflated 3% along normals
    // (relative to the torso half-height, a garment-like offset)
    Points shaped = shaped_template(body, seq.beta);
    Points normals = vertex_normals(shaped, body.faces);
    double height = shaped.col(1).maxCoeff() - shaped.col(1).minCoeff();
    Points shell_rest = shaped + 0.03 * height * normals;
    Points shell_colors(shell_rest.rows(), 3);
    for (int v = 0; v < shell_rest.rows(); ++v) {
        int parity = static_cast<int>(std::floor(shell_rest(v, 0) / 0.08) +
                                      std::floor(shell_rest(v, 1) / 0.08) +
                                      std::floor(shell_rest(v, 2) / 0.08)) & 1;
        if (parity)
            shell_colors.row(v) << 0.9, 0.1, 0.1;
        else
            shell_colors.row(v) << 0.95, 0.95, 0.95;
    }

    // head-bone submesh for the keep region
    std::vector<int> head_faces;
    for (int f = 0; f < body.faces.rows(); ++f) {
        bool head = true;
        for (int k = 0; k < 3; ++k)
            if (build_info.vertex_bones[body.faces(f, k)].joint != 5) head = false;
        if (head) head_faces.push_back(f);
    }

    // per-frame renders: video frame, garment mask, keep mask, keypoints
    Keypoints2D kps;
    kps.image_h = R;
    kps.image_w = R;
    std::vector<MaskU8> garment_sils;
    for (int f = 0; f < frames; ++f) {
        BodyParams params = seq.params_at(f, cam.scale);
        std::vector<Mat4> transforms = skinning_transforms(body, params);

        TriMesh shell;
        shell.vertices = pose_with_weights(shell_rest, body.blend_weights, transforms, params.trans);
        shell.faces = body.faces;
        shell.colors = shell_colors;
        RenderTargets rt = rasterize(shell, cam, RenderWant{true, true});

        write_rgb_png((fs::path(dir) / "frames" / frame_name("frame", f, "png")).string(),
                      rt.color);
        write_mask_png((fs::path(dir) / "garment" / frame_name("mask", f, "png")).string(),
                       rt.silhouette);
        write_rgb_png((fs::path(dir) / "gt" / frame_name("guidance", f, "png")).string(),
                      rt.color);
        write_mask_png((fs::path(dir) / "gt" / frame_name("sil", f, "png")).string(),
                       rt.silhouette);
        garment_sils.push_back(rt.silhouette);

        // keep mask: the head bone of the underlying body
        TriMesh head;
        head.vertices = pose_with_weights(shaped, body.blend_weights, transforms, params.trans);
        head.faces.resize(static_cast<int>(head_faces.size()), 3);
        for (size_t i = 0; i < head_faces.size(); ++i)
            head.faces.row(static_cast<int>(i)) = body.faces.row(head_faces[i]);
        RenderTargets head_rt = rasterize(head, cam, RenderWant{false, false});
        write_mask_png((fs::path(dir) / "keep" / frame_name("keep", f, "png")).string(),
                       head_rt.silhouette);

        // keypoints from the posed joints
        Points joints = posed_joints(body, params);
        Eigen::Matrix<double, Eigen::Dynamic, 2> px;
        Eigen::VectorXd depth;
        project(cam, joints, px, depth);
        KeypointFrame kf;
        for (int j = 0; j < J; ++j) {
            bool in_img = px(j, 0) >= 0 && px(j, 0) < R && px(j, 1) >= 0 && px(j, 1) < R;
            kf.points[body.joint_names[j]] = {px(j, 0), px(j, 1), in_img ? 1.0 : 0.0};
        }
        kps.frames.push_back(std::move(kf));
    }
    save_keypoints_json((fs::path(dir) / "keypoints.json").string(), kps);

    // keyframe observation maps (what a normal-estimation network would give)
    int keyframe = select_keyframe(kps);
    BodyParams gt = seq.params_at(keyframe, cam.scale);
    save_params_json((fs::path(dir) / "gt_params.json").string(), gt);
    {
        std::vector<Mat4> transforms = skinning_transforms(body, gt);
        TriMesh shell;
        shell.vertices = pose_with_weights(shell_rest, body.blend_weights, transforms, gt.trans);
        shell.faces = body.faces;
        shell.colors = shell_colors;
        RenderTargets front = rasterize(shell, cam.with_view(ViewSide::Front));
        RenderTargets back = rasterize(shell, cam.with_view(ViewSide::Back));
        write_pfm((fs::path(dir) / "keyframe" / "normal_front.pfm").string(), front.normal);
        write_mask_png((fs::path(dir) / "keyframe" / "sil_front.png").string(), front.silhouette);
        write_pfm((fs::path(dir) / "keyframe" / "normal_back.pfm").string(), back.normal);
        write_mask_png((fs::path(dir) / "keyframe" / "sil_back.png").string(), back.silhouette);

        TriMesh shell_export = shell;
        write_obj((fs::path(dir) / "gt" / "shell.obj").string(), shell_export);
    }

    // perturbed initialization for the fit stage
    BodyParams init = gt;
    for (int s = 0; s < init.beta.size(); ++s) init.beta[s] += uniform(rng, -0.5, 0.5);
    init.cam_scale *= uniform(rng, 0.9, 1.1);
    init.trans.x() += uniform(rng, -5.0, 5.0) / cam.scale;
    init.trans.y() += uniform(rng, -5.0, 5.0) / cam.scale;
    save_params_json((fs::path(dir) / "init_params.json").string(), init);

    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["frames"] = frames;
    manifest["resolution"] = resolution;
    manifest["keyframe"] = keyframe;
    manifest["body_hash"] = content_hash(body);
    std::ofstream mout((fs::path(dir) / "fixture.json").string());
    mout << manifest.dump(1) << '\n';

    FixtureInfo info;
    info.keyframe = keyframe;
    info.dir = dir;
    return info;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
auto stage(const char* name, StageTimer& timer, Fn&& fn) {
    try {
        auto result = fn();
        timer.log(name);
        return result;
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
    }
}

}  // namespace

GuidancePack run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    for (const char* sub : {"guidance", "body", "agnostic", "mask", "params"})
        fs::create_directories(fs::path(cfg.out_dir) / sub);
    StageTimer timer;
    const fs::path in(cfg.input_dir), out(cfg.out_dir);

    // inputs
    ParametricBody body = load_body_json((in / "body.json").string());
    WeakPerspectiveCam cam = load_camera_json((in / "camera.json").string());
    PoseSequence seq = load_pose_sequence_json((in / "pose_seq.json").string());
    seq.validate(body);
    Keypoints2D kps = load_keypoints_json((in / "keypoints.json").string());
    BodyParams init = load_params_json((in / "init_params.json").string());
    const int n_frames = seq.frame_count();
    std::vector<MaskU8> garment_masks, keep_masks;
    for (int f = 0; f < n_frames; ++f) {
        garment_masks.push_back(
            read_mask_png((in / "garment" / frame_name("mask", f, "png")).string()));
        fs::path keep = in / "keep" / frame_name("keep", f, "png");
        if (fs::exists(keep)) keep_masks.push_back(read_mask_png(keep.string()));
    }
    if (!keep_masks.empty() && static_cast<int>(keep_masks.size()) != n_frames)
        throw std::runtime_error("stage inputs: keep masks must cover every frame or none");
    timer.log("load_inputs");

    // 1. keyframe selection
    int keyframe = stage("select_keyframe", timer, [&] { return select_keyframe(kps); });

    ClothedMaps observed;
    observed.front_normal = read_pfm((in / "keyframe" / "normal_front.pfm").string());
    observed.front_silhouette = read_mask_png((in / "keyframe" / "sil_front.png").string());
    observed.back_normal = read_pfm((in / "keyframe" / "normal_back.pfm").string());
    observed.back_silhouette = read_mask_png((in / "keyframe" / "sil_back.png").string());

    // 2. SMPL-X style refinement against the keyframe observation
    BodyParams refined = stage("refine_cycles", timer, [&] {
        NormalProvider provider = [&](const BodyRenderState&) { return observed; };
        FitKnobs knobs{cfg.scale_threshold, cfg.lambda};
        RefineCyclesResult r =
            refine_cycles(body, init, cam, provider, knobs, cfg.cycles, cfg.optimizer);
        save_params_json((out / "refined_params.json").string(), r.params);
        std::ofstream trace((out / "fit_trace.csv").string());
        trace << "cycle,total\n";
        for (size_t i = 0; i < r.cycle_losses.size(); ++i)
            trace << i << ',' << r.cycle_losses[i] << '\n';
        return r.params;
    });
    const double s_fit = refined.cam_scale;
    WeakPerspectiveCam cam_fit = cam.with_scale(s_fit);

    // 3. front/back integration on the shared front lattice
    struct Sheets {
        ImageF front, back;
        MaskU8 sil;
        int components;
    };
    Sheets sheets = stage("integrate_normals", timer, [&] {
        TriMesh body_mesh = skin(body, refined).as_tri_mesh();
        RenderTargets body_front = rasterize(body_mesh, cam_fit.with_view(ViewSide::Front));
        RenderTargets body_back = rasterize(body_mesh, cam_fit.with_view(ViewSide::Back));

        // flip back maps onto the front lattice; rotate vectors back to world
        ImageF back_normal = flip_x(*observed.back_normal);
        for (int y = 0; y < back_normal.h; ++y)
            for (int x = 0; x < back_normal.w; ++x) {
                back_normal.at(y, x, 0) = -back_normal.at(y, x, 0);
                back_normal.at(y, x, 2) = -back_normal.at(y, x, 2);
            }
        MaskU8 back_sil = flip_x(*observed.back_silhouette);
        MaskU8 shared(back_sil.h, back_sil.w, 0);
        size_t shared_px = 0;
        for (int y = 0; y < shared.h; ++y)
            for (int x = 0; x < shared.w; ++x) {
                shared.at(y, x) = (observed.front_silhouette.at(y, x) && back_sil.at(y, x)) ? 1 : 0;
                shared_px += shared.at(y, x);
            }
        if (shared_px == 0) throw std::runtime_error("empty shared silhouette");

        // depth priors in pixel-depth units (s * world z)
        ImageF prior_front(shared.h, shared.w, 1, pos_inf());
        ImageF prior_back(shared.h, shared.w, 1, pos_inf());
        ImageF body_back_flipped = flip_x(body_back.depth);
        for (int y = 0; y < shared.h; ++y)
            for (int x = 0; x < shared.w; ++x) {
                float df = body_front.depth.at(y, x);
                if (std::isfinite(df)) prior_front.at(y, x) = static_cast<float>(s_fit * df);
                float db = body_back_flipped.at(y, x);
                if (std::isfinite(db)) prior_back.at(y, x) = static_cast<float>(s_fit * -db);
            }

        IntegrationConfig icfg;
        icfg.prior_weight = cfg.mu;
        IntegrationResult rf =
            integrate_normals(observed.front_normal, shared, &prior_front, icfg);
        IntegrationResult rb = integrate_normals(back_normal, shared, &prior_back, icfg);
        write_pfm((out / "depth_front.pfm").string(), rf.depth);
        write_pfm((out / "depth_back.pfm").string(), rb.depth);
        return Sheets{rf.depth, rb.depth, shared, rf.components};
    });

    // 4-5. meshing in pixel space, then to world coordinates
    ImageF source_image = [&] {
        std::string path = cfg.tryon_image.empty()
                               ? (in / "frames" / frame_name("frame", keyframe, "png")).string()
                               : cfg.tryon_image;
        return read_rgb_png(path);
    }();
    ClothedMesh clothed = stage("mesh_from_depth", timer, [&] {
        ClothedMesh px_mesh = mesh_from_depth(sheets.front, sheets.back, sheets.sil, source_image);
        for (int v = 0; v < px_mesh.vertex_count(); ++v) {
            px_mesh.vertices(v, 0) = (px_mesh.vertices(v, 0) - cam.principal_offset.x()) / s_fit;
            px_mesh.vertices(v, 1) = (px_mesh.vertices(v, 1) - cam.principal_offset.y()) / s_fit;
            px_mesh.vertices(v, 2) = px_mesh.vertices(v, 2) / s_fit;
        }
        return px_mesh;
    });

    InfillStats infill_stats;
    clothed = stage("infill_from_body", timer, [&] {
        SkinnedMesh posed = skin(body, refined);
        TriMesh body_mesh;
        body_mesh.vertices = posed.vertices;
        body_mesh.faces = posed.faces;
        body_mesh.normals = vertex_normals(posed.vertices, posed.faces);
        InfillConfig icfg;
        icfg.stitch_radius = cfg.stitch_radius_px / s_fit;
        ClothedMesh filled = infill_from_body(clothed, body_mesh, cam_fit,
                                              cam_fit.with_view(ViewSide::Back), icfg,
                                              &infill_stats);
        TriMesh exported = filled.as_tri_mesh();
        write_obj((out / "clothed_mesh.obj").string(), exported);
        save_clothed_mesh_sidecar((out / "clothed_mesh.json").string(), filled);
        return filled;
    });

    // 6. binding against the video-estimated body at the keyframe pose
    SkinningBinding binding = stage("bind_knn", timer, [&] {
        BodyParams canonical = seq.params_at(keyframe, s_fit);
        SkinningBinding b = bind_knn(clothed.vertices, body, canonical, cfg.knn_k);
        save_binding((out / "binding.bin").string(), b);
        return b;
    });

    GuidancePack pack;
    pack.keyframe = keyframe;

    // 7. animate and render the textured guidance V
    std::vector<RenderTargets> guidance = stage("animate_and_render", timer, [&] {
        return animate_and_render(clothed, binding, body, seq, cam_fit, RenderWant{false, true},
                                  cfg.threads);
    });
    for (int f = 0; f < n_frames; ++f) {
        std::string rel = (fs::path("guidance") / frame_name("guidance", f, "png")).string();
        write_rgb_png((out / rel).string(), guidance[f].color);
        pack.guidance_frames.push_back(rel);
        std::string sil_rel = (fs::path("guidance") / frame_name("sil", f, "png")).string();
        write_mask_png((out / sil_rel).string(), guidance[f].silhouette);
    }
    timer.log("write_guidance");

    // 8. body geometry renders M
    for (int f = 0; f < n_frames; ++f) {
        BodyParams p = seq.params_at(f, s_fit);
        RenderTargets rt = rasterize(skin(body, p).as_tri_mesh(), cam_fit);
        std::string rel = (fs::path("body") / frame_name("body", f, "png")).string();
        write_rgb_png((out / rel).string(), normal_to_rgb(rt));
        pack.body_frames.push_back(rel);
        std::string prel = (fs::path("params") / frame_name("params", f, "json")).string();
        save_params_json((out / prel).string(), p);
        pack.param_files.push_back(prel);
    }
    timer.log("body_renders");

    // 9. rectangular agnostic masks V_m
    RectMaskResult masks = stage("rect_mask", timer, [&] {
        return rect_mask(garment_masks, keep_masks, RectMaskConfig{cfg.mask_margin, cfg.mask_window});
    });
    for (int f = 0; f < n_frames; ++f) {
        std::string rel = (fs::path("mask") / frame_name("mask", f, "png")).string();
        write_mask_png((out / rel).string(), masks.masks[f]);
        pack.mask_frames.push_back(rel);
    }

    // 10. agnostic frames V_a: source bytes outside the mask, zero inside
    for (int f = 0; f < n_frames; ++f) {
        ImageU8 src = read_rgb8_png((in / "frames" / frame_name("frame", f, "png")).string());
        const MaskU8& m = masks.masks[f];
        if (src.h != m.h || src.w != m.w)
            throw std::runtime_error("stage agnostic: frame/mask size mismatch");
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x)
                if (m.at(y, x))
                    for (int c = 0; c < 3; ++c) src.at(y, x, c) = 0;
        std::string rel = (fs::path("agnostic") / frame_name("agnostic", f, "png")).string();
        write_rgb8_png((out / rel).string(), src);
        pack.agnostic_frames.push_back(rel);
    }
    timer.log("agnostic_frames");

    if (cfg.emit_latents) {
        std::vector<ImageF> v_frames, m_frames, a_frames;
        for (int f = 0; f < n_frames; ++f) {
            v_frames.push_back(read_rgb_png((out / pack.guidance_frames[f]).string()));
            m_frames.push_back(read_rgb_png((out / pack.body_frames[f]).string()));
            a_frames.push_back(read_rgb_png((out / pack.agnostic_frames[f]).string()));
        }
        std::string lat_dir = (out / "latents").string();
        save_tensor_stack(lat_dir, "guidance", mock_encode_video(v_frames));
        save_tensor_stack(lat_dir, "body", mock_encode_video(m_frames));
        save_tensor_stack(lat_dir, "agnostic", mock_encode_video(a_frames));
        Tensor5 mask_lat(1, 1, n_frames, cam.height / 8, cam.width / 8);
        for (int f = 0; f < n_frames; ++f) {
            ImageF mf(cam.height, cam.width, 1);
            for (int y = 0; y < cam.height; ++y)
                for (int x = 0; x < cam.width; ++x)
                    mf.at(y, x) = masks.masks[f].at(y, x) ? 1.0f : 0.0f;
            ImageF small = area_downsample(mf, 8);
            for (int y = 0; y < small.h; ++y)
                for (int x = 0; x < small.w; ++x) mask_lat.at(0, 0, f, y, x) = small.at(y, x);
        }
        save_tensor_stack(lat_dir, "mask", mask_lat);
        timer.log("latents");
    }

    // manifest: config echo, stage diagnostics, file hashes
    nlohmann::json manifest;
    manifest["config"] = {{"input_dir", cfg.input_dir},
                          {"out_dir", cfg.out_dir},
                          {"tryon_image", cfg.tryon_image},
                          {"seed", cfg.seed},
                          {"threads", cfg.threads},
                          {"cycles", cfg.cycles},
                          {"lambda", cfg.lambda},
                          {"scale_threshold", cfg.scale_threshold},
                          {"mu", cfg.mu},
                          {"stitch_radius_px", cfg.stitch_radius_px},
                          {"knn_k", cfg.knn_k},
                          {"mask_margin", cfg.mask_margin},
                          {"mask_window", cfg.mask_window},
                          {"emit_latents", cfg.emit_latents}};
    manifest["keyframe"] = keyframe;
    manifest["refined_scale"] = s_fit;
    manifest["silhouette_components"] = sheets.components;
    manifest["clamped_pixels"] = clothed.clamped_pixels;
    manifest["infill_triangles"] = infill_stats.triangles_added;
    manifest["infill_stitched"] = infill_stats.stitched_vertices;

    std::vector<std::string> files;
    for (auto& entry : fs::recursive_directory_iterator(out))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            files.push_back(fs::relative(entry.path(), out).generic_string());
    std::sort(files.begin(), files.end());
    nlohmann::json hashes = nlohmann::json::object();
    for (const std::string& rel : files) hashes[rel] = file_hash_hex((out / rel).string());
    manifest["files"] = hashes;

    pack.manifest_path = (out / "manifest.json").string();
    std::ofstream mout(pack.manifest_path);
    if (!mout) throw std::runtime_error("pipeline: cannot write manifest");
    mout << manifest.dump(1) << '\n';
    timer.log("manifest");
    return pack;
}

PipelineConfig pipeline_config_from_toml(const std::string& path) {
    TomlTable t = parse_toml_file(path);
    static const std::set<std::string> known = {
        "pipeline.input_dir", "pipeline.out_dir", "pipeline.tryon_image", "pipeline.seed",
        "pipeline.threads", "pipeline.cycles", "pipeline.lambda", "pipeline.scale_threshold",
        "pipeline.mu", "pipeline.stitch_radius_px", "pipeline.knn_k", "pipeline.mask_margin",
        "pipeline.mask_window", "pipeline.emit_latents", "pipeline.max_sweeps",
        "pipeline.max_evals", "pipeline.beta_step", "pipeline.trans_step",
        "pipeline.scale_rel_step"};
    for (const auto& [key, value] : t.values)
        if (!known.count(key)) throw std::runtime_error("config: unknown key " + key);

    PipelineConfig cfg;
    cfg.input_dir = t.get_string("pipeline.input_dir", "");
    cfg.out_dir = t.get_string("pipeline.out_dir", "");
    cfg.tryon_image = t.get_string("pipeline.tryon_image", "");
    cfg.seed = static_cast<uint64_t>(t.get_int("pipeline.seed", 7));
    cfg.threads = static_cast<int>(t.get_int("pipeline.threads", 1));
    cfg.cycles = static_cast<int>(t.get_int("pipeline.cycles", 10));
    cfg.lambda = t.get_double("pipeline.lambda", 1.0);
    cfg.scale_threshold = t.get_double("pipeline.scale_threshold", 0.0);
    cfg.mu = t.get_double("pipeline.mu", 0.05);
    cfg.stitch_radius_px = t.get_double("pipeline.stitch_radius_px", 2.0);
    cfg.knn_k = static_cast<int>(t.get_int("pipeline.knn_k", 4));
    cfg.mask_margin = static_cast<int>(t.get_int("pipeline.mask_margin", 4));
    cfg.mask_window = static_cast<int>(t.get_int("pipeline.mask_window", 5));
    cfg.emit_latents = t.get_bool("pipeline.emit_latents", false);
    cfg.optimizer.max_sweeps = static_cast<int>(t.get_int("pipeline.max_sweeps", 60));
    cfg.optimizer.max_evals = static_cast<int>(t.get_int("pipeline.max_evals", 6000));
    cfg.optimizer.beta_step = t.get_double("pipeline.beta_step", 0.25);
    cfg.optimizer.trans_step = t.get_double("pipeline.trans_step", 0.02);
    cfg.optimizer.scale_rel_step = t.get_double("pipeline.scale_rel_step", 0.05);
    return cfg;
}

}  // namespace tdg
