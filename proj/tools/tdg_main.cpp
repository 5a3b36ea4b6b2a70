// Command-line surface for the textured 3D guidance pipeline.
// Exit codes: 0 ok, 2 configuration error, 3 stage failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>

#include "CLI11.hpp"
#include "json.hpp"
#include "tdg/body_model.hpp"
#include "tdg/conditioning.hpp"
#include "tdg/fit_refine.hpp"
#include "tdg/io/pfm.hpp"
#include "tdg/io/png_io.hpp"
#include "tdg/keyframe_mask.hpp"
#include "tdg/pipeline.hpp"
#include "tdg/rigging_anim.hpp"
#include "tdg/surface_recon.hpp"

namespace fs = std::filesystem;
using namespace tdg;

namespace {

std::string numbered(const std::string& dir, const char* stem, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", stem, i, ext);
    return (fs::path(dir) / buf).string();
}

std::vector<MaskU8> read_mask_dir(const std::string& dir, const char* stem) {
    std::vector<MaskU8> masks;
    for (int i = 0;; ++i) {
        std::string path = numbered(dir, stem, i, "png");
        if (!fs::exists(path)) break;
        masks.push_back(read_mask_png(path));
    }
    if (masks.empty()) throw std::runtime_error("no " + std::string(stem) + "_*.png in " + dir);
    return masks;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"textured 3D guidance toolkit for video try-on"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t global_seed = 7;
    std::string out_dir = "out";
    int threads = 1;
    app.add_option("--config", config_path, "TOML config ([pipeline] table)");
    app.add_option("--seed", global_seed, "global random seed");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads for per-frame stages");

    // fixture
    auto* fixture_cmd = app.add_subcommand("fixture", "emit a synthetic ground-truth scene");
    int fix_frames = 16, fix_res = 256;
    fixture_cmd->add_option("--frames", fix_frames, "frame count");
    fixture_cmd->add_option("--resolution", fix_res, "render resolution");

    // select
    auto* select_cmd = app.add_subcommand("select", "adaptive keyframe selection");
    std::string sel_kps;
    double sel_conf = 0.5;
    select_cmd->add_option("--keypoints", sel_kps, "keypoints JSON")->required();
    select_cmd->add_option("--conf-threshold", sel_conf, "confidence threshold");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "refine body parameters against clothed maps");
    std::string fit_body, fit_init, fit_normal, fit_sil, fit_normal_back, fit_sil_back;
    std::string fit_camera;
    double fit_d = 0.0, fit_lambda = 1.0;
    int fit_cycles = 10;
    fit_cmd->add_option("--body", fit_body, "body JSON")->required();
    fit_cmd->add_option("--init-params", fit_init, "initial params JSON")->required();
    fit_cmd->add_option("--camera", fit_camera, "camera JSON")->required();
    fit_cmd->add_option("--normal", fit_normal, "front clothed normal PFM")->required();
    fit_cmd->add_option("--sil", fit_sil, "front clothed silhouette PNG")->required();
    fit_cmd->add_option("--normal-back", fit_normal_back, "back clothed normal PFM");
    fit_cmd->add_option("--sil-back", fit_sil_back, "back clothed silhouette PNG");
    fit_cmd->add_option("--threshold-d", fit_d, "scale threshold d (px per meter)");
    fit_cmd->add_option("--lambda", fit_lambda, "hinge weight");
    fit_cmd->add_option("--cycles", fit_cycles, "refinement cycles T");

    // integrate
    auto* integrate_cmd = app.add_subcommand("integrate", "depth from a normal map");
    std::string int_normal, int_sil, int_prior, int_boundary = "free";
    double int_mu = 0.0;
    integrate_cmd->add_option("--normal", int_normal, "normal map PFM")->required();
    integrate_cmd->add_option("--sil", int_sil, "silhouette PNG")->required();
    integrate_cmd->add_option("--prior", int_prior, "depth prior PFM");
    integrate_cmd->add_option("--mu", int_mu, "prior weight");
    integrate_cmd->add_option("--boundary", int_boundary, "free | pin");

    // reconstruct
    auto* recon_cmd = app.add_subcommand("reconstruct", "mesh two depth sheets with texture");
    std::string rec_front, rec_back, rec_sil, rec_image;
    recon_cmd->add_option("--front-depth", rec_front, "front depth PFM")->required();
    recon_cmd->add_option("--back-depth", rec_back, "back depth PFM")->required();
    recon_cmd->add_option("--sil", rec_sil, "shared silhouette PNG")->required();
    recon_cmd->add_option("--image", rec_image, "source image PNG")->required();

    // bind
    auto* bind_cmd = app.add_subcommand("bind", "KNN weight-transfer binding");
    std::string bind_mesh, bind_body, bind_canonical;
    int bind_k = 4;
    bind_cmd->add_option("--mesh", bind_mesh, "clothed mesh OBJ")->required();
    bind_cmd->add_option("--body", bind_body, "body JSON")->required();
    bind_cmd->add_option("--canonical", bind_canonical, "binding pose params JSON")->required();
    bind_cmd->add_option("--k", bind_k, "neighbors per vertex");

    // animate
    auto* anim_cmd = app.add_subcommand("animate", "animate a bound mesh along a pose sequence");
    std::string anim_mesh, anim_binding, anim_body, anim_poses, anim_camera;
    bool anim_obj = false;
    anim_cmd->add_option("--mesh", anim_mesh, "clothed mesh OBJ")->required();
    anim_cmd->add_option("--binding", anim_binding, "binding file")->required();
    anim_cmd->add_option("--body", anim_body, "body JSON")->required();
    anim_cmd->add_option("--poses", anim_poses, "pose sequence JSON")->required();
    anim_cmd->add_option("--camera", anim_camera, "camera JSON")->required();
    anim_cmd->add_flag("--obj", anim_obj, "also write one OBJ per frame");

    // mask
    auto* mask_cmd = app.add_subcommand("mask", "rectangular agnostic masks");
    std::string mask_garment_dir, mask_keep_dir;
    int mask_margin = 4, mask_window = 5;
    mask_cmd->add_option("--garment-dir", mask_garment_dir, "mask_*.png directory")->required();
    mask_cmd->add_option("--keep-dir", mask_keep_dir, "keep_*.png directory");
    mask_cmd->add_option("--margin", mask_margin, "box dilation, pixels");
    mask_cmd->add_option("--window", mask_window, "temporal union window, frames");

    // conditioning
    auto* cond_cmd = app.add_subcommand("conditioning", "assemble denoiser input tensors");
    std::string cond_video, cond_agnostic, cond_mask, cond_body, cond_guidance;
    int cond_t = 500, cond_steps = 1000;
    double cond_tau = 0.3, cond_p = 0.1;
    cond_cmd->add_option("--video-dir", cond_video, "source frame_*.png directory")->required();
    cond_cmd->add_option("--agnostic-dir", cond_agnostic, "agnostic_*.png directory")->required();
    cond_cmd->add_option("--mask-dir", cond_mask, "mask_*.png directory")->required();
    cond_cmd->add_option("--body-dir", cond_body, "body_*.png directory")->required();
    cond_cmd->add_option("--guidance-dir", cond_guidance, "guidance_*.png directory")->required();
    cond_cmd->add_option("--timestep", cond_t, "diffusion timestep");
    cond_cmd->add_option("--steps", cond_steps, "schedule length N");
    cond_cmd->add_option("--tau", cond_tau, "image/video mix fraction");
    cond_cmd->add_option("--p-drop", cond_p, "CFG drop probability for each condition");

    // run
    auto* run_cmd = app.add_subcommand("run", "end-to-end guidance pipeline");
    std::string run_input;
    run_cmd->add_option("--input", run_input, "fixture-layout scene directory");
    bool run_latents = false;
    run_cmd->add_flag("--emit-latents", run_latents, "also dump mock-encoded latent stacks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fixture_cmd->parsed()) {
            FixtureInfo info = make_fixture(out_dir, global_seed, fix_frames, fix_res);
            std::cout << "fixture written to " << info.dir << " (keyframe " << info.keyframe
                      << ")\n";
            return 0;
        }

        if (select_cmd->parsed()) {
            Keypoints2D kps = load_keypoints_json(sel_kps);
            KeyframeConfig kc{sel_conf};
            int idx = select_keyframe(kps, kc);
            std::vector<double> scores = keyframe_scores(kps, kc);
            std::cout << idx << "\n";
            fs::create_directories(out_dir);
            std::ofstream csv(fs::path(out_dir) / "keyframe_scores.csv");
            csv << "frame,score\n";
            for (size_t i = 0; i < scores.size(); ++i) csv << i << ',' << scores[i] << '\n';
            return 0;
        }

        if (fit_cmd->parsed()) {
            ParametricBody body = load_body_json(fit_body);
            BodyParams init = load_params_json(fit_init);
            WeakPerspectiveCam cam = load_camera_json(fit_camera);
            ClothedMaps maps;
            maps.front_normal = read_pfm(fit_normal);
            maps.front_silhouette = read_mask_png(fit_sil);
            if (!fit_normal_back.empty()) {
                maps.back_normal = read_pfm(fit_normal_back);
                maps.back_silhouette = read_mask_png(fit_sil_back);
            }
            OptimizerConfig ocfg;
            ocfg.seed = global_seed;
            NormalProvider provider = [&](const BodyRenderState&) { return maps; };
            RefineCyclesResult r = refine_cycles(body, init, cam, provider,
                                                 FitKnobs{fit_d, fit_lambda}, fit_cycles, ocfg);
            fs::create_directories(out_dir);
            save_params_json((fs::path(out_dir) / "refined_params.json").string(), r.params);
            std::ofstream trace(fs::path(out_dir) / "fit_trace.csv");
            trace << "cycle,total\n";
            for (size_t i = 0; i < r.cycle_losses.size(); ++i)
                trace << i << ',' << r.cycle_losses[i] << '\n';
            std::cout << "refined params written (final loss " << r.cycle_losses.back() << ")\n";
            return 0;
        }

        if (integrate_cmd->parsed()) {
            ImageF normal = read_pfm(int_normal);
            MaskU8 sil = read_mask_png(int_sil);
            std::optional<ImageF> prior;
            if (!int_prior.empty()) prior = read_pfm(int_prior);
            IntegrationConfig icfg;
            icfg.prior_weight = int_mu;
            if (int_boundary == "pin")
                icfg.boundary = BoundaryMode::PinToPrior;
            else if (int_boundary != "free")
                throw std::invalid_argument("--boundary must be free or pin");
            IntegrationResult r =
                integrate_normals(normal, sil, prior ? &*prior : nullptr, icfg);
            fs::create_directories(out_dir);
            write_pfm((fs::path(out_dir) / "depth.pfm").string(), r.depth);
            std::cout << "components=" << r.components << " iterations=" << r.iterations
                      << " residual=" << r.residual << "\n";
            return 0;
        }

        if (recon_cmd->parsed()) {
            ClothedMesh mesh = mesh_from_depth(read_pfm(rec_front), read_pfm(rec_back),
                                               read_mask_png(rec_sil), read_rgb_png(rec_image));
            fs::create_directories(out_dir);
            write_obj((fs::path(out_dir) / "clothed_mesh.obj").string(), mesh.as_tri_mesh());
            save_clothed_mesh_sidecar((fs::path(out_dir) / "clothed_mesh.json").string(), mesh);
            std::cout << "vertices=" << mesh.vertex_count()
                      << " clamped=" << mesh.clamped_pixels << "\n";
            return 0;
        }

        if (bind_cmd->parsed()) {
            TriMesh mesh = read_obj(bind_mesh);
            ParametricBody body = load_body_json(bind_body);
            BodyParams canonical = load_params_json(bind_canonical);
            SkinningBinding binding = bind_knn(mesh.vertices, body, canonical, bind_k);
            fs::create_directories(out_dir);
            save_binding((fs::path(out_dir) / "binding.bin").string(), binding);
            std::cout << "bound " << binding.count() << " vertices with K=" << binding.k()
                      << "\n";
            return 0;
        }

        if (anim_cmd->parsed()) {
            TriMesh mesh_in = read_obj(anim_mesh);
            SkinningBinding binding = load_binding(anim_binding);
            ParametricBody body = load_body_json(anim_body);
            PoseSequence seq = load_pose_sequence_json(anim_poses);
            WeakPerspectiveCam cam = load_camera_json(anim_camera);
            ClothedMesh clothed;
            clothed.vertices = mesh_in.vertices;
            clothed.faces = mesh_in.faces;
            clothed.colors = mesh_in.has_colors()
                                 ? mesh_in.colors
                                 : Points(Points::Zero(mesh_in.vertex_count(), 3));
            clothed.origin.assign(clothed.vertex_count(), VertexOrigin::FrontSurface);
            fs::create_directories(out_dir);
            std::vector<RenderTargets> frames = animate_and_render(
                clothed, binding, body, seq, cam, RenderWant{true, true}, threads);
            for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
                write_rgb_png(numbered(out_dir, "guidance", f, "png"), frames[f].color);
                write_mask_png(numbered(out_dir, "sil", f, "png"), frames[f].silhouette);
                write_pfm(numbered(out_dir, "depth", f, "pfm"), frames[f].depth);
                if (anim_obj) {
                    TriMesh posed = animate(clothed, binding, body, seq.params_at(f, cam.scale));
                    write_obj(numbered(out_dir, "mesh", f, "obj"), posed);
                }
            }
            std::cout << frames.size() << " frames written\n";
            return 0;
        }

        if (mask_cmd->parsed()) {
            std::vector<MaskU8> garment = read_mask_dir(mask_garment_dir, "mask");
            std::vector<MaskU8> keep;
            if (!mask_keep_dir.empty()) keep = read_mask_dir(mask_keep_dir, "keep");
            RectMaskResult r = rect_mask(garment, keep, RectMaskConfig{mask_margin, mask_window});
            fs::create_directories(out_dir);
            for (int f = 0; f < static_cast<int>(r.masks.size()); ++f)
                write_mask_png(numbered(out_dir, "mask", f, "png"), r.masks[f]);
            std::cout << r.masks.size() << " masks written\n";
            return 0;
        }

        if (cond_cmd->parsed()) {
            auto read_frames = [](const std::string& dir, const char* stem) {
                std::vector<ImageF> frames;
                for (int i = 0;; ++i) {
                    std::string path = numbered(dir, stem, i, "png");
                    if (!fs::exists(path)) break;
                    frames.push_back(read_rgb_png(path));
                }
                if (frames.empty())
                    throw std::runtime_error("no " + std::string(stem) + "_*.png in " + dir);
                return frames;
            };
            std::vector<ImageF> video = read_frames(cond_video, "frame");
            std::vector<ImageF> agnostic = read_frames(cond_agnostic, "agnostic");
            std::vector<ImageF> body_maps = read_frames(cond_body, "body");
            std::vector<ImageF> guidance = read_frames(cond_guidance, "guidance");
            std::vector<MaskU8> masks = read_mask_dir(cond_mask, "mask");
            const int F = static_cast<int>(video.size());
            if (static_cast<int>(agnostic.size()) != F || static_cast<int>(masks.size()) != F ||
                static_cast<int>(body_maps.size()) != F || static_cast<int>(guidance.size()) != F)
                throw std::runtime_error("conditioning: frame counts differ across inputs");

            NoiseSchedule sched = make_schedule(cond_steps);
            Tensor5 z0 = mock_encode_video(video);
            Tensor5 eps(z0.b, z0.c, z0.f, z0.h, z0.w);
            std::mt19937_64 rng(global_seed);
            std::normal_distribution<float> gauss(0.f, 1.f);
            for (auto& v : eps.data) v = gauss(rng);
            Tensor5 zt = noisy_latent(z0, eps, cond_t, sched);
            Tensor5 vt = v_target(z0, eps, cond_t, sched);

            Tensor5 mask_lat(1, 1, F, z0.h, z0.w);
            for (int f = 0; f < F; ++f) {
                ImageF mf(masks[f].h, masks[f].w, 1);
                for (int y = 0; y < mf.h; ++y)
                    for (int x = 0; x < mf.w; ++x) mf.at(y, x) = masks[f].at(y, x) ? 1.f : 0.f;
                ImageF small = area_downsample(mf, 8);
                for (int y = 0; y < small.h; ++y)
                    for (int x = 0; x < small.w; ++x) mask_lat.at(0, 0, f, y, x) = small.at(y, x);
            }

            MixConfig mix{cond_tau, cond_p, cond_p, cond_p};
            TrainingDraw draw = sample_training_batch(global_seed, mix);
            Tensor5 input = assemble_denoiser_input(zt, mock_encode_video(agnostic), mask_lat,
                                                    mock_encode_video(body_maps),
                                                    mock_encode_video(guidance), draw.flags);
            fs::create_directories(out_dir);
            save_tensor_stack(out_dir, "denoiser_input", input);
            save_tensor_stack(out_dir, "v_target", vt);
            nlohmann::json j;
            j["timestep"] = cond_t;
            j["source"] = draw.source == SourceKind::Image ? "image" : "video";
            j["freeze_temporal"] = draw.freeze_temporal;
            j["drop_cloth"] = draw.flags.drop_cloth;
            j["drop_tryon"] = draw.flags.drop_tryon;
            j["drop_guidance"] = draw.flags.drop_guidance;
            j["alpha_t"] = sched.alpha[cond_t];
            j["sigma_t"] = sched.sigma[cond_t];
            std::ofstream out(fs::path(out_dir) / "batch.json");
            out << j.dump(1) << '\n';
            std::cout << "denoiser input: 17 x " << F << " x " << z0.h << " x " << z0.w << "\n";
            return 0;
        }

        if (run_cmd->parsed()) {
            PipelineConfig cfg;
            if (!config_path.empty()) cfg = pipeline_config_from_toml(config_path);
            if (!run_input.empty()) cfg.input_dir = run_input;
            if (cfg.out_dir.empty() || out_dir != "out") cfg.out_dir = out_dir;
            cfg.seed = global_seed;
            cfg.threads = threads;
            cfg.emit_latents = cfg.emit_latents || run_latents;
            GuidancePack pack = run_pipeline(cfg);
            std::cout << "guidance pack written: " << pack.manifest_path << " (keyframe "
                      << pack.keyframe << ")\n";
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
