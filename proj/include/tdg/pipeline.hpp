#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdg/body_model.hpp"
#include "tdg/fit_refine.hpp"
#include "tdg/keyframe_mask.hpp"
#include "tdg/rigging_anim.hpp"
#include "tdg/surface_recon.hpp"

namespace tdg {

struct PipelineConfig {
    std::string input_dir;   // fixture-layout scene
    std::string out_dir;
    std::string tryon_image;  // pre-swapped keyframe image; empty = reconstruct as-is
    uint64_t seed = 7;
    int threads = 1;

    // fit
    int cycles = 10;  // T
    double lambda = 1.0;
    double scale_threshold = 0.0;  // d; 0 disables the hinge
    OptimizerConfig optimizer;

    // reconstruction
    double mu = 0.05;            // integration prior weight
    double stitch_radius_px = 2.0;  // infill snap radius, pixels

    // rigging / masking
    int knn_k = 4;
    int mask_margin = 4;
    int mask_window = 5;

    // conditioning dump (mock-encoded latents next to the frames)
    bool emit_latents = false;

    void validate() const;
};

struct GuidancePack {
    std::vector<std::string> guidance_frames;  // textured renders V
    std::vector<std::string> body_frames;      // body geometry renders M
    std::vector<std::string> agnostic_frames;  // V_a
    std::vector<std::string> mask_frames;      // V_m
    std::vector<std::string> param_files;      // per-frame body params
    std::string manifest_path;
    int keyframe = 0;
};

// Stage order: select_keyframe, refine_cycles, integrate (front/back),
// mesh_from_depth, infill_from_body, bind_knn, animate_and_render, body
// renders, rect_mask, agnostic frames, manifest. Stage failures are rethrown
// with the stage name; outputs written before the failure stay on disk.
GuidancePack run_pipeline(const PipelineConfig& cfg);

// Synthetic scene with known ground truth: toy body, a 3%-inflated
// checkerboard shell as the clothed mesh, a scripted pose sequence, rendered
// video frames, keypoints, garment and keep masks, keyframe normal maps, and
// ground-truth guidance renders.
struct FixtureInfo {
    int keyframe = 0;
    std::string dir;
};
FixtureInfo make_fixture(const std::string& dir, uint64_t seed, int frames, int resolution);

// FNV-1a 64 over a file's bytes, hex encoded; used by the run manifest.
std::string file_hash_hex(const std::string& path);

// Shared camera sidecar (scale, principal offset, image size).
void save_camera_json(const std::string& path, const WeakPerspectiveCam& cam);
WeakPerspectiveCam load_camera_json(const std::string& path);

// PipelineConfig from a TOML [pipeline] table; unknown keys are rejected.
PipelineConfig pipeline_config_from_toml(const std::string& path);

}  // namespace tdg
