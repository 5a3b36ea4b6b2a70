#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tdg/body_model.hpp"
#include "tdg/rasterizer.hpp"

namespace tdg {

// Clothed-person observation the body is fitted against. Back-view maps are
// optional; when absent only the front terms contribute.
struct FitTargets {
    ImageF front_normal;        // H x W x 3
    MaskU8 front_silhouette;    // H x W
    std::optional<ImageF> back_normal;
    std::optional<MaskU8> back_silhouette;
    double scale_threshold = 0.0;  // d, pixels per meter
    double lambda = 1.0;

    void validate() const;
    bool has_back() const { return back_normal.has_value(); }
};

struct LossBreakdown {
    double normal_l1 = 0.0;
    double silhouette_l1 = 0.0;
    double scale_penalty = 0.0;
    double total = 0.0;
    bool degenerate_render = false;  // body silhouette came out empty
};

// Renders the body at params (camera scale taken from params.cam_scale) and
// scores it against the targets. The normal term is a mean L1 over the union
// of both silhouettes; the silhouette term a mean L1 over all pixels; the
// printed min(d - s, 0) of the loss is realized as the hinge
// lambda * max(d - s, 0), active exactly when s falls below d.
LossBreakdown smplx_loss(const ParametricBody& body, const BodyParams& params,
                         const WeakPerspectiveCam& cam_base, const FitTargets& targets);

// Adaptive per-coordinate step search over (beta, trans, s); theta frozen.
struct OptimizerConfig {
    int max_sweeps = 100;
    int max_evals = 6000;
    double beta_step = 0.3;
    double trans_step = 0.05;       // meters
    double scale_rel_step = 0.05;   // fraction of the initial s
    double shrink = 0.5;
    double expand = 1.6;
    double min_step_fraction = 1e-3;  // steps below init * fraction count as converged
    int restarts = 4;                 // step resets after convergence
    bool multi_start = true;          // also search from a neutral-shape start
    uint64_t seed = 0;
};

struct RefineResult {
    BodyParams params;
    std::vector<LossBreakdown> trace;  // accepted-step losses, starting at the initial point
    int evaluations = 0;
};

// Pose is never touched: result.theta is bit-identical to params0.theta, and
// the accepted-loss sequence is non-increasing.
RefineResult refine(const ParametricBody& body, const BodyParams& params0,
                    const WeakPerspectiveCam& cam_base, const FitTargets& targets,
                    const OptimizerConfig& cfg = {});

// Current body renders handed to the normal provider each cycle.
struct BodyRenderState {
    RenderTargets front;
    RenderTargets back;
};

// Fresh clothed maps produced by the provider (a normal-estimation network
// in the paper; a constant file-backed source in this artifact).
struct ClothedMaps {
    ImageF front_normal;
    MaskU8 front_silhouette;
    std::optional<ImageF> back_normal;
    std::optional<MaskU8> back_silhouette;
};

using NormalProvider = std::function<ClothedMaps(const BodyRenderState&)>;

struct RefineCyclesResult {
    BodyParams params;
    ClothedMaps final_maps;
    std::vector<double> cycle_losses;  // total loss at the end of each cycle
    int evaluations = 0;
};

// T alternations of provider call and refine. scale_threshold/lambda are
// carried over from `knobs` into each cycle's targets. The first cycle runs
// the full optimizer budget; later cycles track the (slowly moving) provider
// output with a reduced budget and no extra starts.
struct FitKnobs {
    double scale_threshold = 0.0;
    double lambda = 1.0;
};

RefineCyclesResult refine_cycles(const ParametricBody& body, const BodyParams& params0,
                                 const WeakPerspectiveCam& cam_base,
                                 const NormalProvider& provider, const FitKnobs& knobs,
                                 int cycles, const OptimizerConfig& cfg = {});

}  // namespace tdg
