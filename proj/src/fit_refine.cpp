#include "tdg/fit_refine.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace tdg {

void FitTargets::validate() const {
    if (front_normal.c != 3) throw std::invalid_argument("fit targets: front normal needs 3 channels");
    if (front_normal.h != front_silhouette.h || front_normal.w != front_silhouette.w)
        throw std::invalid_argument("fit targets: front map dimensions differ");
    if (back_normal.has_value() != back_silhouette.has_value())
        throw std::invalid_argument("fit targets: back normal and silhouette must come together");
    if (back_normal) {
        if (back_normal->c != 3) throw std::invalid_argument("fit targets: back normal needs 3 channels");
        if (back_normal->h != front_normal.h || back_normal->w != front_normal.w ||
            back_silhouette->h != front_normal.h || back_silhouette->w != front_normal.w)
            throw std::invalid_argument("fit targets: back map dimensions differ");
    }
    if (scale_threshold < 0) throw std::invalid_argument("fit targets: threshold d must be >= 0");
    if (lambda < 0) throw std::invalid_argument("fit targets: lambda must be >= 0");
}

namespace {

struct ViewSums {
    size_t mismatch = 0;
    size_t union_px = 0;
    size_t body_px = 0;
    double normal_sum = 0.0;
};

// Accumulate silhouette mismatches and normal L1 over a cropped render
// placed at (x0, y0) of the full-size target maps. The window is chosen to
// cover both silhouettes, so pixels outside it contribute nothing.
ViewSums view_sums(const RenderTargets& render, const ImageF& target_normal,
                   const MaskU8& target_sil, int x0, int y0) {
    ViewSums s;
    const int wh = render.silhouette.h, ww = render.silhouette.w;
    const int W = target_sil.w;
    for (int ly = 0; ly < wh; ++ly) {
        const uint8_t* body_sil = render.silhouette.data.data() + static_cast<size_t>(ly) * ww;
        const float* body_n = render.normal.data.data() + static_cast<size_t>(ly) * ww * 3;
        const size_t row = static_cast<size_t>(y0 + ly) * W + x0;
        const uint8_t* tgt_sil = target_sil.data.data() + row;
        const float* tgt_n = target_normal.data.data() + row * 3;
        for (int lx = 0; lx < ww; ++lx) {
            bool in_body = body_sil[lx] != 0;
            bool in_target = tgt_sil[lx] != 0;
            s.body_px += in_body;
            s.mismatch += in_body != in_target;
            if (in_body | in_target) {
                ++s.union_px;
                const float* a = tgt_n + 3 * lx;
                const float* b = body_n + 3 * lx;
                s.normal_sum += std::abs(static_cast<double>(a[0]) - b[0]) +
                                std::abs(static_cast<double>(a[1]) - b[1]) +
                                std::abs(static_cast<double>(a[2]) - b[2]);
            }
        }
    }
    return s;
}

struct Window {
    int x0 = 0, y0 = 0, w = 0, h = 0;
};

Window union_window(const MaskU8& target_sil, const Points& verts,
                    const WeakPerspectiveCam& cam) {
    double lo_x = 1e30, hi_x = -1e30, lo_y = 1e30, hi_y = -1e30;
    bool any = false;
    for (int y = 0; y < target_sil.h; ++y)
        for (int x = 0; x < target_sil.w; ++x)
            if (target_sil.at(y, x)) {
                any = true;
                lo_x = std::min(lo_x, static_cast<double>(x));
                hi_x = std::max(hi_x, static_cast<double>(x));
                lo_y = std::min(lo_y, static_cast<double>(y));
                hi_y = std::max(hi_y, static_cast<double>(y));
            }
    Eigen::Matrix<double, Eigen::Dynamic, 2> px;
    Eigen::VectorXd depth;
    project(cam, verts, px, depth);
    if (px.rows() > 0) {
        any = true;
        lo_x = std::min(lo_x, px.col(0).minCoeff());
        hi_x = std::max(hi_x, px.col(0).maxCoeff());
        lo_y = std::min(lo_y, px.col(1).minCoeff());
        hi_y = std::max(hi_y, px.col(1).maxCoeff());
    }
    Window win;
    if (!any) return win;
    int x0 = std::clamp(static_cast<int>(std::floor(lo_x)) - 2, 0, target_sil.w);
    int x1 = std::clamp(static_cast<int>(std::ceil(hi_x)) + 2, 0, target_sil.w);
    int y0 = std::clamp(static_cast<int>(std::floor(lo_y)) - 2, 0, target_sil.h);
    int y1 = std::clamp(static_cast<int>(std::ceil(hi_y)) + 2, 0, target_sil.h);
    win = {x0, y0, x1 - x0, y1 - y0};
    return win;
}

}  // namespace
LossBreakdown smplx_loss(const ParametricBody& body, const BodyParams& params,
                         const WeakPerspectiveCam& cam_base, const FitTargets& targets) {
    targets.validate();
    params.validate(body);
    if (cam_base.height != targets.front_normal.h || cam_base.width != targets.front_normal.w)
        throw std::invalid_argument("smplx_loss: camera and target dimensions differ");

    TriMesh mesh = skin(body, params).as_tri_mesh();
    mesh.normals = vertex_normals(mesh.vertices, mesh.faces);  // shared by both views
    WeakPerspectiveCam cam = cam_base.with_scale(params.cam_scale);
    const double total_px = static_cast<double>(cam.height) * cam.width;

    LossBreakdown loss;
    int views = 0;
    size_t body_px = 0;
    bool any_empty = false;
    auto add_view = [&](ViewSide side, const ImageF& tnormal, const MaskU8& tsil) {
        WeakPerspectiveCam vc = cam.with_view(side);
        Window win = union_window(tsil, mesh.vertices, vc);
        RenderTargets render =
            rasterize_region(mesh, vc, RenderWant{true, false}, win.x0, win.y0, win.w, win.h);
        ViewSums sums = view_sums(render, tnormal, tsil, win.x0, win.y0);
        loss.silhouette_l1 += static_cast<double>(sums.mismatch) / total_px;
        loss.normal_l1 +=
            sums.union_px == 0 ? 0.0 : sums.normal_sum / (3.0 * static_cast<double>(sums.union_px));
        body_px = sums.body_px;
        any_empty = any_empty || sums.body_px == 0;
        ++views;
    };
    add_view(ViewSide::Front, targets.front_normal, targets.front_silhouette);
    if (targets.has_back()) add_view(ViewSide::Back, *targets.back_normal, *targets.back_silhouette);
    (void)body_px;

    loss.normal_l1 /= views;
    loss.silhouette_l1 /= views;
    loss.degenerate_render = any_empty;
    loss.scale_penalty =
        targets.lambda * std::max(targets.scale_threshold - params.cam_scale, 0.0);
    loss.total = loss.normal_l1 + loss.silhouette_l1 + loss.scale_penalty;
    return loss;
}

namespace {

struct SearchRun {
    Eigen::VectorXd x;
    LossBreakdown best;
    std::vector<LossBreakdown> trace;
};

}  // namespace

RefineResult refine(const ParametricBody& body, const BodyParams& params0,
                    const WeakPerspectiveCam& cam_base, const FitTargets& targets,
                    const OptimizerConfig& cfg) {
    params0.validate(body);
    const int S = body.shape_count();
    const int n = S + 3 + 1;  // beta, trans, s

    Eigen::VectorXd x_init(n);
    for (int s = 0; s < S; ++s) x_init[s] = params0.beta[s];
    x_init.segment(S, 3) = params0.trans;
    x_init[S + 3] = params0.cam_scale;

    Eigen::VectorXd init_step(n);
    for (int s = 0; s < S; ++s) init_step[s] = cfg.beta_step;
    init_step.segment(S, 3).setConstant(cfg.trans_step);
    init_step[S + 3] = cfg.scale_rel_step * params0.cam_scale;
    const Eigen::VectorXd max_step = 10.0 * init_step;

    RefineResult result;
    result.params = params0;

    auto to_params = [&](const Eigen::VectorXd& v) {
        BodyParams p = params0;
        for (int s = 0; s < S; ++s) p.beta[s] = v[s];
        p.trans = v.segment(S, 3);
        p.cam_scale = std::max(v[S + 3], 1e-9);
        return p;
    };
    auto eval = [&](const Eigen::VectorXd& v) {
        ++result.evaluations;
        return smplx_loss(body, to_params(v), cam_base, targets);
    };

    // One Hooke-Jeeves style search: exploratory per-coordinate moves with
    // step expansion on acceptance and halving on rejection, a pattern move
    // along the accumulated sweep direction, diagonal two-coordinate polls
    // when axis moves stall, and seeded jittered restarts (basin hopping)
    // against coupled local minima. The recorded trace only ever takes
    // improvements over the best point seen, so accepted losses are
    // monotone even while a restart explores from a worse base.
    std::mt19937_64 restart_rng(cfg.seed);
    auto run_search = [&](Eigen::VectorXd x, int budget) {
        const int cap = std::min(result.evaluations + budget, cfg.max_evals);
        SearchRun run;
        run.best = eval(x);
        if (!std::isfinite(run.best.total))
            throw std::runtime_error("refine: non-finite initial loss");
        run.trace.push_back(run.best);
        run.x = x;

        // moment alignment: match the rendered silhouette bounding box to
        // the target (scale from height, translation from center); keep the
        // adjusted start only if it scores better
        {
            struct Box {
                double x0 = 1e30, y0 = 1e30, x1 = -1e30, y1 = -1e30;
                bool ok = false;
            };
            auto bbox = [](const MaskU8& sil) {
                Box b;
                for (int y = 0; y < sil.h; ++y)
                    for (int x2 = 0; x2 < sil.w; ++x2)
                        if (sil.at(y, x2)) {
                            b.ok = true;
                            b.x0 = std::min(b.x0, static_cast<double>(x2));
                            b.y0 = std::min(b.y0, static_cast<double>(y));
                            b.x1 = std::max(b.x1, static_cast<double>(x2));
                            b.y1 = std::max(b.y1, static_cast<double>(y));
                        }
                return b;
            };
            TriMesh mesh = skin(body, to_params(x)).as_tri_mesh();
            RenderTargets rt =
                rasterize(mesh, cam_base.with_scale(x[S + 3]), RenderWant{false, false});
            Box b = bbox(rt.silhouette);
            Box t = bbox(targets.front_silhouette);
            if (b.ok && t.ok && b.y1 > b.y0 + 1) {
                Eigen::VectorXd cand = x;
                double ratio = (t.y1 - t.y0) / (b.y1 - b.y0);
                cand[S + 3] = std::max(x[S + 3] * ratio, 1e-9);
                cand[S + 0] += (0.5 * (t.x0 + t.x1) - 0.5 * (b.x0 + b.x1) * ratio -
                                (1.0 - ratio) * cam_base.principal_offset.x()) /
                               cand[S + 3];
                cand[S + 1] += (0.5 * (t.y0 + t.y1) - 0.5 * (b.y0 + b.y1) * ratio -
                                (1.0 - ratio) * cam_base.principal_offset.y()) /
                               cand[S + 3];
                LossBreakdown l = eval(cand);
                if (l.total < run.best.total) {
                    x = cand;
                    run.best = l;
                    run.trace.push_back(l);
                    run.x = x;
                }
            }
        }

        double base_loss = run.best.total;
        auto take = [&](const Eigen::VectorXd& cand, const LossBreakdown& l) {
            x = cand;
            base_loss = l.total;
            if (l.total < run.best.total) {
                run.best = l;
                run.trace.push_back(l);
                run.x = cand;
            }
        };

        Eigen::VectorXd step = init_step;
        int restarts_left = cfg.restarts;
        for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
            Eigen::VectorXd sweep_start = x;
            bool improved = false;
            for (int i = 0; i < n && result.evaluations < cap; ++i) {
                bool accepted = false;
                for (double sign : {+1.0, -1.0}) {
                    Eigen::VectorXd cand = x;
                    cand[i] += sign * step[i];
                    LossBreakdown l = eval(cand);
                    if (l.total < base_loss) {
                        take(cand, l);
                        accepted = true;
                        break;
                    }
                }
                if (accepted) {
                    improved = true;
                    step[i] = std::min(step[i] * cfg.expand, max_step[i]);
                } else {
                    step[i] *= cfg.shrink;
                }
            }
            if (improved && result.evaluations < cap) {
                // pattern move: repeat the sweep displacement while it helps
                Eigen::VectorXd dir = x - sweep_start;
                while (dir.squaredNorm() > 0 && result.evaluations < cap) {
                    Eigen::VectorXd cand = x + dir;
                    cand[S + 3] = std::max(cand[S + 3], 1e-9);
                    LossBreakdown l = eval(cand);
                    if (l.total >= base_loss) break;
                    take(cand, l);
                }
            } else if (result.evaluations < cap) {
                // axis moves exhausted: poll diagonal two-coordinate steps
                // to escape coupled valleys (scale vs. height vs. shift)
                for (int i = 0; i < n && !improved; ++i)
                    for (int j = i + 1; j < n && !improved; ++j)
                        for (double si : {+1.0, -1.0})
                            for (double sj : {+1.0, -1.0}) {
                                if (result.evaluations >= cap) break;
                                Eigen::VectorXd cand = x;
                                cand[i] += si * init_step[i];
                                cand[j] += sj * init_step[j];
                                cand[S + 3] = std::max(cand[S + 3], 1e-9);
                                LossBreakdown l = eval(cand);
                                if (l.total < base_loss) {
                                    take(cand, l);
                                    improved = true;
                                    break;
                                }
                            }
            }
            bool all_small = true;
            for (int i = 0; i < n; ++i)
                if (step[i] >= init_step[i] * cfg.min_step_fraction) all_small = false;
            if (result.evaluations >= cap || run.best.total == 0.0) break;
            if (!improved && all_small) {
                if (restarts_left-- <= 0) break;
                // hop to a seeded jitter of the incumbent best and re-explore
                Eigen::VectorXd hop = run.x;
                for (int i = 0; i < n; ++i)
                    hop[i] += (2.0 * (static_cast<double>(restart_rng() >> 11) * 0x1.0p-53) -
                               1.0) *
                              1.5 * init_step[i];
                hop[S + 3] = std::max(hop[S + 3], 1e-9);
                LossBreakdown l = eval(hop);
                x = hop;
                base_loss = l.total;
                if (l.total < run.best.total) {
                    run.best = l;
                    run.trace.push_back(l);
                    run.x = hop;
                }
                step = 0.75 * init_step;
            }
        }
                return run;
    };

    // two deterministic starts: the caller's parameters and, when shapes
    // exist, a neutral-shape variant that sidesteps bad shape initializations
    const bool two_starts = cfg.multi_start && S > 0;
    SearchRun a = run_search(x_init, two_starts ? cfg.max_evals / 2 : cfg.max_evals);
    const SearchRun* winner = &a;
    SearchRun b;
    if (two_starts && result.evaluations < cfg.max_evals && a.best.total > 0.0) {
        Eigen::VectorXd x0 = x_init;
        x0.head(S).setZero();
        b = run_search(x0, cfg.max_evals - result.evaluations);
        if (b.best.total < a.best.total) winner = &b;
    }

    if (winner == &a) {
        result.trace = a.trace;
    } else {
        // keep the reported accepted-loss sequence monotone from the true start
        result.trace.push_back(a.trace.front());
        for (const LossBreakdown& l : b.trace)
            if (l.total < result.trace.back().total) result.trace.push_back(l);
    }
    result.params = to_params(winner->x);
    // theta was never part of the search; carry the exact input matrix
    result.params.theta = params0.theta;
    return result;
}

RefineCyclesResult refine_cycles(const ParametricBody& body, const BodyParams& params0,
                                 const WeakPerspectiveCam& cam_base,
                                 const NormalProvider& provider, const FitKnobs& knobs,
                                 int cycles, const OptimizerConfig& cfg) {
    if (cycles < 1) throw std::invalid_argument("refine_cycles: T must be >= 1");
    RefineCyclesResult out;
    out.params = params0;
    for (int t = 0; t < cycles; ++t) {
        TriMesh mesh = skin(body, out.params).as_tri_mesh();
        WeakPerspectiveCam cam = cam_base.with_scale(out.params.cam_scale);
        BodyRenderState state;
        state.front = rasterize(mesh, cam.with_view(ViewSide::Front));
        state.back = rasterize(mesh, cam.with_view(ViewSide::Back));
        ClothedMaps maps = provider(state);
        if (maps.front_normal.h != cam_base.height || maps.front_normal.w != cam_base.width)
            throw std::invalid_argument("refine_cycles: provider map shape mismatch");

        FitTargets targets;
        targets.front_normal = maps.front_normal;
        targets.front_silhouette = maps.front_silhouette;
        targets.back_normal = maps.back_normal;
        targets.back_silhouette = maps.back_silhouette;
        targets.scale_threshold = knobs.scale_threshold;
        targets.lambda = knobs.lambda;

        OptimizerConfig cycle_cfg = cfg;
        if (t > 0) {
            cycle_cfg.max_evals = std::max(cfg.max_evals / 10, 600);
            cycle_cfg.restarts = std::min(cfg.restarts, 1);
            cycle_cfg.multi_start = false;
        }
        RefineResult r = refine(body, out.params, cam_base, targets, cycle_cfg);
        out.params = r.params;
        out.evaluations += r.evaluations;
        out.cycle_losses.push_back(r.trace.back().total);
        if (t == cycles - 1) out.final_maps = std::move(maps);
    }
    return out;
}

}  // namespace tdg
