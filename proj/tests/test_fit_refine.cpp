#include "tdg/fit_refine.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

using namespace tdg;

TEST_SUITE_BEGIN("fit_refine");

namespace {

// Render targets from a known body state; the fit treats these as the
// clothed-person observation.
FitTargets targets_from(const ParametricBody& body, const BodyParams& params,
                        const WeakPerspectiveCam& cam, bool with_back = true) {
    TriMesh mesh = skin(body, params).as_tri_mesh();
    WeakPerspectiveCam c = cam.with_scale(params.cam_scale);
    RenderTargets front = rasterize(mesh, c.with_view(ViewSide::Front));
    FitTargets t;
    t.front_normal = front.normal;
    t.front_silhouette = front.silhouette;
    if (with_back) {
        RenderTargets back = rasterize(mesh, c.with_view(ViewSide::Back));
        t.back_normal = back.normal;
        t.back_silhouette = back.silhouette;
    }
    return t;
}

struct Scene {
    ParametricBody body;
    BodyParams gt;
    WeakPerspectiveCam cam;
    FitTargets targets;
};

Scene make_scene(uint64_t seed, int resolution) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Scene s;
    s.body = make_toy_body(22, 12, seed);
    s.cam = WeakPerspectiveCam::centered(resolution, resolution, resolution / 2.4);
    s.gt = BodyParams::rest(s.body);
    for (int i = 0; i < s.gt.beta.size(); ++i) s.gt.beta[i] = 0.8 * u(rng);
    s.gt.cam_scale = s.cam.scale * (1.0 + 0.05 * u(rng));
    s.gt.trans = Vec3(0.02 * u(rng), 0.02 * u(rng), 0.0);
    s.targets = targets_from(s.body, s.gt, s.cam);
    return s;
}

BodyParams perturb(const Scene& s, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BodyParams p = s.gt;
    for (int i = 0; i < p.beta.size(); ++i) p.beta[i] += 0.5 * u(rng);
    p.cam_scale *= 1.0 + 0.1 * u(rng);
    p.trans.x() += 5.0 * u(rng) / s.cam.scale;
    p.trans.y() += 5.0 * u(rng) / s.cam.scale;
    return p;
}

double silhouette_iou(const Scene& s, const BodyParams& params) {
    TriMesh mesh = skin(s.body, params).as_tri_mesh();
    RenderTargets rt = rasterize(mesh, s.cam.with_scale(params.cam_scale));
    return mask_iou(rt.silhouette, s.targets.front_silhouette);
}

ClothedMaps as_maps(const FitTargets& t) {
    ClothedMaps maps;
    maps.front_normal = t.front_normal;
    maps.front_silhouette = t.front_silhouette;
    maps.back_normal = t.back_normal;
    maps.back_silhouette = t.back_silhouette;
    return maps;
}

}  // namespace

TEST_CASE("self-consistent targets give zero normal and silhouette loss") {
    Scene s = make_scene(21, 160);
    LossBreakdown loss = smplx_loss(s.body, s.gt, s.cam, s.targets);
    CHECK(loss.normal_l1 == doctest::Approx(0.0));
    CHECK(loss.silhouette_l1 == doctest::Approx(0.0));
    CHECK(!loss.degenerate_render);
    CHECK(loss.total == loss.normal_l1 + loss.silhouette_l1 + loss.scale_penalty);
}

TEST_CASE("scale penalty hinge algebra") {
    Scene s = make_scene(22, 96);
    s.targets.lambda = 2.0;

    s.targets.scale_threshold = s.gt.cam_scale;  // s == d
    CHECK(smplx_loss(s.body, s.gt, s.cam, s.targets).scale_penalty == doctest::Approx(0.0));

    s.targets.scale_threshold = s.gt.cam_scale + 0.1;  // s = d - 0.1
    CHECK(smplx_loss(s.body, s.gt, s.cam, s.targets).scale_penalty == doctest::Approx(0.2));

    // zero for all s >= d, lambda*(d-s) below, over a sweep
    s.targets.lambda = 1.7;
    double d = s.gt.cam_scale;
    s.targets.scale_threshold = d;
    for (double factor : {0.5, 0.8, 0.95, 1.0, 1.05, 1.5}) {
        BodyParams p = s.gt;
        p.cam_scale = factor * d;
        double expected = factor < 1.0 ? 1.7 * (d - p.cam_scale) : 0.0;
        CHECK(smplx_loss(s.body, p, s.cam, s.targets).scale_penalty ==
              doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("single-pixel silhouette difference costs 1/(H*W)") {
    Scene s = make_scene(23, 96);
    FitTargets t = s.targets;
    t.back_normal.reset();
    t.back_silhouette.reset();
    int flip_y = -1, flip_x = -1;
    for (int y = 0; y < 96 && flip_y < 0; ++y)
        for (int x = 0; x < 96 && flip_y < 0; ++x)
            if (!t.front_silhouette.at(y, x)) {
                flip_y = y;
                flip_x = x;
            }
    t.front_silhouette.at(flip_y, flip_x) = 1;
    LossBreakdown loss = smplx_loss(s.body, s.gt, s.cam, t);
    CHECK(loss.silhouette_l1 == doctest::Approx(1.0 / (96.0 * 96.0)));
}

TEST_CASE("empty body render is flagged but still scored") {
    Scene s = make_scene(29, 96);
    BodyParams p = s.gt;
    p.trans.x() += 1000.0;  // body projects far outside the image
    LossBreakdown loss = smplx_loss(s.body, p, s.cam, s.targets);
    CHECK(loss.degenerate_render);
    CHECK(std::isfinite(loss.total));
    CHECK(loss.total > 0.0);
}

TEST_CASE("refine on already-optimal targets stays put") {
    Scene s = make_scene(24, 128);
    RefineResult r = refine(s.body, s.gt, s.cam, s.targets);
    CHECK(r.trace.front().total == doctest::Approx(0.0));
    CHECK(r.trace.back().total <= r.trace.front().total + 1e-9);
    CHECK(std::memcmp(r.params.theta.data(), s.gt.theta.data(),
                      sizeof(double) * s.gt.theta.size()) == 0);
}

TEST_CASE("synthetic perturbation recovery reaches IoU >= 0.98") {
    Scene s = make_scene(25, 192);
    BodyParams init = perturb(s, 1001);
    double iou_before = silhouette_iou(s, init);
    RefineResult r = refine(s.body, init, s.cam, s.targets);
    double iou_after = silhouette_iou(s, r.params);
    CHECK(iou_after > iou_before);
    CHECK(iou_after >= 0.98);
}

TEST_CASE("theta is frozen bit-exactly and accepted losses never increase") {
    Scene s = make_scene(26, 128);
    BodyParams init = perturb(s, 77);
    init.theta(5, 1) = 0.321;  // arbitrary pose, must survive untouched
    RefineResult r = refine(s.body, init, s.cam, s.targets);
    CHECK(std::memcmp(r.params.theta.data(), init.theta.data(),
                      sizeof(double) * init.theta.size()) == 0);
    for (size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i].total <= r.trace[i - 1].total);
}

TEST_CASE("hinge pushes an undersized scale upward, never down") {
    Scene s = make_scene(27, 128);
    FitTargets t = s.targets;
    t.lambda = 10.0;
    t.scale_threshold = s.gt.cam_scale * 1.05;  // d above the true scale
    BodyParams init = s.gt;
    init.cam_scale = 0.6 * t.scale_threshold;  // s well below d
    RefineResult r = refine(s.body, init, s.cam, t);
    CHECK(r.params.cam_scale >= init.cam_scale);
}

TEST_CASE("refine_cycles: T=1 equals a single refine") {
    Scene s = make_scene(28, 128);
    BodyParams init = perturb(s, 5);
    NormalProvider provider = [&](const BodyRenderState&) { return as_maps(s.targets); };
    FitKnobs knobs{s.targets.scale_threshold, s.targets.lambda};
    RefineCyclesResult cyc = refine_cycles(s.body, init, s.cam, provider, knobs, 1);
    RefineResult one = refine(s.body, init, s.cam, s.targets);
    CHECK(cyc.params.beta == one.params.beta);
    CHECK(cyc.params.trans == one.params.trans);
    CHECK(cyc.params.cam_scale == one.params.cam_scale);
}

TEST_CASE("refine_cycles with a constant provider matches a bigger single budget") {
    Scene s = make_scene(30, 128);
    BodyParams init = perturb(s, 9);
    NormalProvider provider = [&](const BodyRenderState&) { return as_maps(s.targets); };
    OptimizerConfig cfg;
    RefineCyclesResult ten = refine_cycles(s.body, init, s.cam, provider, FitKnobs{}, 10, cfg);

    OptimizerConfig big = cfg;
    big.max_sweeps = 10 * cfg.max_sweeps;
    big.max_evals = 10 * cfg.max_evals;
    RefineResult one = refine(s.body, init, s.cam, s.targets, big);

    CHECK(std::abs(ten.cycle_losses.back() - one.trace.back().total) < 5e-3);
    for (size_t i = 1; i < ten.cycle_losses.size(); ++i)
        CHECK(ten.cycle_losses[i] <= ten.cycle_losses[i - 1] + 1e-12);
}

TEST_CASE("refine_cycles rejects bad providers and bad T") {
    Scene s = make_scene(31, 96);
    NormalProvider bad = [&](const BodyRenderState&) {
        ClothedMaps maps;
        maps.front_normal = ImageF(32, 32, 3);
        maps.front_silhouette = MaskU8(32, 32);
        return maps;
    };
    CHECK_THROWS_AS(refine_cycles(s.body, s.gt, s.cam, bad, FitKnobs{}, 2),
                    std::invalid_argument);
    NormalProvider ok = [&](const BodyRenderState&) { return as_maps(s.targets); };
    CHECK_THROWS_AS(refine_cycles(s.body, s.gt, s.cam, ok, FitKnobs{}, 0),
                    std::invalid_argument);
}

TEST_SUITE_END();
