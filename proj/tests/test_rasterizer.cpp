#include "tdg/rasterizer.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "tdg/body_model.hpp"
#include "test_util.hpp"

using namespace tdg;

TEST_SUITE_BEGIN("rasterizer");

TEST_CASE("projection: center, linearity, back-view mirror") {
    WeakPerspectiveCam cam = WeakPerspectiveCam::centered(64, 80, 10.0);
    Points pts(3, 3);
    pts << 0, 0, 0, 1, 2, 3, -1, 0.5, -2;
    Eigen::Matrix<double, Eigen::Dynamic, 2> px;
    Eigen::VectorXd depth;
    project(cam, pts, px, depth);
    CHECK(px(0, 0) == doctest::Approx(40.0));
    CHECK(px(0, 1) == doctest::Approx(32.0));
    CHECK(depth(0) == doctest::Approx(0.0));

    // doubling scale doubles pixel distances
    Eigen::Matrix<double, Eigen::Dynamic, 2> px2;
    Eigen::VectorXd d2;
    project(cam.with_scale(20.0), pts, px2, d2);
    double dist1 = (px.row(1) - px.row(2)).norm();
    double dist2 = (px2.row(1) - px2.row(2)).norm();
    CHECK(dist2 == doctest::Approx(2.0 * dist1));

    // Back view of (x,y,z) lands where the front view of (-x,y,-z) lands
    Points mirrored = pts;
    mirrored.col(0) *= -1;
    mirrored.col(2) *= -1;
    Eigen::Matrix<double, Eigen::Dynamic, 2> pxb, pxm;
    Eigen::VectorXd db, dm;
    project(cam.with_view(ViewSide::Back), pts, pxb, db);
    project(cam, mirrored, pxm, dm);
    CHECK((pxb - pxm).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK((db - dm).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("empty mesh renders empty targets") {
    TriMesh mesh;
    RenderTargets rt = rasterize(mesh, WeakPerspectiveCam::centered(16, 16, 1.0));
    CHECK(rt.silhouette.count_nonzero() == 0);
    for (float d : rt.depth.data) CHECK(std::isinf(d));
}

// Brute-force coverage oracle: a pixel center is inside the triangle iff all
// barycentric coordinates are nonnegative; boundary pixels resolved with the
// same top-left convention, computed directly from the 2D vertices.
namespace {

bool oracle_covers(double ax, double ay, double bx, double by, double cx, double cy, double px,
                   double py) {
    auto cross = [](double ox, double oy, double ux, double uy, double vx, double vy) {
        return (ux - ox) * (vy - oy) - (uy - oy) * (vx - ox);
    };
    double area = cross(ax, ay, bx, by, cx, cy);
    if (area == 0) return false;
    if (area < 0) {
        std::swap(bx, cx);
        std::swap(by, cy);
    }
    double w0 = cross(bx, by, cx, cy, px, py);
    double w1 = cross(cx, cy, ax, ay, px, py);
    double w2 = cross(ax, ay, bx, by, px, py);
    auto top_left = [](double ex, double ey, double fx, double fy) {
        if (ey == fy) return fx < ex;
        return fy < ey;
    };
    bool in0 = w0 > 0 || (w0 == 0 && top_left(bx, by, cx, cy));
    bool in1 = w1 > 0 || (w1 == 0 && top_left(cx, cy, ax, ay));
    bool in2 = w2 > 0 || (w2 == 0 && top_left(ax, ay, bx, by));
    return in0 && in1 && in2;
}

}  // namespace

TEST_CASE("single triangle coverage matches per-pixel barycentric oracle") {
    // axis-aligned triangle at known pixel coordinates (scale 1, no offset)
    WeakPerspectiveCam cam;
    cam.height = 32;
    cam.width = 32;
    cam.scale = 1.0;
    TriMesh mesh;
    mesh.vertices.resize(3, 3);
    mesh.vertices << 4.0, 3.0, 0.0, 27.0, 5.0, 0.0, 9.0, 28.0, 0.0;
    mesh.faces.resize(1, 3);
    mesh.faces << 0, 1, 2;
    RenderTargets rt = rasterize(mesh, cam, RenderWant{false, false});

    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            bool expect = oracle_covers(4.0, 3.0, 27.0, 5.0, 9.0, 28.0, x + 0.5, y + 0.5);
            CHECK(static_cast<bool>(rt.silhouette.at(y, x)) == expect);
        }
}

TEST_CASE("z-buffer keeps the nearer of two stacked quads") {
    TriMesh mesh;
    mesh.vertices.resize(8, 3);
    // near quad at z=1, far quad at z=2, overlapping in the pixel range [2,12)
    mesh.vertices << 2, 2, 1, 12, 2, 1, 12, 12, 1, 2, 12, 1,  //
        2, 2, 2, 12, 2, 2, 12, 12, 2, 2, 12, 2;
    mesh.faces.resize(4, 3);
    mesh.faces << 0, 1, 2, 0, 2, 3, 4, 5, 6, 4, 6, 7;
    WeakPerspectiveCam cam;
    cam.height = 16;
    cam.width = 16;
    cam.scale = 1.0;
    RenderTargets rt = rasterize(mesh, cam, RenderWant{false, false});
    for (int y = 3; y < 11; ++y)
        for (int x = 3; x < 11; ++x) CHECK(rt.depth.at(y, x) == doctest::Approx(1.0));
}

TEST_CASE("flat quad with authored normals renders a constant normal map") {
    TriMesh mesh;
    mesh.vertices.resize(4, 3);
    mesh.vertices << 2, 2, 0, 14, 2, 0, 14, 14, 0, 2, 14, 0;
    mesh.faces.resize(2, 3);
    mesh.faces << 0, 1, 2, 0, 2, 3;
    mesh.normals.resize(4, 3);
    for (int v = 0; v < 4; ++v) mesh.normals.row(v) << 0, 0, 1;
    WeakPerspectiveCam cam;
    cam.height = 16;
    cam.width = 16;
    cam.scale = 1.0;
    RenderTargets rt = rasterize(mesh, cam);
    REQUIRE(rt.silhouette.count_nonzero() > 0);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (rt.silhouette.at(y, x)) {
                CHECK(rt.normal.at(y, x, 0) == doctest::Approx(0.0).epsilon(1e-4));
                CHECK(rt.normal.at(y, x, 1) == doctest::Approx(0.0).epsilon(1e-4));
                CHECK(rt.normal.at(y, x, 2) == doctest::Approx(1.0).epsilon(1e-4));
            }
}

TEST_CASE("silhouette/depth consistency and unit normals on random bodies") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        ParametricBody body = make_toy_body(2 + static_cast<int>(rng() % 20), 6, rng());
        SkinnedMesh posed = skin(body, BodyParams::rest(body));
        WeakPerspectiveCam cam = WeakPerspectiveCam::centered(96, 96, 40.0);
        RenderTargets rt = rasterize(posed.as_tri_mesh(), cam);
        for (int y = 0; y < 96; ++y)
            for (int x = 0; x < 96; ++x) {
                bool fg = rt.silhouette.at(y, x) != 0;
                CHECK(fg == std::isfinite(rt.depth.at(y, x)));
                double n = std::hypot(std::hypot(rt.normal.at(y, x, 0), rt.normal.at(y, x, 1)),
                                      rt.normal.at(y, x, 2));
                if (fg)
                    CHECK(std::abs(n - 1.0) < 1e-4);
                else
                    CHECK(n == 0.0);
            }
    }
}

TEST_CASE("rasterization is bit-identical across repeated runs") {
    ParametricBody body = make_toy_body(22, 12, 7);
    SkinnedMesh posed = skin(body, BodyParams::rest(body));
    WeakPerspectiveCam cam = WeakPerspectiveCam::centered(128, 128, 55.0);
    RenderTargets a = rasterize(posed.as_tri_mesh(), cam);
    RenderTargets b = rasterize(posed.as_tri_mesh(), cam);
    CHECK(a.silhouette.data == b.silhouette.data);
    CHECK(a.depth.data == b.depth.data);
    CHECK(a.normal.data == b.normal.data);
}

TEST_CASE("degenerate triangles are skipped and counted") {
    TriMesh mesh;
    mesh.vertices.resize(3, 3);
    mesh.vertices << 1, 1, 0, 5, 5, 0, 9, 9, 0;  // collinear
    mesh.faces.resize(1, 3);
    mesh.faces << 0, 1, 2;
    WeakPerspectiveCam cam;
    cam.height = 16;
    cam.width = 16;
    cam.scale = 1.0;
    RenderTargets rt = rasterize(mesh, cam, RenderWant{false, false});
    CHECK(rt.degenerate_triangles == 1);
    CHECK(rt.silhouette.count_nonzero() == 0);
}

TEST_CASE("color rendering requires vertex colors") {
    TriMesh mesh;
    mesh.vertices.resize(3, 3);
    mesh.vertices << 0, 0, 0, 4, 0, 0, 0, 4, 0;
    mesh.faces.resize(1, 3);
    mesh.faces << 0, 1, 2;
    WeakPerspectiveCam cam;
    cam.height = 8;
    cam.width = 8;
    cam.scale = 1.0;
    CHECK_THROWS_AS(rasterize(mesh, cam, RenderWant{false, true}), std::invalid_argument);
}

TEST_SUITE_END();
