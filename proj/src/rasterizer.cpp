#include "tdg/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdg {

WeakPerspectiveCam WeakPerspectiveCam::centered(int height, int width, double scale,
                                                ViewSide view) {
    WeakPerspectiveCam cam;
    cam.height = height;
    cam.width = width;
    cam.scale = scale;
    cam.principal_offset = Eigen::Vector2d(width / 2.0, height / 2.0);
    cam.view = view;
    return cam;
}

void WeakPerspectiveCam::validate() const {
    if (scale <= 0) throw std::invalid_argument("camera: scale must be positive");
    if (height < 1 || width < 1) throw std::invalid_argument("camera: bad image size");
}

WeakPerspectiveCam WeakPerspectiveCam::with_scale(double s) const {
    WeakPerspectiveCam c = *this;
    c.scale = s;
    return c;
}

WeakPerspectiveCam WeakPerspectiveCam::with_view(ViewSide v) const {
    WeakPerspectiveCam c = *this;
    c.view = v;
    return c;
}

void project(const WeakPerspectiveCam& cam, const Points& points,
             Eigen::Matrix<double, Eigen::Dynamic, 2>& pixels, Eigen::VectorXd& depth) {
    cam.validate();
    const bool back = cam.view == ViewSide::Back;
    const int n = static_cast<int>(points.rows());
    pixels.resize(n, 2);
    depth.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = back ? -points(i, 0) : points(i, 0);
        double z = back ? -points(i, 2) : points(i, 2);
        pixels(i, 0) = cam.scale * x + cam.principal_offset.x();
        pixels(i, 1) = cam.scale * points(i, 1) + cam.principal_offset.y();
        depth(i) = z;
    }
}

namespace {

inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Top-left fill rule on the (u, v) lattice for a counter-clockwise triangle:
// an edge is top if horizontal and pointing in -u, left if pointing in -v.
inline bool edge_accepts_zero(double ax, double ay, double bx, double by) {
    if (ay == by) return bx < ax;
    return by < ay;
}

}  // namespace

RenderTargets rasterize(const TriMesh& mesh, const WeakPerspectiveCam& cam,
                        const RenderWant& want) {
    cam.validate();
    return rasterize_region(mesh, cam, want, 0, 0, cam.width, cam.height);
}

RenderTargets rasterize_region(const TriMesh& mesh, const WeakPerspectiveCam& cam,
                               const RenderWant& want, int win_x0, int win_y0, int win_w,
                               int win_h) {
    cam.validate();
    if (want.color && !mesh.has_colors())
        throw std::invalid_argument("rasterize: color requested but mesh has no colors");
    if (win_x0 < 0 || win_y0 < 0 || win_w < 0 || win_h < 0 || win_x0 + win_w > cam.width ||
        win_y0 + win_h > cam.height)
        throw std::invalid_argument("rasterize: window outside the image");

    RenderTargets out;
    out.silhouette = MaskU8(win_h, win_w, 0);
    out.depth = ImageF(win_h, win_w, 1, pos_inf());
    if (want.normal) out.normal = ImageF(win_h, win_w, 3, 0.0f);
    if (want.color) out.color = ImageF(win_h, win_w, 3, 0.0f);

    if (mesh.vertex_count() == 0 || mesh.face_count() == 0 || win_w == 0 || win_h == 0)
        return out;

    Points normals;
    if (want.normal)
        normals = mesh.has_normals() ? mesh.normals : vertex_normals(mesh.vertices, mesh.faces);

    Eigen::Matrix<double, Eigen::Dynamic, 2> px;
    Eigen::VectorXd depth;
    project(cam, mesh.vertices, px, depth);
    const bool back = cam.view == ViewSide::Back;

    for (int f = 0; f < mesh.face_count(); ++f) {
        int ia = mesh.faces(f, 0), ib = mesh.faces(f, 1), ic = mesh.faces(f, 2);
        double ax = px(ia, 0), ay = px(ia, 1);
        double bx = px(ib, 0), by = px(ib, 1);
        double cx = px(ic, 0), cy = px(ic, 1);
        double area2 = edge_fn(ax, ay, bx, by, cx, cy);
        if (area2 == 0.0) {
            out.degenerate_triangles++;
            continue;
        }
        if (area2 < 0) {  // make counter-clockwise in (u, v)
            std::swap(ib, ic);
            std::swap(bx, cx);
            std::swap(by, cy);
            area2 = -area2;
        }

        int x0 = std::max(win_x0, static_cast<int>(std::floor(std::min({ax, bx, cx}) - 0.5)));
        int x1 = std::min(win_x0 + win_w - 1,
                          static_cast<int>(std::ceil(std::max({ax, bx, cx}) - 0.5)));
        int y0 = std::max(win_y0, static_cast<int>(std::floor(std::min({ay, by, cy}) - 0.5)));
        int y1 = std::min(win_y0 + win_h - 1,
                          static_cast<int>(std::ceil(std::max({ay, by, cy}) - 0.5)));
        if (x0 > x1 || y0 > y1) continue;

        bool za = edge_accepts_zero(bx, by, cx, cy);
        bool zb = edge_accepts_zero(cx, cy, ax, ay);
        bool zc = edge_accepts_zero(ax, ay, bx, by);

        for (int y = y0; y <= y1; ++y) {
            double pyc = y + 0.5;
            for (int x = x0; x <= x1; ++x) {
                double pxc = x + 0.5;
                double wa = edge_fn(bx, by, cx, cy, pxc, pyc);
                double wb = edge_fn(cx, cy, ax, ay, pxc, pyc);
                double wc = edge_fn(ax, ay, bx, by, pxc, pyc);
                bool inside = (wa > 0 || (wa == 0 && za)) && (wb > 0 || (wb == 0 && zb)) &&
                              (wc > 0 || (wc == 0 && zc));
                if (!inside) continue;
                double la = wa / area2, lb = wb / area2, lc = wc / area2;
                double z = la * depth(ia) + lb * depth(ib) + lc * depth(ic);
                const int ly = y - win_y0, lx = x - win_x0;
                if (z >= out.depth.at(ly, lx)) continue;
                out.depth.at(ly, lx) = static_cast<float>(z);
                out.silhouette.at(ly, lx) = 1;
                if (want.normal) {
                    Vec3 n = la * normals.row(ia).transpose() + lb * normals.row(ib).transpose() +
                             lc * normals.row(ic).transpose();
                    double len = n.norm();
                    if (len < 1e-12) {
                        // interpolation collapsed; fall back to the face normal
                        Vec3 e1 = (mesh.vertices.row(ib) - mesh.vertices.row(ia)).transpose();
                        Vec3 e2 = (mesh.vertices.row(ic) - mesh.vertices.row(ia)).transpose();
                        n = e1.cross(e2);
                        len = n.norm();
                    }
                    if (len > 1e-12) n /= len;
                    if (back) {
                        n.x() = -n.x();
                        n.z() = -n.z();
                    }
                    out.normal.at(ly, lx, 0) = static_cast<float>(n.x());
                    out.normal.at(ly, lx, 1) = static_cast<float>(n.y());
                    out.normal.at(ly, lx, 2) = static_cast<float>(n.z());
                }
                if (want.color) {
                    for (int ch = 0; ch < 3; ++ch) {
                        double c = la * mesh.colors(ia, ch) + lb * mesh.colors(ib, ch) +
                                   lc * mesh.colors(ic, ch);
                        out.color.at(ly, lx, ch) = static_cast<float>(c);
                    }
                }
            }
        }
    }
    return out;
}

double mask_iou(const MaskU8& a, const MaskU8& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mask_iou: shape mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        bool pa = a.data[i] != 0, pb = b.data[i] != 0;
        inter += (pa && pb);
        uni += (pa || pb);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace tdg
