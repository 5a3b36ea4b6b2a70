#pragma once

#include <Eigen/Core>

#include "tdg/image.hpp"
#include "tdg/mesh.hpp"

namespace tdg {

enum class ViewSide { Front, Back };

// Orthographic projection scaled by `scale` (pixels per meter) and shifted
// by the principal offset. Front: u = s*x + ox, v = s*y + oy, depth = z.
// Back mirrors x and negates z, so front and back maps share the pixel
// lattice once the back image is flipped in x.
struct WeakPerspectiveCam {
    double scale = 1.0;
    Eigen::Vector2d principal_offset = Eigen::Vector2d::Zero();
    int height = 0;
    int width = 0;
    ViewSide view = ViewSide::Front;

    static WeakPerspectiveCam centered(int height, int width, double scale,
                                       ViewSide view = ViewSide::Front);
    void validate() const;
    WeakPerspectiveCam with_scale(double s) const;
    WeakPerspectiveCam with_view(ViewSide v) const;
};

// silhouette(p) = 1 iff depth(p) is finite; normals are unit length inside
// the silhouette and zero outside.
struct RenderTargets {
    MaskU8 silhouette;
    ImageF normal;  // h x w x 3; empty when not requested
    ImageF depth;   // h x w, +inf background
    ImageF color;   // h x w x 3; empty when not requested
    int degenerate_triangles = 0;
};

struct RenderWant {
    bool normal = true;
    bool color = false;
};

// Pixel coordinates and view-space depth for each point.
void project(const WeakPerspectiveCam& cam, const Points& points,
             Eigen::Matrix<double, Eigen::Dynamic, 2>& pixels, Eigen::VectorXd& depth);

// Nearest-surface z-buffer; pixel centers at half-integer coordinates, a
// pixel belongs to a triangle if its center is inside (inclusive on top-left
// edges). Zero-area triangles are skipped and counted. If normals are
// requested and the mesh carries none, area-weighted vertex normals are
// computed; back-view normals are rotated into the back camera's frame
// (x and z negated). Requesting color without per-vertex colors throws.
RenderTargets rasterize(const TriMesh& mesh, const WeakPerspectiveCam& cam,
                        const RenderWant& want = {});

// Same rasterization restricted to the pixel window [x0, x0+w) x [y0, y0+h);
// all arithmetic stays in full-image coordinates, so coverage inside the
// window is bit-identical to the full render. Output images are h x w.
RenderTargets rasterize_region(const TriMesh& mesh, const WeakPerspectiveCam& cam,
                               const RenderWant& want, int x0, int y0, int w, int h);

// Intersection-over-union of two masks (1.0 when both are empty).
double mask_iou(const MaskU8& a, const MaskU8& b);

}  // namespace tdg
