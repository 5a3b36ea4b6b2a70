#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdg/image.hpp"
#include "tdg/mesh.hpp"
#include "tdg/rasterizer.hpp"

namespace tdg {

enum class BoundaryMode {
    FreeOffset,   // per-component gauge left free (zero-mean per component)
    PinToPrior,   // silhouette-boundary pixels fixed to the prior (requires one)
};

struct IntegrationConfig {
    double prior_weight = 0.0;  // mu, quadratic coupling to the depth prior
    BoundaryMode boundary = BoundaryMode::FreeOffset;
    int max_solver_iters = 20000;
    double tolerance = 1e-9;  // relative residual of the normal equations
};

struct IntegrationResult {
    ImageF depth;        // +inf outside the silhouette
    int components = 0;  // disconnected silhouette pieces, solved independently
    int iterations = 0;
    double residual = 0.0;  // final relative residual
};

// Least-squares solution of dz/du = -nx/nz, dz/dv = -ny/nz over silhouette
// pixels (midpoint-averaged edge equations), plus mu*(z - prior)^2 when a
// prior is given. |nz| is clamped to 0.05. Conjugate gradient on the normal
// equations, Jacobi-preconditioned, deterministic edge order.
IntegrationResult integrate_normals(const ImageF& normal_map, const MaskU8& silhouette,
                                    const ImageF* depth_prior, const IntegrationConfig& cfg);

enum class VertexOrigin : uint8_t { FrontSurface = 0, BackSurface = 1, BodyInfill = 2 };

struct ClothedMesh {
    Points vertices;
    Faces faces;
    Points colors;  // [0,1]
    std::vector<VertexOrigin> origin;
    // pixel-center coordinates each front/back vertex was textured from
    // ((-1,-1) for infill vertices)
    Eigen::Matrix<double, Eigen::Dynamic, 2> source_pixels;

    // diagnostics
    int clamped_pixels = 0;   // pixels where back < front after alignment
    int skipped_pixels = 0;   // isolated silhouette pixels with no cell
    double back_alignment_shift = 0.0;

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    TriMesh as_tri_mesh() const;
};

// Two pixel-grid sheets joined along the silhouette boundary. The back sheet
// is first shifted so the mean silhouette-boundary depths of both sheets
// agree; pixels still violating front <= back are clamped to the midpoint
// and counted. Vertices live in pixel space (x = u, y = v, z = depth) and
// are colored by bilinear lookup into source_image at their pixel (recorded
// in source_pixels). Boundary vertices are pushed half a pixel outward so
// the sheets span the full silhouette rather than stopping at the last
// pixel centers.
ClothedMesh mesh_from_depth(const ImageF& front_depth, const ImageF& back_depth,
                            const MaskU8& silhouette, const ImageF& source_image);

struct InfillConfig {
    double stitch_radius = 0.0;  // snap appended vertices to clothed vertices within this radius
};

struct InfillStats {
    int triangles_added = 0;
    int vertices_added = 0;
    int stitched_vertices = 0;
};

// Appends body triangles invisible in both views: the combined scene
// (clothed mesh plus body) is z-buffered per view and a triangle counts as
// visible where it wins at least one pixel. Appended vertices are colored
// (n+1)/2 from the body normals and tagged BodyInfill; vertices within
// stitch_radius of a clothed vertex are snapped onto it.
ClothedMesh infill_from_body(const ClothedMesh& mesh, const TriMesh& body_mesh,
                             const WeakPerspectiveCam& front_cam,
                             const WeakPerspectiveCam& back_cam,
                             const InfillConfig& cfg = {}, InfillStats* stats = nullptr);

// Origin tags plus diagnostics as a JSON sidecar next to an exported OBJ.
void save_clothed_mesh_sidecar(const std::string& path, const ClothedMesh& mesh);

}  // namespace tdg
