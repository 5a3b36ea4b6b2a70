#include "tdg/surface_recon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace tdg {

namespace {

constexpr double kNzClamp = 0.05;

struct Grid {
    int h = 0, w = 0;
    std::vector<int> index;   // pixel -> unknown id, -1 outside
    std::vector<int> pixels;  // unknown id -> y * w + x

    int at(int y, int x) const { return index[static_cast<size_t>(y) * w + x]; }
};

Grid build_grid(const MaskU8& sil) {
    Grid g;
    g.h = sil.h;
    g.w = sil.w;
    g.index.assign(static_cast<size_t>(sil.h) * sil.w, -1);
    for (int y = 0; y < sil.h; ++y)
        for (int x = 0; x < sil.w; ++x)
            if (sil.at(y, x)) {
                g.index[static_cast<size_t>(y) * sil.w + x] = static_cast<int>(g.pixels.size());
                g.pixels.push_back(y * sil.w + x);
            }
    return g;
}

int count_components(const Grid& g) {
    const int n = static_cast<int>(g.pixels.size());
    std::vector<int> comp(n, -1);
    int count = 0;
    std::vector<int> stack;
    for (int seed = 0; seed < n; ++seed) {
        if (comp[seed] >= 0) continue;
        comp[seed] = count;
        stack.push_back(seed);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            int y = g.pixels[u] / g.w, x = g.pixels[u] % g.w;
            const int dy[4] = {-1, 1, 0, 0};
            const int dx[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                int ny = y + dy[k], nx = x + dx[k];
                if (ny < 0 || ny >= g.h || nx < 0 || nx >= g.w) continue;
                int v = g.at(ny, nx);
                if (v >= 0 && comp[v] < 0) {
                    comp[v] = count;
                    stack.push_back(v);
                }
            }
        }
        ++count;
    }
    return count;
}

struct EdgeList {
    // edge k couples unknowns a[k] < b[k] with target difference g[k]
    std::vector<int> a, b;
    std::vector<double> g;
};

double target_gradient(const ImageF& nrm, int y, int x, int axis) {
    double nz = nrm.at(y, x, 2);
    double sign = nz < 0 ? -1.0 : 1.0;
    if (std::abs(nz) < kNzClamp) nz = sign * kNzClamp;
    return -static_cast<double>(nrm.at(y, x, axis)) / nz;
}

EdgeList build_edges(const Grid& grid, const ImageF& nrm) {
    EdgeList e;
    for (int y = 0; y < grid.h; ++y)
        for (int x = 0; x < grid.w; ++x) {
            int u = grid.at(y, x);
            if (u < 0) continue;
            if (x + 1 < grid.w) {
                int v = grid.at(y, x + 1);
                if (v >= 0) {
                    double p = 0.5 * (target_gradient(nrm, y, x, 0) +
                                      target_gradient(nrm, y, x + 1, 0));
                    e.a.push_back(u);
                    e.b.push_back(v);
                    e.g.push_back(p);
                }
            }
            if (y + 1 < grid.h) {
                int v = grid.at(y + 1, x);
                if (v >= 0) {
                    double q = 0.5 * (target_gradient(nrm, y, x, 1) +
                                      target_gradient(nrm, y + 1, x, 1));
                    e.a.push_back(u);
                    e.b.push_back(v);
                    e.g.push_back(q);
                }
            }
        }
    return e;
}

bool is_boundary_pixel(const MaskU8& sil, int y, int x) {
    if (y == 0 || y == sil.h - 1 || x == 0 || x == sil.w - 1) return true;
    return !sil.at(y - 1, x) || !sil.at(y + 1, x) || !sil.at(y, x - 1) || !sil.at(y, x + 1);
}

}  // namespace

IntegrationResult integrate_normals(const ImageF& normal_map, const MaskU8& silhouette,
                                    const ImageF* depth_prior, const IntegrationConfig& cfg) {
    if (normal_map.c != 3) throw std::invalid_argument("integrate: normal map needs 3 channels");
    if (normal_map.h != silhouette.h || normal_map.w != silhouette.w)
        throw std::invalid_argument("integrate: normal/silhouette dimensions differ");
    if (depth_prior &&
        (depth_prior->h != silhouette.h || depth_prior->w != silhouette.w || depth_prior->c != 1))
        throw std::invalid_argument("integrate: prior dimensions differ");
    if (cfg.tolerance <= 0) throw std::invalid_argument("integrate: tolerance must be positive");
    if (cfg.boundary == BoundaryMode::PinToPrior && !depth_prior)
        throw std::invalid_argument("integrate: PinToPrior requires a depth prior");

    Grid grid = build_grid(silhouette);
    const int n = static_cast<int>(grid.pixels.size());

    IntegrationResult out;
    out.depth = ImageF(silhouette.h, silhouette.w, 1, pos_inf());
    out.components = count_components(grid);
    if (n == 0) return out;

    EdgeList edges = build_edges(grid, normal_map);
    const double mu = cfg.prior_weight;

    // Fixed (eliminated) unknowns for PinToPrior.
    std::vector<char> fixed(n, 0);
    Eigen::VectorXd fixed_value = Eigen::VectorXd::Zero(n);
    if (cfg.boundary == BoundaryMode::PinToPrior) {
        for (int u = 0; u < n; ++u) {
            int y = grid.pixels[u] / grid.w, x = grid.pixels[u] % grid.w;
            if (is_boundary_pixel(silhouette, y, x)) {
                double pv = depth_prior->at(y, x);
                if (std::isfinite(pv)) {
                    fixed[u] = 1;
                    fixed_value[u] = pv;
                }
            }
        }
    }

    // Normal equations: (G^T G + mu I) z = G^T g + mu prior; the mu term
    // exists only where the prior is given and finite.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    const size_t m = edges.a.size();
    for (size_t k = 0; k < m; ++k) {
        int a = edges.a[k], b = edges.b[k];
        diag[a] += 1.0;
        diag[b] += 1.0;
        rhs[a] -= edges.g[k];
        rhs[b] += edges.g[k];
    }
    if (depth_prior && mu > 0) {
        for (int u = 0; u < n; ++u) {
            int y = grid.pixels[u] / grid.w, x = grid.pixels[u] % grid.w;
            double pv = depth_prior->at(y, x);
            if (std::isfinite(pv)) {
                diag[u] += mu;
                rhs[u] += mu * pv;
            }
        }
    }

    auto apply = [&](const Eigen::VectorXd& v, Eigen::VectorXd& result) {
        for (int u = 0; u < n; ++u) result[u] = diag[u] * v[u];
        for (size_t k = 0; k < m; ++k) {
            int a = edges.a[k], b = edges.b[k];
            result[a] -= v[b];
            result[b] -= v[a];
        }
    };
    // A restricted to the free subspace (fixed coordinates masked to zero).
    auto apply_free = [&](const Eigen::VectorXd& v, Eigen::VectorXd& result) {
        apply(v, result);
        for (int u = 0; u < n; ++u)
            if (fixed[u]) result[u] = 0.0;
    };

    // Eliminate fixed unknowns: b_free = rhs - A * fixed_value on free rows.
    Eigen::VectorXd b = rhs;
    if (cfg.boundary == BoundaryMode::PinToPrior) {
        Eigen::VectorXd av(n);
        apply(fixed_value, av);
        b -= av;
        for (int u = 0; u < n; ++u)
            if (fixed[u]) b[u] = 0.0;
    }

    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r = b, p(n), ap(n), mr(n);
    double bnorm = b.norm();
    if (bnorm == 0.0) bnorm = 1.0;
    Eigen::VectorXd inv_diag(n);
    for (int u = 0; u < n; ++u)
        inv_diag[u] = (fixed[u] || diag[u] <= 0.0) ? 0.0 : 1.0 / diag[u];

    mr = inv_diag.cwiseProduct(r);
    p = mr;
    double rz = r.dot(mr);
    int iter = 0;
    double rel = r.norm() / bnorm;
    while (rel > cfg.tolerance && iter < cfg.max_solver_iters && rz > 0.0) {
        apply_free(p, ap);
        double denom = p.dot(ap);
        if (denom <= 0.0) break;
        double alpha = rz / denom;
        z += alpha * p;
        r -= alpha * ap;
        mr = inv_diag.cwiseProduct(r);
        double rz_new = r.dot(mr);
        p = mr + (rz_new / rz) * p;
        rz = rz_new;
        rel = r.norm() / bnorm;
        ++iter;
    }
    for (int u = 0; u < n; ++u)
        if (fixed[u]) z[u] = fixed_value[u];
    out.iterations = iter;
    out.residual = rel;

    for (int u = 0; u < n; ++u) {
        int y = grid.pixels[u] / grid.w, x = grid.pixels[u] % grid.w;
        out.depth.at(y, x) = static_cast<float>(fixed[u] ? fixed_value[u] : z[u]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Meshing
// ---------------------------------------------------------------------------

TriMesh ClothedMesh::as_tri_mesh() const {
    TriMesh m;
    m.vertices = vertices;
    m.faces = faces;
    m.colors = colors;
    return m;
}

ClothedMesh mesh_from_depth(const ImageF& front_depth, const ImageF& back_depth,
                            const MaskU8& silhouette, const ImageF& source_image) {
    if (front_depth.h != silhouette.h || front_depth.w != silhouette.w ||
        back_depth.h != silhouette.h || back_depth.w != silhouette.w)
        throw std::invalid_argument("mesh_from_depth: dimensions differ");
    if (source_image.c != 3)
        throw std::invalid_argument("mesh_from_depth: source image needs 3 channels");

    const int H = silhouette.h, W = silhouette.w;
    Grid grid = build_grid(silhouette);
    const int n = static_cast<int>(grid.pixels.size());

    ClothedMesh mesh;
    if (n == 0) return mesh;

    // Register the back sheet: match mean silhouette-boundary depth.
    double front_boundary = 0.0, back_boundary = 0.0;
    int boundary_count = 0;
    for (int u = 0; u < n; ++u) {
        int y = grid.pixels[u] / W, x = grid.pixels[u] % W;
        if (is_boundary_pixel(silhouette, y, x)) {
            front_boundary += front_depth.at(y, x);
            back_boundary += back_depth.at(y, x);
            ++boundary_count;
        }
    }
    double shift = boundary_count ? (front_boundary - back_boundary) / boundary_count : 0.0;
    mesh.back_alignment_shift = shift;

    std::vector<double> fz(n), bz(n);
    for (int u = 0; u < n; ++u) {
        int y = grid.pixels[u] / W, x = grid.pixels[u] % W;
        fz[u] = front_depth.at(y, x);
        bz[u] = back_depth.at(y, x) + shift;
        if (bz[u] < fz[u]) {
            double mid = 0.5 * (fz[u] + bz[u]);
            fz[u] = bz[u] = mid;
            mesh.clamped_pixels++;
        }
    }

    // 2D cell triangulation shared by both sheets (front orientation; the
    // back sheet reverses winding). Cells with >= 3 in-silhouette corners.
    std::vector<std::array<int, 3>> cells;
    for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x + 1 < W; ++x) {
            int a = grid.at(y, x), b = grid.at(y, x + 1);
            int c = grid.at(y + 1, x), d = grid.at(y + 1, x + 1);
            int present = (a >= 0) + (b >= 0) + (c >= 0) + (d >= 0);
            if (present == 4) {
                cells.push_back({a, c, d});
                cells.push_back({a, d, b});
            } else if (present == 3) {
                if (a < 0) cells.push_back({c, d, b});
                else if (b < 0) cells.push_back({a, c, d});
                else if (c < 0) cells.push_back({a, d, b});
                else cells.push_back({a, c, b});
            }
        }

    // Drop silhouette pixels referenced by no cell (isolated specks).
    std::vector<char> used(n, 0);
    for (const auto& t : cells)
        for (int k = 0; k < 3; ++k) used[t[k]] = 1;
    std::vector<int> remap(n, -1);
    int live = 0;
    for (int u = 0; u < n; ++u) {
        if (used[u])
            remap[u] = live++;
        else
            mesh.skipped_pixels++;
    }
    if (live == 0) return mesh;  // degenerate input, e.g. one-pixel silhouette

    const int V = 2 * live;  // front sheet then back sheet
    mesh.vertices.resize(V, 3);
    mesh.colors.resize(V, 3);
    mesh.origin.resize(V);
    mesh.source_pixels.resize(V, 2);
    for (int u = 0; u < n; ++u) {
        if (remap[u] < 0) continue;
        int y = grid.pixels[u] / W, x = grid.pixels[u] % W;
        double px = x + 0.5, py = y + 0.5;
        int fi = remap[u], bi = remap[u] + live;
        // boundary vertices extend half a pixel toward the silhouette edge
        double ox = 0.0, oy = 0.0;
        auto outside = [&](int yy, int xx) {
            return yy < 0 || yy >= H || xx < 0 || xx >= W || !silhouette.at(yy, xx);
        };
        if (outside(y, x - 1)) ox -= 0.5;
        if (outside(y, x + 1)) ox += 0.5;
        if (outside(y - 1, x)) oy -= 0.5;
        if (outside(y + 1, x)) oy += 0.5;
        mesh.vertices.row(fi) << px + ox, py + oy, fz[u];
        mesh.vertices.row(bi) << px + ox, py + oy, bz[u];
        mesh.source_pixels.row(fi) << px, py;
        mesh.source_pixels.row(bi) << px, py;
        for (int c = 0; c < 3; ++c) {
            float col = source_image.sample(px, py, c);
            mesh.colors(fi, c) = col;
            mesh.colors(bi, c) = col;
        }
        mesh.origin[fi] = VertexOrigin::FrontSurface;
        mesh.origin[bi] = VertexOrigin::BackSurface;
    }

    std::vector<std::array<int, 3>> tris;
    tris.reserve(cells.size() * 2 + 256);
    // directed boundary-edge map of the front triangulation
    std::map<std::pair<int, int>, int> edge_use;
    for (const auto& t : cells) {
        int a = remap[t[0]], b = remap[t[1]], c = remap[t[2]];
        tris.push_back({a, b, c});                          // front sheet
        tris.push_back({a + live, c + live, b + live});     // back sheet, reversed
        edge_use[{std::min(a, b), std::max(a, b)}]++;
        edge_use[{std::min(b, c), std::max(b, c)}]++;
        edge_use[{std::min(c, a), std::max(c, a)}]++;
    }
    // side walls along boundary edges, glued against the front orientation
    for (const auto& t : cells) {
        int v[3] = {remap[t[0]], remap[t[1]], remap[t[2]]};
        for (int k = 0; k < 3; ++k) {
            int i = v[k], j = v[(k + 1) % 3];
            if (edge_use[{std::min(i, j), std::max(i, j)}] == 1) {
                tris.push_back({j, i, i + live});
                tris.push_back({j, i + live, j + live});
            }
        }
    }

    mesh.faces.resize(static_cast<int>(tris.size()), 3);
    for (size_t f = 0; f < tris.size(); ++f)
        mesh.faces.row(static_cast<int>(f)) << tris[f][0], tris[f][1], tris[f][2];
    return mesh;
}

// ---------------------------------------------------------------------------
// Body infill
// ---------------------------------------------------------------------------

namespace {

// z-buffer of (clothed + body) with the winning triangle id of the body part
// (-1 where the clothed mesh or background wins).
std::vector<int> body_ownership(const TriMesh& clothed, const TriMesh& body,
                                const WeakPerspectiveCam& cam) {
    const int H = cam.height, W = cam.width;
    std::vector<float> zbuf(static_cast<size_t>(H) * W, pos_inf());
    std::vector<int> owner(static_cast<size_t>(H) * W, -1);

    auto splat = [&](const TriMesh& mesh, bool record) {
        if (mesh.vertex_count() == 0) return;
        Eigen::Matrix<double, Eigen::Dynamic, 2> px;
        Eigen::VectorXd depth;
        project(cam, mesh.vertices, px, depth);
        for (int f = 0; f < mesh.face_count(); ++f) {
            int ia = mesh.faces(f, 0), ib = mesh.faces(f, 1), ic = mesh.faces(f, 2);
            double ax = px(ia, 0), ay = px(ia, 1);
            double bx = px(ib, 0), by = px(ib, 1);
            double cx = px(ic, 0), cy = px(ic, 1);
            double area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
            if (area2 == 0.0) continue;
            if (area2 < 0) {
                std::swap(ib, ic);
                std::swap(bx, cx);
                std::swap(by, cy);
                area2 = -area2;
            }
            int x0 = std::max(0, static_cast<int>(std::floor(std::min({ax, bx, cx}) - 0.5)));
            int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({ax, bx, cx}) - 0.5)));
            int y0 = std::max(0, static_cast<int>(std::floor(std::min({ay, by, cy}) - 0.5)));
            int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({ay, by, cy}) - 0.5)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    double pxc = x + 0.5, pyc = y + 0.5;
                    double wa = (cx - bx) * (pyc - by) - (cy - by) * (pxc - bx);
                    double wb = (ax - cx) * (pyc - cy) - (ay - cy) * (pxc - cx);
                    double wc = (bx - ax) * (pyc - ay) - (by - ay) * (pxc - ax);
                    if (wa < 0 || wb < 0 || wc < 0) continue;
                    double z = (wa * depth(ia) + wb * depth(ib) + wc * depth(ic)) / area2;
                    size_t idx = static_cast<size_t>(y) * W + x;
                    if (z < zbuf[idx]) {
                        zbuf[idx] = static_cast<float>(z);
                        owner[idx] = record ? f : -1;
                    }
                }
        }
    };
    splat(clothed, false);
    splat(body, true);
    return owner;
}

}  // namespace

ClothedMesh infill_from_body(const ClothedMesh& mesh, const TriMesh& body_mesh,
                             const WeakPerspectiveCam& front_cam,
                             const WeakPerspectiveCam& back_cam, const InfillConfig& cfg,
                             InfillStats* stats) {
    front_cam.validate();
    back_cam.validate();
    TriMesh clothed = mesh.as_tri_mesh();

    std::vector<char> visible(static_cast<size_t>(body_mesh.face_count()), 0);
    for (const WeakPerspectiveCam* cam : {&front_cam, &back_cam}) {
        std::vector<int> owner = body_ownership(clothed, body_mesh, *cam);
        for (int o : owner)
            if (o >= 0) visible[o] = 1;
    }

    ClothedMesh out = mesh;
    if (out.source_pixels.rows() != out.vertices.rows())
        out.source_pixels = Eigen::Matrix<double, Eigen::Dynamic, 2>::Constant(
            out.vertices.rows(), 2, -1.0);
    InfillStats local;
    Points body_normals = body_mesh.has_normals()
                              ? body_mesh.normals
                              : vertex_normals(body_mesh.vertices, body_mesh.faces);

    std::vector<int> vertex_map(body_mesh.vertex_count(), -1);
    std::vector<std::array<int, 3>> new_faces;
    std::vector<Vec3> new_positions;
    std::vector<Vec3> new_colors;

    for (int f = 0; f < body_mesh.face_count(); ++f) {
        if (visible[f]) continue;
        std::array<int, 3> tri;
        for (int k = 0; k < 3; ++k) {
            int bv = body_mesh.faces(f, k);
            if (vertex_map[bv] < 0) {
                vertex_map[bv] = static_cast<int>(new_positions.size());
                new_positions.push_back(body_mesh.vertices.row(bv).transpose());
                Vec3 n = body_normals.row(bv).transpose();
                new_colors.push_back(0.5 * (n + Vec3::Ones()));
            }
            tri[k] = vertex_map[bv];
        }
        new_faces.push_back(tri);
    }

    // boundary stitch: snap appended vertices onto nearby clothed vertices
    if (cfg.stitch_radius > 0 && mesh.vertex_count() > 0) {
        for (auto& p : new_positions) {
            double best = cfg.stitch_radius * cfg.stitch_radius;
            int best_v = -1;
            for (int v = 0; v < mesh.vertex_count(); ++v) {
                double d2 = (Vec3(mesh.vertices.row(v).transpose()) - p).squaredNorm();
                if (d2 < best) {
                    best = d2;
                    best_v = v;
                }
            }
            if (best_v >= 0) {
                p = mesh.vertices.row(best_v).transpose();
                local.stitched_vertices++;
            }
        }
    }

    const int base = out.vertex_count();
    const int added = static_cast<int>(new_positions.size());
    local.vertices_added = added;
    local.triangles_added = static_cast<int>(new_faces.size());

    if (added > 0) {
        Points all_v(base + added, 3);
        Points all_c(base + added, 3);
        if (base > 0) {
            all_v.topRows(base) = out.vertices;
            all_c.topRows(base) = out.colors;
        }
        for (int i = 0; i < added; ++i) {
            all_v.row(base + i) = new_positions[i].transpose();
            all_c.row(base + i) = new_colors[i].transpose();
        }
        Eigen::Matrix<double, Eigen::Dynamic, 2> all_px =
            Eigen::Matrix<double, Eigen::Dynamic, 2>::Constant(base + added, 2, -1.0);
        if (base > 0) all_px.topRows(base) = out.source_pixels;
        out.vertices = std::move(all_v);
        out.colors = std::move(all_c);
        out.source_pixels = std::move(all_px);
        out.origin.resize(base + added, VertexOrigin::BodyInfill);

        Faces all_f(out.faces.rows() + static_cast<int>(new_faces.size()), 3);
        if (out.faces.rows() > 0) all_f.topRows(out.faces.rows()) = out.faces;
        for (size_t i = 0; i < new_faces.size(); ++i)
            all_f.row(out.faces.rows() + static_cast<int>(i))
                << base + new_faces[i][0], base + new_faces[i][1], base + new_faces[i][2];
        out.faces = std::move(all_f);
    }
    if (stats) *stats = local;
    return out;
}

void save_clothed_mesh_sidecar(const std::string& path, const ClothedMesh& mesh) {
    nlohmann::json j;
    static const char* names[3] = {"front", "back", "infill"};
    std::vector<std::string> tags;
    tags.reserve(mesh.origin.size());
    for (VertexOrigin o : mesh.origin) tags.push_back(names[static_cast<int>(o)]);
    j["origin"] = tags;
    j["clamped_pixels"] = mesh.clamped_pixels;
    j["skipped_pixels"] = mesh.skipped_pixels;
    j["back_alignment_shift"] = mesh.back_alignment_shift;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("sidecar: cannot open " + path);
    out << j.dump(1) << '\n';
}

}  // namespace tdg
