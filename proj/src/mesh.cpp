#include "tdg/mesh.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tdg {

Points vertex_normals(const Points& vertices, const Faces& faces) {
    Points normals = Points::Zero(vertices.rows(), 3);
    for (int f = 0; f < faces.rows(); ++f) {
        int a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
        Vec3 e1 = (vertices.row(b) - vertices.row(a)).transpose();
        Vec3 e2 = (vertices.row(c) - vertices.row(a)).transpose();
        Vec3 n = e1.cross(e2);  // magnitude = twice the face area
        normals.row(a) += n;
        normals.row(b) += n;
        normals.row(c) += n;
    }
    for (int v = 0; v < normals.rows(); ++v) {
        double len = normals.row(v).norm();
        if (len > 1e-20) normals.row(v) /= len;
    }
    return normals;
}

void write_obj(const std::string& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_obj: cannot open " + path);
    char line[256];
    bool colored = mesh.has_colors();
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        if (colored) {
            std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g %.9g %.9g %.9g\n",
                          mesh.vertices(v, 0), mesh.vertices(v, 1), mesh.vertices(v, 2),
                          mesh.colors(v, 0), mesh.colors(v, 1), mesh.colors(v, 2));
        } else {
            std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", mesh.vertices(v, 0),
                          mesh.vertices(v, 1), mesh.vertices(v, 2));
        }
        out << line;
    }
    for (int f = 0; f < mesh.face_count(); ++f) {
        out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' '
            << mesh.faces(f, 2) + 1 << '\n';
    }
    if (!out) throw std::runtime_error("write_obj: write failed for " + path);
}

TriMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_obj: cannot open " + path);
    std::vector<double> verts;
    std::vector<double> cols;
    std::vector<int> faces;
    bool any_color = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0) {
            std::istringstream ss(line.substr(2));
            double x, y, z;
            if (!(ss >> x >> y >> z)) throw std::runtime_error("read_obj: malformed vertex");
            verts.insert(verts.end(), {x, y, z});
            double r, g, b;
            if (ss >> r >> g >> b) {
                cols.insert(cols.end(), {r, g, b});
                any_color = true;
            } else {
                cols.insert(cols.end(), {0.0, 0.0, 0.0});
            }
        } else if (line.rfind("f ", 0) == 0) {
            std::istringstream ss(line.substr(2));
            std::string tok;
            std::vector<int> idx;
            while (ss >> tok) {
                // accept "i", "i/..", "i//.." forms
                idx.push_back(std::stoi(tok.substr(0, tok.find('/'))) - 1);
            }
            if (idx.size() < 3) throw std::runtime_error("read_obj: face with <3 vertices");
            for (size_t k = 1; k + 1 < idx.size(); ++k)
                faces.insert(faces.end(), {idx[0], idx[k], idx[k + 1]});
        }
    }
    TriMesh mesh;
    int nv = static_cast<int>(verts.size() / 3);
    mesh.vertices.resize(nv, 3);
    for (int v = 0; v < nv; ++v)
        mesh.vertices.row(v) << verts[3 * v], verts[3 * v + 1], verts[3 * v + 2];
    if (any_color) {
        mesh.colors.resize(nv, 3);
        for (int v = 0; v < nv; ++v)
            mesh.colors.row(v) << cols[3 * v], cols[3 * v + 1], cols[3 * v + 2];
    }
    int nf = static_cast<int>(faces.size() / 3);
    mesh.faces.resize(nf, 3);
    for (int f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
            int vi = faces[3 * f + k];
            if (vi < 0 || vi >= nv) throw std::runtime_error("read_obj: face index out of range");
            mesh.faces(f, k) = vi;
        }
    }
    return mesh;
}

}  // namespace tdg
