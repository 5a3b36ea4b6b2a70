#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <string>

namespace tdg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Indexed triangle soup. `normals` and `colors` are optional per-vertex
// attributes (empty when absent).
struct TriMesh {
    Points vertices;
    Faces faces;
    Points normals;
    Points colors;

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    int face_count() const { return static_cast<int>(faces.rows()); }
    bool has_normals() const { return normals.rows() == vertices.rows() && vertices.rows() > 0; }
    bool has_colors() const { return colors.rows() == vertices.rows() && vertices.rows() > 0; }
};

// Area-weighted per-vertex normals, normalized (zero where undefined).
Points vertex_normals(const Points& vertices, const Faces& faces);

// Wavefront OBJ with optional per-vertex color as "v x y z r g b".
void write_obj(const std::string& path, const TriMesh& mesh);
TriMesh read_obj(const std::string& path);

}  // namespace tdg
