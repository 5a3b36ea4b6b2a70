#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

#include "tdg/mesh.hpp"

// Shared helpers for the unit suites.

inline std::string test_tmp_path(const std::string& name) {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "tdg_tests";
    fs::create_directories(dir);
    return (dir / name).string();
}

inline double max_abs_diff(const tdg::Points& a, const tdg::Points& b) {
    if (a.rows() != b.rows()) return std::numeric_limits<double>::infinity();
    return (a - b).cwiseAbs().maxCoeff();
}

inline bool approx_equal(const tdg::Points& a, const tdg::Points& b, double tol) {
    return a.rows() == b.rows() && max_abs_diff(a, b) <= tol;
}
