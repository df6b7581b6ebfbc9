#include "latflow/field_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace latflow {

namespace {

void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

}  // namespace

void write_gfield(const std::string& path, const LatentGrid& grid, const AffineMap& map) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    out << "dims " << grid.dims[0] << ' ' << grid.dims[1] << ' ' << grid.dims[2]
        << ' ' << grid.channels << '\n';
    out << "origin " << fmt_double(grid.origin.x) << ' ' << fmt_double(grid.origin.y)
        << ' ' << fmt_double(grid.origin.z) << '\n';
    out << "spacing " << fmt_double(grid.spacing.x) << ' ' << fmt_double(grid.spacing.y)
        << ' ' << fmt_double(grid.spacing.z) << '\n';
    out << "map " << fmt_double(map.center.x) << ' ' << fmt_double(map.center.y) << ' '
        << fmt_double(map.center.z) << ' ' << fmt_double(map.radii.x) << ' '
        << fmt_double(map.radii.y) << ' ' << fmt_double(map.radii.z) << ' '
        << fmt_double(map.epsilon) << '\n';
    out << '\n';
    const int c = grid.channels;
    for (std::size_t i = 0; i < grid.values.size(); i += c) {
        for (int q = 0; q < c; ++q) {
            if (q) out << ' ';
            out << fmt_double(grid.values[i + q]);
        }
        out << '\n';
    }
    if (!out) fail(path, "write error");
}

GField read_gfield(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open");
    GField f;
    std::string key;
    int h = 0, w = 0, d = 0, c = 0;
    in >> key >> h >> w >> d >> c;
    if (key != "dims" || h <= 0 || w <= 0 || d <= 0 || c <= 0) fail(path, "bad dims header");
    f.grid = LatentGrid(h, w, d, c);
    in >> key >> f.grid.origin.x >> f.grid.origin.y >> f.grid.origin.z;
    if (key != "origin") fail(path, "bad origin header");
    in >> key >> f.grid.spacing.x >> f.grid.spacing.y >> f.grid.spacing.z;
    if (key != "spacing") fail(path, "bad spacing header");
    in >> key >> f.map.center.x >> f.map.center.y >> f.map.center.z >> f.map.radii.x >>
        f.map.radii.y >> f.map.radii.z >> f.map.epsilon;
    if (key != "map") fail(path, "bad map header");
    for (double& v : f.grid.values) {
        if (!(in >> v)) fail(path, "truncated value block");
    }
    return f;
}

void write_point_csv(const std::string& path, const std::vector<Vec3>& positions,
                     const std::vector<Vec3>& normals) {
    if (!normals.empty() && normals.size() != positions.size())
        throw std::invalid_argument("write_point_csv: normal count mismatch");
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    out << (normals.empty() ? "x,y,z" : "x,y,z,nx,ny,nz") << '\n';
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const Vec3& p = positions[i];
        out << fmt_double(p.x) << ',' << fmt_double(p.y) << ',' << fmt_double(p.z);
        if (!normals.empty()) {
            const Vec3& n = normals[i];
            out << ',' << fmt_double(n.x) << ',' << fmt_double(n.y) << ',' << fmt_double(n.z);
        }
        out << '\n';
    }
    if (!out) fail(path, "write error");
}

PointCloudFile read_point_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open");
    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    bool has_normals;
    if (line == "x,y,z")
        has_normals = false;
    else if (line == "x,y,z,nx,ny,nz")
        has_normals = true;
    else
        fail(path, "unrecognized header '" + line + "'");
    PointCloudFile pc;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        Vec3 p, n;
        char comma;
        row >> p.x >> comma >> p.y >> comma >> p.z;
        if (!row) fail(path, "bad row '" + line + "'");
        pc.positions.push_back(p);
        if (has_normals) {
            row >> comma >> n.x >> comma >> n.y >> comma >> n.z;
            if (!row) fail(path, "bad row '" + line + "'");
            pc.normals.push_back(n);
        }
    }
    if (pc.positions.empty()) fail(path, "no points");
    return pc;
}

}  // namespace latflow
