#pragma once

#include <string>
#include <vector>

#include "latflow/latent_grid.hpp"

namespace latflow {

/// Text container for a latent grid plus its affine map.
///
/// Layout:
///   dims H W D C
///   origin ox oy oz
///   spacing hx hy hz
///   map cx cy cz Rx Ry Rz eps
///   <blank line>
///   H*W*D*C whitespace-separated decimal values, row-major channel-last
///   (one node per line).
void write_gfield(const std::string& path, const LatentGrid& grid, const AffineMap& map);

struct GField {
    LatentGrid grid;
    AffineMap map;
};
GField read_gfield(const std::string& path);

/// Point-cloud CSV with header `x,y,z` or `x,y,z,nx,ny,nz`.
struct PointCloudFile {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;  // empty when the file has no normal columns
};
void write_point_csv(const std::string& path, const std::vector<Vec3>& positions,
                     const std::vector<Vec3>& normals = {});
PointCloudFile read_point_csv(const std::string& path);

}  // namespace latflow
