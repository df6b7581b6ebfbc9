#pragma once

#include <span>
#include <vector>

#include "latflow/core.hpp"

namespace latflow {

/// Diagonal affine homeomorphism between physical space and the latent cube:
/// to_latent(X) = (X - c) / (R + eps) componentwise. eps is a fixed Tikhonov
/// regularizer that keeps the inverse-Jacobian factors 1/(R_i + eps) bounded
/// on degenerate geometry.
struct AffineMap {
    Vec3 center{0, 0, 0};
    Vec3 radii{1, 1, 1};
    double epsilon = 1e-6;

    bool valid() const {
        return radii.x > 0 && radii.y > 0 && radii.z > 0 && epsilon >= 0 &&
               finite(center) && finite(radii);
    }
};

Vec3 to_latent(const Vec3& x, const AffineMap& map);
Vec3 from_latent(const Vec3& xi, const AffineMap& map);

/// Transpose-Jacobian action: component i of the physical gradient is the
/// latent gradient component divided by (R_i + eps).
Vec3 pullback_gradient(const Vec3& latent_grad, const AffineMap& map);

/// |det J_f| = prod_i 1/(R_i + eps); the measure weight used when assembling
/// residual integrals in latent coordinates.
double jacobian_det(const AffineMap& map);

/// Bounding-box fit. Degenerate axes are floored at 1e-3 of the largest
/// half-extent. Requires at least two distinct points.
AffineMap fit_map(std::span<const Vec3> points, double epsilon = 1e-6);

/// Regular grid over the latent cube, row-major channel-last:
/// flat((i,j,k),c) = ((i*W + j)*D + k)*C + c with i along x, j along y,
/// k along z.
struct LatentGrid {
    int dims[3] = {0, 0, 0};  // H, W, D
    int channels = 0;
    Vec3 spacing{1, 1, 1};
    Vec3 origin{0, 0, 0};
    std::vector<double> values;

    LatentGrid() = default;
    LatentGrid(int h, int w, int d, int c)
        : channels(c), values(std::size_t(h) * w * d * c, 0.0) {
        dims[0] = h;
        dims[1] = w;
        dims[2] = d;
    }

    /// Grid spanning the cube [-1,1]^3.
    static LatentGrid unit_cube(int h, int w, int d, int c) {
        LatentGrid g(h, w, d, c);
        g.origin = {-1, -1, -1};
        g.spacing = {h > 1 ? 2.0 / (h - 1) : 1.0, w > 1 ? 2.0 / (w - 1) : 1.0,
                     d > 1 ? 2.0 / (d - 1) : 1.0};
        return g;
    }

    std::int64_t nodes() const {
        return std::int64_t(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k, int c = 0) const {
        return ((std::size_t(i) * dims[1] + j) * dims[2] + k) * channels + c;
    }
    double& at(int i, int j, int k, int c = 0) { return values[index(i, j, k, c)]; }
    double at(int i, int j, int k, int c = 0) const { return values[index(i, j, k, c)]; }

    Vec3 node_coord(int i, int j, int k) const {
        return {origin.x + i * spacing.x, origin.y + j * spacing.y,
                origin.z + k * spacing.z};
    }

    bool same_shape(const LatentGrid& o) const {
        return dims[0] == o.dims[0] && dims[1] == o.dims[1] &&
               dims[2] == o.dims[2] && channels == o.channels;
    }
};

/// Trilinear interpolation of the C channels at a latent point. The query
/// must lie inside the grid bounds (a small epsilon of slack absorbs
/// round-off at the faces); exact at nodes and on trilinear polynomials.
std::vector<double> sample_trilinear(const LatentGrid& grid, const Vec3& xi);

/// Gather weights of sample_trilinear: the eight (flat node index, weight)
/// pairs. Shared by the interpolation itself and by adjoint scatters.
struct TrilinearStencil {
    std::size_t node[8];
    double weight[8];
};
TrilinearStencil trilinear_stencil(const LatentGrid& grid, const Vec3& xi);

}  // namespace latflow
