#include "latflow/latent_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace latflow {

Vec3 to_latent(const Vec3& x, const AffineMap& map) {
    require(map.valid(), "to_latent: invalid affine map");
    const Vec3& c = map.center;
    const Vec3& r = map.radii;
    const double e = map.epsilon;
    return {(x.x - c.x) / (r.x + e), (x.y - c.y) / (r.y + e), (x.z - c.z) / (r.z + e)};
}

Vec3 from_latent(const Vec3& xi, const AffineMap& map) {
    require(map.valid(), "from_latent: invalid affine map");
    const Vec3& c = map.center;
    const Vec3& r = map.radii;
    const double e = map.epsilon;
    return {xi.x * (r.x + e) + c.x, xi.y * (r.y + e) + c.y, xi.z * (r.z + e) + c.z};
}

Vec3 pullback_gradient(const Vec3& latent_grad, const AffineMap& map) {
    require(map.valid(), "pullback_gradient: invalid affine map");
    require(finite(latent_grad), "pullback_gradient: non-finite input");
    const Vec3& r = map.radii;
    const double e = map.epsilon;
    return {latent_grad.x / (r.x + e), latent_grad.y / (r.y + e), latent_grad.z / (r.z + e)};
}

double jacobian_det(const AffineMap& map) {
    require(map.valid(), "jacobian_det: invalid affine map");
    const Vec3& r = map.radii;
    const double e = map.epsilon;
    return 1.0 / (r.x + e) / (r.y + e) / (r.z + e);
}

AffineMap fit_map(std::span<const Vec3> points, double epsilon) {
    require(points.size() >= 2, "fit_map: need at least two points");
    Vec3 lo = points[0], hi = points[0];
    for (const Vec3& p : points) {
        require(finite(p), "fit_map: non-finite point");
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    AffineMap map;
    map.epsilon = epsilon;
    double max_half = 0.0;
    for (int a = 0; a < 3; ++a) {
        map.center[a] = 0.5 * (lo[a] + hi[a]);
        map.radii[a] = 0.5 * (hi[a] - lo[a]);
        max_half = std::max(max_half, map.radii[a]);
    }
    require(max_half > 0.0, "fit_map: all points coincide");
    for (int a = 0; a < 3; ++a)
        if (map.radii[a] <= 0.0) map.radii[a] = max_half * 1e-3;
    return map;
}

TrilinearStencil trilinear_stencil(const LatentGrid& grid, const Vec3& xi) {
    TrilinearStencil st;
    int cell[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const int n = grid.dims[a];
        const double u = (xi[a] - grid.origin[a]) / grid.spacing[a];
        const double slack = 1e-9 * std::max(1, n - 1);
        require(u >= -slack && u <= (n - 1) + slack,
                "sample_trilinear: query outside grid bounds");
        int i0 = int(std::floor(u));
        i0 = std::clamp(i0, 0, std::max(0, n - 2));
        cell[a] = i0;
        frac[a] = n > 1 ? std::clamp(u - i0, 0.0, 1.0) : 0.0;
    }
    int q = 0;
    for (int di = 0; di < 2; ++di)
        for (int dj = 0; dj < 2; ++dj)
            for (int dk = 0; dk < 2; ++dk) {
                const int i = std::min(cell[0] + di, grid.dims[0] - 1);
                const int j = std::min(cell[1] + dj, grid.dims[1] - 1);
                const int k = std::min(cell[2] + dk, grid.dims[2] - 1);
                const double w = (di ? frac[0] : 1.0 - frac[0]) *
                                 (dj ? frac[1] : 1.0 - frac[1]) *
                                 (dk ? frac[2] : 1.0 - frac[2]);
                st.node[q] = grid.index(i, j, k, 0);
                st.weight[q] = w;
                ++q;
            }
    return st;
}

std::vector<double> sample_trilinear(const LatentGrid& grid, const Vec3& xi) {
    const TrilinearStencil st = trilinear_stencil(grid, xi);
    std::vector<double> out(grid.channels, 0.0);
    for (int q = 0; q < 8; ++q) {
        const double w = st.weight[q];
        if (w == 0.0) continue;
        const double* v = grid.values.data() + st.node[q];
        for (int c = 0; c < grid.channels; ++c) out[c] += w * v[c];
    }
    return out;
}

}  // namespace latflow
