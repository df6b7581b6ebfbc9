#include "latflow/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>

namespace latflow {

Stencil central4() {
    Stencil s;
    s.offsets = {-2, -1, 0, 1, 2};
    s.coeffs = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
    s.order = 1;
    s.design_degree = 4;
    return s;
}

Stencil one_sided5(Side side) {
    Stencil s;
    s.order = 1;
    s.design_degree = 4;
    if (side == Side::Left) {
        s.offsets = {0, 1, 2, 3, 4};
        s.coeffs = {-25.0 / 12, 48.0 / 12, -36.0 / 12, 16.0 / 12, -3.0 / 12};
    } else {
        s.offsets = {-4, -3, -2, -1, 0};
        s.coeffs = {3.0 / 12, -16.0 / 12, 36.0 / 12, -48.0 / 12, 25.0 / 12};
    }
    return s;
}

Stencil derive_stencil(const std::vector<int>& offsets, int order) {
    const int n = int(offsets.size());
    require(order >= 1, "derive_stencil: order must be >= 1");
    require(n >= order + 1, "derive_stencil: not enough offsets");
    require(std::set<int>(offsets.begin(), offsets.end()).size() == offsets.size(),
            "derive_stencil: repeated offsets make the system singular");

    // Moment conditions: sum_j c_j o_j^m = m! [m == order], m = 0..n-1.
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (int m = 0; m < n; ++m) {
        for (int j = 0; j < n; ++j) a[m][j] = std::pow(double(offsets[j]), m);
        if (m == order) {
            double fact = 1.0;
            for (int q = 2; q <= order; ++q) fact *= q;
            a[m][n] = fact;
        }
    }
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        require(std::abs(a[col][col]) > 1e-12, "derive_stencil: singular moment system");
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int q = col; q <= n; ++q) a[r][q] -= f * a[col][q];
        }
    }
    Stencil s;
    s.offsets = offsets;
    s.coeffs.resize(n);
    for (int j = 0; j < n; ++j) s.coeffs[j] = a[j][n] / a[j][j];
    s.order = order;
    s.design_degree = n - 1;
    return s;
}

namespace {

DiffOp1D build_diff_op(int n) {
    require(n >= 5, "apply_derivative: axis extent must be >= 5");
    DiffOp1D op;
    op.n = n;
    op.rows.resize(n);

    const Stencil interior = central4();
    const Stencil left0 = one_sided5(Side::Left);
    const Stencil left1 = derive_stencil({-1, 0, 1, 2, 3}, 1);
    const Stencil right1 = derive_stencil({-3, -2, -1, 0, 1}, 1);
    const Stencil right0 = one_sided5(Side::Right);

    auto pick = [&](int i) -> const Stencil& {
        if (i == 0) return left0;
        if (i == 1) return left1;
        if (i == n - 2) return right1;
        if (i == n - 1) return right0;
        return interior;
    };
    for (int i = 0; i < n; ++i) {
        const Stencil& s = pick(i);
        auto& row = op.rows[i];
        for (std::size_t q = 0; q < s.offsets.size(); ++q) {
            if (s.coeffs[q] == 0.0) continue;
            row.emplace_back(i + s.offsets[q], s.coeffs[q]);
        }
    }
    op.cols.resize(n);
    for (int i = 0; i < n; ++i)
        for (auto [j, c] : op.rows[i]) op.cols[j].emplace_back(i, c);
    return op;
}

}  // namespace

const DiffOp1D& DiffOp1D::cached(int n) {
    static std::mutex mu;
    static std::map<int, DiffOp1D> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_diff_op(n)).first;
    return it->second;
}

namespace {

/// Applies the 1D operator along `axis` of the grid, selecting rows or
/// columns of the operator table.
LatentGrid apply_axis_op(const LatentGrid& grid, const DiffPlan& plan, bool transpose) {
    require(plan.axis >= 0 && plan.axis < 3, "apply_derivative: bad axis");
    require(plan.spacing > 0, "apply_derivative: spacing must be positive");
    const int n = grid.dims[plan.axis];
    const DiffOp1D& op = DiffOp1D::cached(n);
    const auto& table = transpose ? op.cols : op.rows;
    const double inv_h = 1.0 / plan.spacing;

    LatentGrid out = grid;
    const int C = grid.channels;
    // Stride of one step along the differentiation axis, in doubles.
    const std::int64_t stride = plan.axis == 0
                                    ? std::int64_t(grid.dims[1]) * grid.dims[2] * C
                                    : (plan.axis == 1 ? std::int64_t(grid.dims[2]) * C : C);
    // Enumerate lines: the two non-diff axes plus the channel.
    int od[2], oi = 0;
    for (int a = 0; a < 3; ++a)
        if (a != plan.axis) od[oi++] = a;
    const std::int64_t lines = std::int64_t(grid.dims[od[0]]) * grid.dims[od[1]] * C;

    parallel_for(lines, [&](std::int64_t line) {
        const int c = int(line % C);
        const std::int64_t jk = line / C;
        const int b = int(jk % grid.dims[od[1]]);
        const int a = int(jk / grid.dims[od[1]]);
        int idx3[3];
        idx3[od[0]] = a;
        idx3[od[1]] = b;
        idx3[plan.axis] = 0;
        const std::size_t base = out.index(idx3[0], idx3[1], idx3[2], c);
        const double* src = grid.values.data() + base;
        double* dst = out.values.data() + base;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (auto [j, coef] : table[i]) acc += coef * src[std::int64_t(j) * stride];
            dst[std::int64_t(i) * stride] = acc * inv_h;
        }
    });
    return out;
}

}  // namespace

LatentGrid apply_derivative(const LatentGrid& grid, const DiffPlan& plan) {
    return apply_axis_op(grid, plan, false);
}

LatentGrid apply_derivative_adjoint(const LatentGrid& grid, const DiffPlan& plan) {
    return apply_axis_op(grid, plan, true);
}

std::complex<double> symbol_central4(double omega, double h) {
    require(h > 0, "symbol_central4: h must be positive");
    const double x = omega * h;
    return {0.0, (8.0 * std::sin(x) - std::sin(2.0 * x)) / (6.0 * h)};
}

SymbolBoundReport symbol_bound_check(double h, int samples) {
    require(h > 0 && samples >= 10000, "symbol_bound_check: need h > 0 and >= 1e4 samples");
    SymbolBoundReport rep;
    rep.bound = 3.0 / (2.0 * h);
    for (int i = 0; i < samples; ++i) {
        const double x = M_PI * double(i) / double(samples - 1);  // x = omega*h
        const double mag = std::abs(symbol_central4(x / h, h));
        rep.max_symbol = std::max(rep.max_symbol, mag);
    }
    rep.max_times_h = rep.max_symbol * h;
    rep.pass = rep.max_symbol <= rep.bound;
    return rep;
}

std::vector<GrowthRow> ntk_growth_compare(const std::vector<double>& omegas, int k, double h) {
    require(k >= 1, "ntk_growth_compare: k must be >= 1");
    std::vector<GrowthRow> rows;
    rows.reserve(omegas.size());
    for (double w : omegas) {
        GrowthRow r;
        r.omega = w;
        r.ad_growth = std::pow(w * w, k);
        const double mag = std::abs(symbol_central4(w, h));
        r.discrete_growth = std::pow(mag * mag, k);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace latflow
