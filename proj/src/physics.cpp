#include "latflow/physics.hpp"

#include <algorithm>
#include <cmath>

namespace latflow {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_single_channel(const LatentGrid& g, const char* what) {
    require(g.channels == 1, std::string(what) + ": expected a single-channel grid");
}

double pullback_factor(const AffineMap& map, int axis) {
    return 1.0 / (map.radii[axis] + map.epsilon);
}

}  // namespace

LatentGrid phase_mask(const LatentGrid& sdf, const PhaseMaskCfg& cfg) {
    check_single_channel(sdf, "phase_mask");
    require(cfg.alpha > 0, "phase_mask: alpha must be positive");
    for (double v : sdf.values) require(std::isfinite(v), "phase_mask: non-finite SDF");
    LatentGrid out = sdf;
    parallel_for(std::int64_t(out.values.size()), [&](std::int64_t i) {
        out.values[i] = sigmoid(cfg.alpha * sdf.values[i] + cfg.beta);
    });
    return out;
}

void tangent_project(LatentGrid& velocity3, const LatentGrid& normals3,
                     const LatentGrid* apply) {
    require(velocity3.channels == 3 && normals3.channels == 3,
            "tangent_project: velocity and normals must have 3 channels");
    require(velocity3.same_shape(normals3) ||
                (velocity3.dims[0] == normals3.dims[0] &&
                 velocity3.dims[1] == normals3.dims[1] &&
                 velocity3.dims[2] == normals3.dims[2]),
            "tangent_project: dims mismatch");
    if (apply) check_single_channel(*apply, "tangent_project gate");
    for (std::int64_t node = 0; node < velocity3.nodes(); ++node) {
        if (apply && apply->values[node] == 0.0) continue;
        const double* n = normals3.values.data() + node * 3;
        const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        require(std::abs(len - 1.0) <= 1e-6, "tangent_project: normal is not unit length");
    }
    parallel_for(velocity3.nodes(), [&](std::int64_t node) {
        if (apply && apply->values[node] == 0.0) return;
        double* v = velocity3.values.data() + node * 3;
        const double* n = normals3.values.data() + node * 3;
        const double vn = v[0] * n[0] + v[1] * n[1] + v[2] * n[2];
        for (int a = 0; a < 3; ++a) v[a] -= vn * n[a];
    });
}

double tv_loss(const LatentGrid& grid, const AffineMap& map) {
    const double inv_count = 1.0 / (double(grid.nodes()) * grid.channels);
    double total = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const LatentGrid d = apply_derivative(grid, {axis, grid.spacing[axis]});
        const double pb = pullback_factor(map, axis);
        double acc = 0.0;
        for (double v : d.values) acc += std::abs(v);
        total += acc * pb;
    }
    return total * inv_count;
}

void tv_loss_backward(const LatentGrid& grid, const AffineMap& map, double loss_scale,
                      LatentGrid& grad) {
    require(grad.same_shape(grid), "tv_loss_backward: grad shape mismatch");
    const double inv_count = loss_scale / (double(grid.nodes()) * grid.channels);
    for (int axis = 0; axis < 3; ++axis) {
        const DiffPlan plan{axis, grid.spacing[axis]};
        LatentGrid d = apply_derivative(grid, plan);
        const double pb = pullback_factor(map, axis);
        for (double& v : d.values)
            v = (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0)) * pb * inv_count;
        const LatentGrid back = apply_derivative_adjoint(d, plan);
        for (std::size_t i = 0; i < grad.values.size(); ++i)
            grad.values[i] += back.values[i];
    }
}

LatentGrid physical_gradient(const LatentGrid& grid, int channel, const AffineMap& map) {
    require(channel >= 0 && channel < grid.channels, "physical_gradient: bad channel");
    LatentGrid single(grid.dims[0], grid.dims[1], grid.dims[2], 1);
    single.spacing = grid.spacing;
    single.origin = grid.origin;
    parallel_for(grid.nodes(), [&](std::int64_t n) {
        single.values[n] = grid.values[n * grid.channels + channel];
    });
    LatentGrid out(grid.dims[0], grid.dims[1], grid.dims[2], 3);
    out.spacing = grid.spacing;
    out.origin = grid.origin;
    for (int axis = 0; axis < 3; ++axis) {
        const LatentGrid d = apply_derivative(single, {axis, grid.spacing[axis]});
        const double pb = pullback_factor(map, axis);
        parallel_for(grid.nodes(),
                     [&](std::int64_t n) { out.values[n * 3 + axis] = d.values[n] * pb; });
    }
    return out;
}

LatentGrid ns_residual(const LatentGrid& fields, const AffineMap& map, const NsCfg& cfg) {
    require(fields.channels >= 4, "ns_residual: need channels (u,v,w,P)");
    const bool rho_field = fields.channels >= 5;
    const int C = fields.channels;

    LatentGrid d[3] = {apply_derivative(fields, {0, fields.spacing.x}),
                       apply_derivative(fields, {1, fields.spacing.y}),
                       apply_derivative(fields, {2, fields.spacing.z})};
    const double pb[3] = {pullback_factor(map, 0), pullback_factor(map, 1),
                          pullback_factor(map, 2)};

    LatentGrid res(fields.dims[0], fields.dims[1], fields.dims[2], 4);
    res.spacing = fields.spacing;
    res.origin = fields.origin;
    parallel_for(fields.nodes(), [&](std::int64_t n) {
        const double* f = fields.values.data() + n * C;
        double* r = res.values.data() + n * 4;
        const double rho = rho_field ? f[4] : cfg.rho;
        double cont = 0.0;
        for (int a = 0; a < 3; ++a) cont += d[a].values[n * C + a] * pb[a];
        r[0] = cont;
        for (int m = 0; m < 3; ++m) {
            double adv = 0.0;
            for (int a = 0; a < 3; ++a) adv += f[a] * d[a].values[n * C + m] * pb[a];
            r[1 + m] = adv + d[m].values[n * C + 3] * pb[m] / rho;
        }
    });
    return res;
}

void ns_residual_backward(const LatentGrid& fields, const AffineMap& map, const NsCfg& cfg,
                          const LatentGrid& grad_residual, LatentGrid& grad_fields) {
    require(fields.channels == 4, "ns_residual_backward: constant-density 4-channel path");
    require(grad_residual.channels == 4, "ns_residual_backward: residual grad mismatch");
    require(grad_fields.same_shape(fields), "ns_residual_backward: grad shape mismatch");
    const int C = 4;
    LatentGrid d[3] = {apply_derivative(fields, {0, fields.spacing.x}),
                       apply_derivative(fields, {1, fields.spacing.y}),
                       apply_derivative(fields, {2, fields.spacing.z})};
    const double pb[3] = {pullback_factor(map, 0), pullback_factor(map, 1),
                          pullback_factor(map, 2)};

    // Direct (advection factor) terms.
    parallel_for(fields.nodes(), [&](std::int64_t n) {
        const double* gr = grad_residual.values.data() + n * 4;
        double* gf = grad_fields.values.data() + n * C;
        for (int a = 0; a < 3; ++a) {
            double acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += gr[1 + m] * d[a].values[n * C + m] * pb[a];
            gf[a] += acc;
        }
    });
    // Terms through the stencil derivatives: one adjoint per axis.
    for (int a = 0; a < 3; ++a) {
        LatentGrid src(fields.dims[0], fields.dims[1], fields.dims[2], C);
        src.spacing = fields.spacing;
        src.origin = fields.origin;
        parallel_for(fields.nodes(), [&](std::int64_t n) {
            const double* f = fields.values.data() + n * C;
            const double* gr = grad_residual.values.data() + n * 4;
            double* s = src.values.data() + n * C;
            for (int m = 0; m < 3; ++m) s[m] = gr[1 + m] * f[a] * pb[a];
            s[a] += gr[0] * pb[a];                  // continuity
            s[3] = gr[1 + a] * pb[a] / cfg.rho;     // pressure gradient, axis a
        });
        const LatentGrid back = apply_derivative_adjoint(src, {a, fields.spacing[a]});
        for (std::size_t i = 0; i < grad_fields.values.size(); ++i)
            grad_fields.values[i] += back.values[i];
    }
}

double assemble_phys_loss(const LatentGrid& residuals, const LatentGrid& mask,
                          const AffineMap& map, double p) {
    check_single_channel(mask, "assemble_phys_loss mask");
    require(mask.nodes() == residuals.nodes(), "assemble_phys_loss: grids not aligned");
    const double det = std::abs(jacobian_det(map));
    const std::int64_t n = residuals.nodes();
    const int C = residuals.channels;
    std::vector<double> node_vals(n);
    parallel_for(n, [&](std::int64_t i) {
        const double* r = residuals.values.data() + i * C;
        double acc = 0.0;
        for (int c = 0; c < C; ++c)
            acc += p == 2.0 ? r[c] * r[c] : std::pow(std::abs(r[c]), p);
        node_vals[i] = mask.values[i] * acc * det;
    });
    double total = 0.0;
    for (double v : node_vals) total += v;
    return total / double(n);
}

void assemble_phys_loss_backward(const LatentGrid& residuals, const LatentGrid& mask,
                                 const AffineMap& map, double loss_scale,
                                 LatentGrid& grad_residuals) {
    require(grad_residuals.same_shape(residuals),
            "assemble_phys_loss_backward: grad shape mismatch");
    const double det = std::abs(jacobian_det(map));
    const std::int64_t n = residuals.nodes();
    const int C = residuals.channels;
    const double scale = loss_scale * det / double(n);
    parallel_for(n, [&](std::int64_t i) {
        const double* r = residuals.values.data() + i * C;
        double* g = grad_residuals.values.data() + i * C;
        for (int c = 0; c < C; ++c) g[c] += scale * mask.values[i] * 2.0 * r[c];
    });
}

double eos_loss(const LatentGrid& P, const LatentGrid& rho, const LatentGrid& T,
                double gas_constant) {
    check_single_channel(P, "eos_loss P");
    check_single_channel(rho, "eos_loss rho");
    check_single_channel(T, "eos_loss T");
    require(P.nodes() == rho.nodes() && P.nodes() == T.nodes(), "eos_loss: grids not aligned");
    double acc = 0.0;
    for (std::int64_t i = 0; i < P.nodes(); ++i) {
        require(rho.values[i] > 0 && T.values[i] > 0,
                "eos_loss: density and temperature must be positive");
        acc += std::abs(P.values[i] - rho.values[i] * gas_constant * T.values[i]);
    }
    return acc / double(P.nodes());
}

LatentGrid shock_mask(const LatentGrid& P, const AffineMap& map, const ShockMaskCfg& cfg) {
    check_single_channel(P, "shock_mask");
    require(cfg.gamma > 0 && cfg.pressure_floor > 0, "shock_mask: bad config");
    for (double v : P.values)
        require(v + cfg.pressure_floor > 0, "shock_mask: P + pressure_floor must be positive");
    const LatentGrid gp = physical_gradient(P, 0, map);
    LatentGrid out = P;
    parallel_for(P.nodes(), [&](std::int64_t i) {
        const double* g = gp.values.data() + i * 3;
        const double mag = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        out.values[i] = 1.0 - std::exp(-cfg.gamma * mag / (P.values[i] + cfg.pressure_floor));
    });
    return out;
}

LatentGrid entropy_field(const LatentGrid& P, const LatentGrid& rho, const ThermoCfg& cfg) {
    check_single_channel(P, "entropy_field P");
    check_single_channel(rho, "entropy_field rho");
    require(P.nodes() == rho.nodes(), "entropy_field: grids not aligned");
    for (std::int64_t i = 0; i < P.nodes(); ++i)
        require(P.values[i] > 0 && rho.values[i] > 0, "entropy_field: inputs must be positive");
    LatentGrid out = P;
    parallel_for(P.nodes(), [&](std::int64_t i) {
        out.values[i] = std::log(P.values[i]) - cfg.gamma_gas * std::log(rho.values[i]);
    });
    return out;
}

double thermo_loss(const LatentGrid& S, const LatentGrid& P, const LatentGrid& m_shock,
                   const ThermoCfg& cfg, const AffineMap& map) {
    check_single_channel(S, "thermo_loss S");
    check_single_channel(P, "thermo_loss P");
    check_single_channel(m_shock, "thermo_loss mask");
    require(S.nodes() == P.nodes() && S.nodes() == m_shock.nodes(),
            "thermo_loss: grids not aligned");
    const LatentGrid gs = physical_gradient(S, 0, map);
    const LatentGrid gp = physical_gradient(P, 0, map);
    const std::int64_t n = S.nodes();
    std::vector<double> iso(n), second(n);
    parallel_for(n, [&](std::int64_t i) {
        const double* a = gs.values.data() + i * 3;
        const double* b = gp.values.data() + i * 3;
        const double smag = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        const double dotps = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        iso[i] = smag * (1.0 - m_shock.values[i]);
        second[i] = std::max(-dotps, 0.0) * m_shock.values[i];
    });
    double iso_sum = 0.0, second_sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        iso_sum += iso[i];
        second_sum += second[i];
    }
    return cfg.lambda_iso * iso_sum / double(n) + cfg.lambda_2nd * second_sum / double(n);
}

ResidualReport residual_report(const LatentGrid& residuals, const LatentGrid& mask,
                               const std::vector<std::string>& names) {
    require(int(names.size()) == residuals.channels, "residual_report: name count mismatch");
    check_single_channel(mask, "residual_report mask");
    ResidualReport rep;
    const std::int64_t n = residuals.nodes();
    for (int c = 0; c < residuals.channels; ++c) {
        ResidualReport::Row row;
        row.equation = names[c];
        for (std::int64_t i = 0; i < n; ++i) {
            const double r = std::abs(residuals.values[i * residuals.channels + c]);
            const double m = mask.values[i] * r;
            row.mean_unmasked += r;
            row.mean_masked += m;
            row.max_unmasked = std::max(row.max_unmasked, r);
            row.max_masked = std::max(row.max_masked, m);
        }
        row.mean_unmasked /= double(n);
        row.mean_masked /= double(n);
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace latflow
