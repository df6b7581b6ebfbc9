#pragma once

#include <string>
#include <vector>

#include "latflow/latent_grid.hpp"
#include "latflow/stencil.hpp"

namespace latflow {

/// Diffuse interface mask M = sigmoid(alpha * sdf + beta); strictly
/// increasing in the signed distance, so fluid nodes approach 1 and interior
/// nodes approach 0.
struct PhaseMaskCfg {
    double alpha = 10.0;  // 1/length
    double beta = 0.0;
};
LatentGrid phase_mask(const LatentGrid& sdf, const PhaseMaskCfg& cfg);

/// Pressure-gradient shock indicator M = 1 - exp(-gamma ||grad P|| / (P + eps)).
struct ShockMaskCfg {
    double gamma = 1.0;
    double pressure_floor = 1e-6;
};

struct ThermoCfg {
    double lambda_iso = 1.0;
    double lambda_2nd = 1.0;
    double gas_constant = 1.0;
    double gamma_gas = 1.4;
};

/// Subtract the wall-normal component: V_hard = V - <V,n> n. Normals must be
/// unit within 1e-6 wherever `apply` (optional single-channel gate in {0,1})
/// is nonzero.
void tangent_project(LatentGrid& velocity3, const LatentGrid& normals3,
                     const LatentGrid* apply = nullptr);

/// Anisotropic total-variation functional: mean over nodes and channels of
/// sum_axis |d_axis u| / (R_axis + eps), derivatives from the stencil engine.
double tv_loss(const LatentGrid& grid, const AffineMap& map);
/// Reverse-mode companion: accumulates dL/dgrid for loss_scale * tv_loss.
void tv_loss_backward(const LatentGrid& grid, const AffineMap& map, double loss_scale,
                      LatentGrid& grad);

/// Physical-space gradient of one channel: latent stencil derivative pulled
/// back through the diagonal inverse Jacobian. Output has 3 channels.
LatentGrid physical_gradient(const LatentGrid& grid, int channel, const AffineMap& map);

struct NsCfg {
    double rho = 1.0;  // constant density when no density channel is present
};

/// Steady inviscid residuals on a grid whose channels are (u, v, w, P):
/// channel 0 of the result is continuity div V, channels 1..3 the momentum
/// components V . grad V + (1/rho) grad P.
LatentGrid ns_residual(const LatentGrid& fields, const AffineMap& map, const NsCfg& cfg);

/// Reverse-mode companion: given dL/dresidual, accumulates dL/dfields.
void ns_residual_backward(const LatentGrid& fields, const AffineMap& map, const NsCfg& cfg,
                          const LatentGrid& grad_residual, LatentGrid& grad_fields);

/// mean over nodes of M * ||residual||_p^p * |det J_f|.
double assemble_phys_loss(const LatentGrid& residuals, const LatentGrid& mask,
                          const AffineMap& map, double p = 2.0);
/// dL/dresiduals of loss_scale * assemble_phys_loss (p = 2 path).
void assemble_phys_loss_backward(const LatentGrid& residuals, const LatentGrid& mask,
                                 const AffineMap& map, double loss_scale,
                                 LatentGrid& grad_residuals);

/// mean |P - rho R T| over nodes; all three inputs single-channel grids.
double eos_loss(const LatentGrid& P, const LatentGrid& rho, const LatentGrid& T,
                double gas_constant);

LatentGrid shock_mask(const LatentGrid& P, const AffineMap& map, const ShockMaskCfg& cfg);

/// Ideal-gas log entropy S = ln(P / rho^gamma); requires positive inputs.
LatentGrid entropy_field(const LatentGrid& P, const LatentGrid& rho, const ThermoCfg& cfg);

/// lambda_iso * mean(||grad S|| (1 - M_shock))
///   + lambda_2nd * mean(relu(-grad P . grad S) M_shock).
double thermo_loss(const LatentGrid& S, const LatentGrid& P, const LatentGrid& m_shock,
                   const ThermoCfg& cfg, const AffineMap& map);

struct ResidualReport {
    struct Row {
        std::string equation;
        double mean_unmasked = 0.0;
        double max_unmasked = 0.0;
        double mean_masked = 0.0;
        double max_masked = 0.0;
    };
    std::vector<Row> rows;
};
ResidualReport residual_report(const LatentGrid& residuals, const LatentGrid& mask,
                               const std::vector<std::string>& names);

}  // namespace latflow
