#pragma once

#include <complex>
#include <vector>

#include "latflow/latent_grid.hpp"

namespace latflow {

/// Finite-difference stencil. Coefficients are stored for unit spacing; the
/// 1/h^order factor is applied at evaluation time. Every generated stencil
/// differentiates monomials exactly up to design_degree.
struct Stencil {
    std::vector<int> offsets;
    std::vector<double> coeffs;
    int order = 1;          // derivative order
    int design_degree = 0;  // highest monomial degree reproduced exactly

    double coeff_sum() const {
        double s = 0.0;
        for (double c : coeffs) s += c;
        return s;
    }
};

/// Fourth-order central first derivative:
/// offsets [-2,-1,0,1,2], coefficients [1,-8,0,8,-1]/12.
Stencil central4();

enum class Side { Left, Right };

/// Fourth-order one-sided five-point first derivative. Left uses offsets
/// [0..4] with coefficients [-25,48,-36,16,-3]/12; right is the mirror with
/// negated coefficients.
Stencil one_sided5(Side side);

/// Undetermined-coefficient construction: solves the Vandermonde moment
/// system sum_j c_j * o_j^m = m! * [m == order] over the given offsets.
/// Offsets must be distinct and number at least order+1.
Stencil derive_stencil(const std::vector<int>& offsets, int order);

/// Per-axis differentiation plan. Interior nodes (>= 2 from both ends) use
/// the central stencil; the two outermost layers per side switch to shifted
/// five-point stencils so the truncation order stays uniform without ghost
/// cells.
struct DiffPlan {
    int axis = 0;  // 0=x, 1=y, 2=z
    double spacing = 1.0;
};

/// One-dimensional derivative operator rows for an extent-n axis, including
/// the boundary switching policy. row[i] holds (node index, coefficient)
/// pairs; scaling by 1/h is applied when the operator is evaluated.
struct DiffOp1D {
    int n = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;
    std::vector<std::vector<std::pair<int, double>>> cols;  // transpose, for adjoints

    static const DiffOp1D& cached(int n);  // built once per extent
};

/// Channel-wise first derivative of the grid along plan.axis. Requires
/// extent >= 5 along that axis. Output has the same dims/channels.
LatentGrid apply_derivative(const LatentGrid& grid, const DiffPlan& plan);

/// Adjoint (transpose) of apply_derivative, used by manual reverse-mode
/// gradient assembly.
LatentGrid apply_derivative_adjoint(const LatentGrid& grid, const DiffPlan& plan);

/// Fourier symbol of the fourth-order central stencil:
/// i * (8 sin(wh) - sin(2wh)) / (6h).
std::complex<double> symbol_central4(double omega, double h);

struct SymbolBoundReport {
    double max_symbol = 0.0;   // max |symbol| over wh in [0, pi]
    double bound = 0.0;        // 3/(2h)
    double max_times_h = 0.0;  // resolution-independent form
    bool pass = false;
};

/// Dense scan (>= 10^4 samples) of |symbol| over wh in [0, pi] against the
/// strict 3/(2h) bound.
SymbolBoundReport symbol_bound_check(double h, int samples = 20001);

struct GrowthRow {
    double omega;
    double ad_growth;        // w^(2k), unbounded in w
    double discrete_growth;  // |symbol|^(2k), bounded by (3/(2h))^(2k)
};

/// Per-frequency eigenvalue growth comparison between the continuous
/// derivative symbol and the discrete one, both raised to the 2k power.
std::vector<GrowthRow> ntk_growth_compare(const std::vector<double>& omegas, int k, double h);

}  // namespace latflow
