#pragma once

#include <complex>
#include <vector>

#include "latflow/geometry.hpp"
#include "latflow/latent_grid.hpp"
#include "latflow/mlp.hpp"

namespace latflow {

using cplx = std::complex<double>;

/// Complex spectrum of a grid, same layout as LatentGrid values.
struct Spectrum {
    int dims[3] = {0, 0, 0};
    int channels = 0;
    std::vector<cplx> values;

    std::size_t index(int i, int j, int k, int c = 0) const {
        return ((std::size_t(i) * dims[1] + j) * dims[2] + k) * channels + c;
    }
};

/// Unnormalized forward 3D DFT per channel; the inverse carries the 1/(HWD)
/// factor so idft3(dft3(u)) == u to round-off.
Spectrum dft3(const LatentGrid& grid);
LatentGrid idft3(const Spectrum& spec, const LatentGrid& shape);

/// Retained frequency band per axis: mode k survives iff min(k, n-k) <= m.
/// m = floor(n/2) keeps everything.
struct TruncationSpec {
    int modes[3] = {0, 0, 0};

    static TruncationSpec full(const int dims[3]) {
        return {{dims[0] / 2, dims[1] / 2, dims[2] / 2}};
    }
    bool retained(int k, int axis, int n) const {
        return std::min(k, n - k) <= modes[axis];
    }
};

/// Complex mixing matrix (C x C) per retained mode.
struct SpectralMultiplier {
    int channels = 0;
    std::vector<cplx> weights;  // modes-major, then C x C row-major

    static SpectralMultiplier identity(int channels, int mode_count);
    static SpectralMultiplier zeros(int channels, int mode_count);
};

/// Flat list of retained mode triples for (dims, trunc); fixed enumeration
/// order ties multiplier storage to modes.
std::vector<std::array<int, 3>> retained_modes(const int dims[3], const TruncationSpec& t);

/// y = Re( idft3( R * truncate( dft3(u) ) ) ). Truncation zeroes every mode
/// outside the retained band before mixing.
LatentGrid spectral_conv(const LatentGrid& u, const SpectralMultiplier& mult,
                         const TruncationSpec& trunc);

/// Transpose of spectral_conv as a real-linear map: same path with the
/// per-mode Hermitian transpose of the multiplier.
LatentGrid spectral_conv_adjoint(const LatentGrid& g, const SpectralMultiplier& mult,
                                 const TruncationSpec& trunc);

/// Gradient of a loss w.r.t. the multiplier entries given dL/dy and the
/// input u (paired with spectral_conv's forward).
void spectral_conv_weight_grad(const LatentGrid& u, const LatentGrid& dy,
                               const TruncationSpec& trunc, SpectralMultiplier& grad);

/// Trilinear upsampling onto `fine_dims` (endpoints aligned); exact on
/// trilinear fields, identity when the dims match.
LatentGrid interp_coarse(const LatentGrid& coarse, const int fine_dims[3]);
/// Transpose scatter of interp_coarse.
LatentGrid interp_coarse_adjoint(const LatentGrid& fine_grad, const LatentGrid& coarse_shape);

/// Fine-scale residual compensation on top of the upsampled coarse field:
/// u_fine = interp(u_coarse) + mask .* (alpha_c * residual_net(window)).
/// The residual net reads a w^3 window of per-node geometric features on the
/// fine grid; alpha starts at zero so the operator begins as a no-op.
struct RefineOp {
    int window = 3;  // odd
    Mlp residual_net;
    std::vector<double> alpha;  // per output channel
    int geom_channels = 0;
    int out_channels = 0;

    static RefineOp init(int window, int geom_channels, int hidden, int out_channels,
                         Rng& rng);
    void collect(ParamRefs& refs);
};

/// `geom` holds the fine-grid geometric features (geom_channels wide),
/// `mask` a single-channel [0,1] grid on the fine dims.
LatentGrid refine_field(const LatentGrid& coarse, const LatentGrid& geom,
                        const LatentGrid& mask, const RefineOp& op);

/// Window-restricted squared residual sum of a linear operator applied to
/// the field (the refinement training objective alongside data error).
struct GridWindow {
    int lo[3] = {0, 0, 0};
    int hi[3] = {0, 0, 0};  // exclusive
};
double local_residual(const LatentGrid& residual_grid, const GridWindow& window);

/// Point-wise reconstruction through the encode/decode path:
/// encode (lift + message passing + projection) -> spectral decode ->
/// trilinear sample at the point coordinates. Used by the autoencoder
/// warm-up and kept here so the decoding contract stays in one place.
struct EncoderParams {
    Mlp lift;  // (9 + value channels) -> C
    std::vector<MessagePassingLayer> mp_layers;
    NWProjector projector;
    int channels = 0;

    void collect(ParamRefs& refs);
};

struct DecoderParams {
    SpectralMultiplier mult;
    TruncationSpec trunc;
    int value_channels = 0;  // decoded physical channels = first value_channels

    void collect(ParamRefs& refs);
};

struct ReconstructResult {
    LatentGrid latent;
    std::vector<double> predictions;  // N x value_channels
    double mse = 0.0;
    double reg = 0.0;   // lambda_reg * ||latent||^2
    double loss = 0.0;  // mse + reg
};

/// Full encode-decode pass over a point cloud with per-point target values.
ReconstructResult fae_reconstruct(const PointCloud& pc, const GeomEmbedding& emb,
                                  const KnnGraph& graph,
                                  const std::vector<double>& values, int value_channels,
                                  const EncoderParams& enc, const DecoderParams& dec,
                                  const LatentGrid& grid_shape, const AffineMap& map,
                                  double lambda_reg);

}  // namespace latflow
