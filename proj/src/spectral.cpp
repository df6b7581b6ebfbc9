#include "latflow/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace latflow {

namespace {

/// Twiddle table e^{-2*pi*i*k*n/N} (sign = -1) or the conjugate (sign = +1).
std::vector<cplx> twiddles(int n, int sign) {
    std::vector<cplx> t(std::size_t(n) * n);
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
            const double ang = sign * 2.0 * M_PI * double((std::int64_t(k) * m) % n) / n;
            t[std::size_t(k) * n + m] = {std::cos(ang), std::sin(ang)};
        }
    return t;
}

/// Separable 1D transforms along each axis (matrix form; grids stay small).
void transform_axis(std::vector<cplx>& data, const int dims[3], int channels, int axis,
                    int sign) {
    const int n = dims[axis];
    const std::vector<cplx> tw = twiddles(n, sign);
    const std::int64_t stride =
        axis == 0 ? std::int64_t(dims[1]) * dims[2] * channels
                  : (axis == 1 ? std::int64_t(dims[2]) * channels : channels);
    int od[2], oi = 0;
    for (int a = 0; a < 3; ++a)
        if (a != axis) od[oi++] = a;
    const std::int64_t lines = std::int64_t(dims[od[0]]) * dims[od[1]] * channels;

    parallel_for(lines, [&](std::int64_t line) {
        const int c = int(line % channels);
        const std::int64_t jk = line / channels;
        const int b = int(jk % dims[od[1]]);
        const int a = int(jk / dims[od[1]]);
        int idx3[3];
        idx3[od[0]] = a;
        idx3[od[1]] = b;
        idx3[axis] = 0;
        const std::size_t base =
            ((std::size_t(idx3[0]) * dims[1] + idx3[1]) * dims[2] + idx3[2]) * channels + c;
        std::vector<cplx> linebuf(n);
        for (int i = 0; i < n; ++i) linebuf[i] = data[base + std::size_t(i) * stride];
        for (int k = 0; k < n; ++k) {
            cplx acc = 0.0;
            const cplx* row = tw.data() + std::size_t(k) * n;
            for (int m = 0; m < n; ++m) acc += row[m] * linebuf[m];
            data[base + std::size_t(k) * stride] = acc;
        }
    });
}

}  // namespace

Spectrum dft3(const LatentGrid& grid) {
    require(grid.dims[0] >= 2 && grid.dims[1] >= 2 && grid.dims[2] >= 2,
            "dft3: dims must be >= 2 per axis");
    Spectrum s;
    for (int a = 0; a < 3; ++a) s.dims[a] = grid.dims[a];
    s.channels = grid.channels;
    s.values.assign(grid.values.size(), cplx{});
    for (std::size_t i = 0; i < grid.values.size(); ++i) s.values[i] = grid.values[i];
    for (int axis = 0; axis < 3; ++axis)
        transform_axis(s.values, s.dims, s.channels, axis, -1);
    return s;
}

LatentGrid idft3(const Spectrum& spec, const LatentGrid& shape) {
    require(shape.dims[0] == spec.dims[0] && shape.dims[1] == spec.dims[1] &&
                shape.dims[2] == spec.dims[2] && shape.channels == spec.channels,
            "idft3: shape mismatch");
    std::vector<cplx> buf = spec.values;
    for (int axis = 0; axis < 3; ++axis)
        transform_axis(buf, spec.dims, spec.channels, axis, +1);
    const double inv = 1.0 / (double(spec.dims[0]) * spec.dims[1] * spec.dims[2]);
    LatentGrid out = shape;
    for (std::size_t i = 0; i < buf.size(); ++i) out.values[i] = buf[i].real() * inv;
    return out;
}

std::vector<std::array<int, 3>> retained_modes(const int dims[3], const TruncationSpec& t) {
    std::vector<std::array<int, 3>> modes;
    for (int i = 0; i < dims[0]; ++i) {
        if (!t.retained(i, 0, dims[0])) continue;
        for (int j = 0; j < dims[1]; ++j) {
            if (!t.retained(j, 1, dims[1])) continue;
            for (int k = 0; k < dims[2]; ++k) {
                if (!t.retained(k, 2, dims[2])) continue;
                modes.push_back({i, j, k});
            }
        }
    }
    return modes;
}

SpectralMultiplier SpectralMultiplier::identity(int channels, int mode_count) {
    SpectralMultiplier m;
    m.channels = channels;
    m.weights.assign(std::size_t(mode_count) * channels * channels, cplx{});
    for (int q = 0; q < mode_count; ++q)
        for (int c = 0; c < channels; ++c)
            m.weights[(std::size_t(q) * channels + c) * channels + c] = 1.0;
    return m;
}

SpectralMultiplier SpectralMultiplier::zeros(int channels, int mode_count) {
    SpectralMultiplier m;
    m.channels = channels;
    m.weights.assign(std::size_t(mode_count) * channels * channels, cplx{});
    return m;
}

namespace {

LatentGrid spectral_apply(const LatentGrid& u, const SpectralMultiplier& mult,
                          const TruncationSpec& trunc, bool hermitian) {
    require(u.channels == mult.channels, "spectral_conv: channel mismatch");
    Spectrum s = dft3(u);
    const auto modes = retained_modes(u.dims, trunc);
    require(modes.size() * std::size_t(mult.channels) * mult.channels ==
                mult.weights.size(),
            "spectral_conv: multiplier sized for a different truncation");
    Spectrum mixed = s;
    std::fill(mixed.values.begin(), mixed.values.end(), cplx{});
    const int c = mult.channels;
    parallel_for(std::int64_t(modes.size()), [&](std::int64_t q) {
        const auto [i, j, k] = modes[q];
        const cplx* w = mult.weights.data() + std::size_t(q) * c * c;
        const cplx* in = s.values.data() + s.index(i, j, k, 0);
        cplx* out = mixed.values.data() + s.index(i, j, k, 0);
        for (int oc = 0; oc < c; ++oc) {
            cplx acc = 0.0;
            for (int ic = 0; ic < c; ++ic) {
                const cplx wv = hermitian ? std::conj(w[std::size_t(ic) * c + oc])
                                          : w[std::size_t(oc) * c + ic];
                acc += wv * in[ic];
            }
            out[oc] = acc;
        }
    });
    return idft3(mixed, u);
}

}  // namespace

LatentGrid spectral_conv(const LatentGrid& u, const SpectralMultiplier& mult,
                         const TruncationSpec& trunc) {
    return spectral_apply(u, mult, trunc, false);
}

LatentGrid spectral_conv_adjoint(const LatentGrid& g, const SpectralMultiplier& mult,
                                 const TruncationSpec& trunc) {
    return spectral_apply(g, mult, trunc, true);
}

void spectral_conv_weight_grad(const LatentGrid& u, const LatentGrid& dy,
                               const TruncationSpec& trunc, SpectralMultiplier& grad) {
    // y = Re(idft(W . dft(u))): for retained mode q,
    // dL/dW_q[oc][ic] = (1/N) * conj(dft(dy)[q][oc]) ... derived below as
    // (1/N) * G_q[oc] * conj(U_q[ic]) with G = dft(dy).
    require(u.same_shape(dy), "spectral_conv_weight_grad: shape mismatch");
    Spectrum su = dft3(u);
    Spectrum sg = dft3(dy);
    const auto modes = retained_modes(u.dims, trunc);
    const int c = grad.channels;
    require(modes.size() * std::size_t(c) * c == grad.weights.size(),
            "spectral_conv_weight_grad: grad sized for a different truncation");
    const double inv = 1.0 / (double(u.dims[0]) * u.dims[1] * u.dims[2]);
    parallel_for(std::int64_t(modes.size()), [&](std::int64_t q) {
        const auto [i, j, k] = modes[q];
        const cplx* uq = su.values.data() + su.index(i, j, k, 0);
        const cplx* gq = sg.values.data() + sg.index(i, j, k, 0);
        cplx* w = grad.weights.data() + std::size_t(q) * c * c;
        for (int oc = 0; oc < c; ++oc)
            for (int ic = 0; ic < c; ++ic)
                w[std::size_t(oc) * c + ic] += inv * gq[oc] * std::conj(uq[ic]);
    });
}

LatentGrid interp_coarse(const LatentGrid& coarse, const int fine_dims[3]) {
    for (int a = 0; a < 3; ++a)
        require(fine_dims[a] >= coarse.dims[a], "interp_coarse: fine dims must cover coarse");
    LatentGrid fine(fine_dims[0], fine_dims[1], fine_dims[2], coarse.channels);
    fine.origin = coarse.origin;
    for (int a = 0; a < 3; ++a) {
        const double span = coarse.spacing[a] * std::max(coarse.dims[a] - 1, 1);
        fine.spacing[a] = fine_dims[a] > 1 ? span / (fine_dims[a] - 1) : coarse.spacing[a];
    }
    const int C = coarse.channels;
    parallel_for(fine.nodes(), [&](std::int64_t node) {
        const int k = int(node % fine.dims[2]);
        const int j = int((node / fine.dims[2]) % fine.dims[1]);
        const int i = int(node / (std::int64_t(fine.dims[1]) * fine.dims[2]));
        Vec3 xi;
        for (int a = 0; a < 3; ++a) {
            const int idx = a == 0 ? i : (a == 1 ? j : k);
            const double t = fine.dims[a] > 1
                                 ? double(idx) * (coarse.dims[a] - 1) / (fine.dims[a] - 1)
                                 : 0.0;
            xi[a] = coarse.origin[a] + t * coarse.spacing[a];
        }
        const std::vector<double> v = sample_trilinear(coarse, xi);
        std::copy(v.begin(), v.end(), fine.values.begin() + node * C);
    });
    return fine;
}

LatentGrid interp_coarse_adjoint(const LatentGrid& fine_grad, const LatentGrid& coarse_shape) {
    LatentGrid out = coarse_shape;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    const int C = coarse_shape.channels;
    // Serial scatter keeps the accumulation order fixed.
    for (std::int64_t node = 0; node < fine_grad.nodes(); ++node) {
        const int k = int(node % fine_grad.dims[2]);
        const int j = int((node / fine_grad.dims[2]) % fine_grad.dims[1]);
        const int i = int(node / (std::int64_t(fine_grad.dims[1]) * fine_grad.dims[2]));
        Vec3 xi;
        for (int a = 0; a < 3; ++a) {
            const int idx = a == 0 ? i : (a == 1 ? j : k);
            const double t =
                fine_grad.dims[a] > 1
                    ? double(idx) * (coarse_shape.dims[a] - 1) / (fine_grad.dims[a] - 1)
                    : 0.0;
            xi[a] = coarse_shape.origin[a] + t * coarse_shape.spacing[a];
        }
        const TrilinearStencil st = trilinear_stencil(coarse_shape, xi);
        const double* g = fine_grad.values.data() + node * C;
        for (int q = 0; q < 8; ++q) {
            if (st.weight[q] == 0.0) continue;
            double* dst = out.values.data() + st.node[q];
            for (int c = 0; c < C; ++c) dst[c] += st.weight[q] * g[c];
        }
    }
    return out;
}

RefineOp RefineOp::init(int window, int geom_channels, int hidden, int out_channels,
                        Rng& rng) {
    require(window >= 1 && window % 2 == 1, "RefineOp: window must be odd");
    RefineOp op;
    op.window = window;
    op.geom_channels = geom_channels;
    op.out_channels = out_channels;
    const int in = geom_channels * window * window * window;
    op.residual_net = Mlp::init({in, hidden, out_channels},
                                {Activation::Tanh, Activation::Identity}, rng, 0.5);
    op.alpha.assign(out_channels, 0.0);  // starts as a no-op
    return op;
}

void RefineOp::collect(ParamRefs& refs) {
    residual_net.collect(refs);
    refs.add(alpha);
}

namespace {

std::vector<double> gather_window(const LatentGrid& geom, int i, int j, int k, int w) {
    const int half = w / 2;
    std::vector<double> in;
    in.reserve(std::size_t(geom.channels) * w * w * w);
    for (int di = -half; di <= half; ++di)
        for (int dj = -half; dj <= half; ++dj)
            for (int dk = -half; dk <= half; ++dk) {
                const int ii = std::clamp(i + di, 0, geom.dims[0] - 1);
                const int jj = std::clamp(j + dj, 0, geom.dims[1] - 1);
                const int kk = std::clamp(k + dk, 0, geom.dims[2] - 1);
                const double* v = geom.values.data() + geom.index(ii, jj, kk, 0);
                in.insert(in.end(), v, v + geom.channels);
            }
    return in;
}

}  // namespace

LatentGrid refine_field(const LatentGrid& coarse, const LatentGrid& geom,
                        const LatentGrid& mask, const RefineOp& op) {
    require(geom.channels == op.geom_channels, "refine_field: geometry channel mismatch");
    require(mask.channels == 1, "refine_field: mask must be single channel");
    require(mask.dims[0] == geom.dims[0] && mask.dims[1] == geom.dims[1] &&
                mask.dims[2] == geom.dims[2],
            "refine_field: mask/geometry dims mismatch");
    require(coarse.channels == op.out_channels, "refine_field: output channel mismatch");
    LatentGrid fine = interp_coarse(coarse, geom.dims);
    const int C = op.out_channels;
    parallel_for(fine.nodes(), [&](std::int64_t node) {
        const int k = int(node % fine.dims[2]);
        const int j = int((node / fine.dims[2]) % fine.dims[1]);
        const int i = int(node / (std::int64_t(fine.dims[1]) * fine.dims[2]));
        const double m = mask.values[node];
        if (m == 0.0) return;
        const std::vector<double> in = gather_window(geom, i, j, k, op.window);
        const std::vector<double> r = op.residual_net.forward(in);
        double* dst = fine.values.data() + node * C;
        for (int c = 0; c < C; ++c) dst[c] += m * op.alpha[c] * r[c];
    });
    return fine;
}

double local_residual(const LatentGrid& residual_grid, const GridWindow& window) {
    for (int a = 0; a < 3; ++a)
        require(window.lo[a] >= 0 && window.hi[a] <= residual_grid.dims[a] &&
                    window.lo[a] < window.hi[a],
                "local_residual: window outside grid");
    double acc = 0.0;
    for (int i = window.lo[0]; i < window.hi[0]; ++i)
        for (int j = window.lo[1]; j < window.hi[1]; ++j)
            for (int k = window.lo[2]; k < window.hi[2]; ++k)
                for (int c = 0; c < residual_grid.channels; ++c) {
                    const double v = residual_grid.at(i, j, k, c);
                    acc += v * v;
                }
    return acc;
}

void EncoderParams::collect(ParamRefs& refs) {
    lift.collect(refs);
    for (auto& l : mp_layers) {
        refs.add(l.self_weight);
        l.kernel.collect(refs);
    }
    projector.kernel.collect(refs);
    refs.add(projector.ln_gain);
    refs.add(projector.ln_bias);
}

void DecoderParams::collect(ParamRefs& refs) {
    // Complex weights are exposed to the optimizer as interleaved re/im.
    auto* base = reinterpret_cast<double*>(mult.weights.data());
    if (!mult.weights.empty()) refs.blocks.emplace_back(base, mult.weights.size() * 2);
}

ReconstructResult fae_reconstruct(const PointCloud& pc, const GeomEmbedding& emb,
                                  const KnnGraph& graph,
                                  const std::vector<double>& values, int value_channels,
                                  const EncoderParams& enc, const DecoderParams& dec,
                                  const LatentGrid& grid_shape, const AffineMap& map,
                                  double lambda_reg) {
    const int n = int(pc.size());
    require(int(values.size()) == n * value_channels, "fae_reconstruct: value size mismatch");
    require(enc.lift.input_width() == kEmbedWidth + value_channels,
            "fae_reconstruct: lift width mismatch");
    const int C = enc.channels;

    // Lift [embedding, values] -> C channels per point.
    std::vector<double> h(std::size_t(n) * C);
    parallel_for(n, [&](std::int64_t i) {
        std::vector<double> in(kEmbedWidth + value_channels);
        const auto row = emb.row(i);
        std::copy(row.begin(), row.end(), in.begin());
        for (int v = 0; v < value_channels; ++v)
            in[kEmbedWidth + v] = values[i * value_channels + v];
        const std::vector<double> out = enc.lift.forward(in);
        std::copy(out.begin(), out.end(), h.begin() + i * C);
    });
    for (const auto& layer : enc.mp_layers) h = message_pass(graph, pc, h, layer);

    // Project onto the latent grid in latent coordinates.
    std::vector<Vec3> latent_pts(n);
    for (int i = 0; i < n; ++i) latent_pts[i] = to_latent(pc.positions[i], map);
    ReconstructResult res;
    res.latent = nw_project(enc.projector, latent_pts, h, grid_shape);

    // Decode and sample back at the points.
    const LatentGrid decoded = spectral_conv(res.latent, dec.mult, dec.trunc);
    res.predictions.assign(std::size_t(n) * value_channels, 0.0);
    std::vector<double> errs(n, 0.0);
    parallel_for(n, [&](std::int64_t i) {
        const std::vector<double> s = sample_trilinear(decoded, latent_pts[i]);
        double e = 0.0;
        for (int v = 0; v < value_channels; ++v) {
            res.predictions[i * value_channels + v] = s[v];
            const double d = s[v] - values[i * value_channels + v];
            e += d * d;
        }
        errs[i] = e;
    });
    for (double e : errs) res.mse += e;
    res.mse /= double(n);
    double reg = 0.0;
    for (double v : res.latent.values) reg += v * v;
    res.reg = lambda_reg * reg;
    res.loss = res.mse + res.reg;
    return res;
}

}  // namespace latflow
