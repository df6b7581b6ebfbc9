#include "latflow/mlp.hpp"

#include <cmath>

namespace latflow {

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0 ? x : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

namespace {

double activation_grad(Activation a, double pre, double post) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Tanh: return 1.0 - post * post;
        case Activation::Relu: return pre > 0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return post * (1.0 - post);
    }
    return 1.0;
}

}  // namespace

Mlp Mlp::init(const std::vector<int>& widths, const std::vector<Activation>& acts,
              Rng& rng, double scale) {
    require(widths.size() >= 2, "Mlp::init: need at least one layer");
    require(acts.size() == widths.size() - 1, "Mlp::init: one activation per layer");
    Mlp m;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer lay;
        lay.in = widths[l];
        lay.out = widths[l + 1];
        lay.act = acts[l];
        lay.w.resize(std::size_t(lay.in) * lay.out);
        lay.b.assign(lay.out, 0.0);
        const double s = scale / std::sqrt(double(lay.in));
        for (double& v : lay.w) v = s * rng.normal();
        m.layers.push_back(std::move(lay));
    }
    return m;
}

Mlp Mlp::zeros_like(const Mlp& m) {
    Mlp z = m;
    z.fill(0.0);
    return z;
}

void Mlp::fill(double v) {
    for (auto& l : layers) {
        std::fill(l.w.begin(), l.w.end(), v);
        std::fill(l.b.begin(), l.b.end(), v);
    }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
    std::vector<double> cur(x.begin(), x.end());
    for (const Layer& l : layers) {
        require(int(cur.size()) == l.in, "Mlp::forward: width mismatch");
        std::vector<double> next(l.out);
        for (int o = 0; o < l.out; ++o) {
            double acc = l.b[o];
            const double* row = l.w.data() + std::size_t(o) * l.in;
            for (int i = 0; i < l.in; ++i) acc += row[i] * cur[i];
            next[o] = apply_activation(l.act, acc);
        }
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> Mlp::forward(std::span<const double> x, Tape& tape) const {
    tape.inputs.assign(layers.size(), {});
    tape.pre.assign(layers.size(), {});
    tape.post.assign(layers.size(), {});
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer& l = layers[li];
        require(int(cur.size()) == l.in, "Mlp::forward: width mismatch");
        tape.inputs[li] = cur;
        std::vector<double> pre(l.out), post(l.out);
        for (int o = 0; o < l.out; ++o) {
            double acc = l.b[o];
            const double* row = l.w.data() + std::size_t(o) * l.in;
            for (int i = 0; i < l.in; ++i) acc += row[i] * cur[i];
            pre[o] = acc;
            post[o] = apply_activation(l.act, acc);
        }
        tape.pre[li] = std::move(pre);
        tape.post[li] = post;
        cur = std::move(post);
    }
    return cur;
}

std::vector<double> Mlp::backward(std::span<const double> dy, const Tape& tape,
                                  Mlp& grad) const {
    require(grad.layers.size() == layers.size(), "Mlp::backward: grad shape mismatch");
    std::vector<double> delta(dy.begin(), dy.end());
    for (int li = int(layers.size()) - 1; li >= 0; --li) {
        const Layer& l = layers[li];
        Layer& g = grad.layers[li];
        require(int(delta.size()) == l.out, "Mlp::backward: width mismatch");
        // Through the activation.
        for (int o = 0; o < l.out; ++o)
            delta[o] *= activation_grad(l.act, tape.pre[li][o], tape.post[li][o]);
        const std::vector<double>& x = tape.inputs[li];
        std::vector<double> dx(l.in, 0.0);
        for (int o = 0; o < l.out; ++o) {
            const double d = delta[o];
            g.b[o] += d;
            double* grow = g.w.data() + std::size_t(o) * l.in;
            const double* row = l.w.data() + std::size_t(o) * l.in;
            for (int i = 0; i < l.in; ++i) {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
        }
        delta = std::move(dx);
    }
    return delta;
}

void Mlp::collect(ParamRefs& refs) {
    for (auto& l : layers) {
        refs.add(l.w);
        refs.add(l.b);
    }
}

}  // namespace latflow
