#pragma once

#include <span>
#include <vector>

#include "latflow/core.hpp"

namespace latflow {

enum class Activation { Identity, Tanh, Relu, Sigmoid };

double apply_activation(Activation a, double x);

/// Flat list of (pointer, length) parameter blocks. Gathering and scattering
/// through the same registration order gives every trainable component a
/// stable position in the optimizer's flat state.
struct ParamRefs {
    std::vector<std::pair<double*, std::size_t>> blocks;

    void add(std::vector<double>& v) {
        if (!v.empty()) blocks.emplace_back(v.data(), v.size());
    }
    void add(double& s) { blocks.emplace_back(&s, 1); }
    std::size_t total() const {
        std::size_t n = 0;
        for (auto& b : blocks) n += b.second;
        return n;
    }
    std::vector<double> gather() const {
        std::vector<double> flat;
        flat.reserve(total());
        for (auto& b : blocks) flat.insert(flat.end(), b.first, b.first + b.second);
        return flat;
    }
    void scatter(std::span<const double> flat) {
        std::size_t at = 0;
        for (auto& b : blocks) {
            for (std::size_t i = 0; i < b.second; ++i) b.first[i] = flat[at + i];
            at += b.second;
        }
    }
};

/// Dense perceptron with explicit reverse-mode gradients. Weights are
/// row-major (out x in).
struct Mlp {
    struct Layer {
        int in = 0, out = 0;
        std::vector<double> w, b;
        Activation act = Activation::Identity;
    };
    std::vector<Layer> layers;

    int input_width() const { return layers.empty() ? 0 : layers.front().in; }
    int output_width() const { return layers.empty() ? 0 : layers.back().out; }

    /// widths = {in, h1, ..., out}; acts has one entry per weight layer.
    static Mlp init(const std::vector<int>& widths, const std::vector<Activation>& acts,
                    Rng& rng, double scale = 0.5);
    static Mlp zeros_like(const Mlp& m);
    void fill(double v);

    std::vector<double> forward(std::span<const double> x) const;

    /// Cached intermediate state for one forward evaluation.
    struct Tape {
        std::vector<std::vector<double>> inputs;  // input of each layer
        std::vector<std::vector<double>> pre;     // pre-activation of each layer
        std::vector<std::vector<double>> post;    // activated output of each layer
    };
    std::vector<double> forward(std::span<const double> x, Tape& tape) const;

    /// Accumulates parameter gradients into `grad` (same architecture) and
    /// returns dL/dx for the tape's input.
    std::vector<double> backward(std::span<const double> dy, const Tape& tape,
                                 Mlp& grad) const;

    void collect(ParamRefs& refs);
};

}  // namespace latflow
