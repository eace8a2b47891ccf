#pragma once

#include <string>

#include "cpbigan/diff/ops.hpp"
#include "cpbigan/diff/params.hpp"
#include "cpbigan/diff/tape.hpp"

namespace cpbigan::diff {

enum class Activation { none, relu, leaky_relu, silu, sigmoid, tanh };

template <class T>
Var activate(Tape<T>& t, Var x, Activation a) {
    switch (a) {
    case Activation::none: return x;
    case Activation::relu: return relu(t, x);
    case Activation::leaky_relu: return leaky_relu(t, x, 0.2);
    case Activation::silu: return silu(t, x);
    case Activation::sigmoid: return sigmoid(t, x);
    case Activation::tanh: return diff::tanh(t, x);
    }
    return x;
}

template <class T>
void add_dense(ParamSet<T>& ps, const std::string& name, int in, int out, std::uint64_t seed) {
    ps.add(name + ".w", fan_in_uniform<T>({out, in}, std::max(in, 1), seed, name + ".w"));
    ps.add(name + ".b", Tensor<T>({out}));
}

template <class T>
void add_conv(ParamSet<T>& ps, const std::string& name, int in_ch, int out_ch, int k, std::uint64_t seed) {
    ps.add(name + ".w", fan_in_uniform<T>({out_ch, in_ch, k, k}, in_ch * k * k, seed, name + ".w"));
    ps.add(name + ".b", Tensor<T>({out_ch}));
}

/// Transposed conv weights are [in, out, k, k]; fan-in counts the input
/// taps that reach one output pixel on average.
template <class T>
void add_conv_transpose(ParamSet<T>& ps, const std::string& name, int in_ch, int out_ch, int k, int stride,
                        std::uint64_t seed) {
    const int fan_in = std::max(1, in_ch * (k / stride) * (k / stride));
    ps.add(name + ".w", fan_in_uniform<T>({in_ch, out_ch, k, k}, fan_in, seed, name + ".w"));
    ps.add(name + ".b", Tensor<T>({out_ch}));
}

/// Gated recurrent cell: update gate z, reset gate r, candidate n over input
/// width `in` and hidden width `hidden`; h' = (1 - z) * n + z * h.
template <class T>
void add_gru(ParamSet<T>& ps, const std::string& name, int in, int hidden, std::uint64_t seed) {
    for (const char* gate : {".z", ".r", ".n"}) {
        add_dense(ps, name + gate + "x", in, hidden, seed);
        add_dense(ps, name + gate + "h", hidden, hidden, seed);
    }
}

/// A network's parameters bound onto one tape, either trainable or frozen.
template <class T>
struct Bound {
    Tape<T>& tape;
    ParamSet<T>& params;
    bool trainable = true;

    Var p(const std::string& name) { return tape.param(params, name, trainable); }

    Var dense(const std::string& name, Var x, Activation a = Activation::none) {
        return activate(tape, affine(tape, x, p(name + ".w"), p(name + ".b")), a);
    }
    Var conv(const std::string& name, Var x, int stride, int pad, Activation a = Activation::none) {
        return activate(tape, conv2d(tape, x, p(name + ".w"), p(name + ".b"), stride, pad), a);
    }
    Var gru(const std::string& name, Var x, Var h) {
        Var z = sigmoid(tape, add(tape, dense(name + ".zx", x), dense(name + ".zh", h)));
        Var r = sigmoid(tape, add(tape, dense(name + ".rx", x), dense(name + ".rh", h)));
        Var n = diff::tanh(tape, add(tape, dense(name + ".nx", x), mul(tape, r, dense(name + ".nh", h))));
        return add(tape, mul(tape, one_minus(tape, z), n), mul(tape, z, h));
    }
    Var deconv(const std::string& name, Var x, int stride, int pad, Activation a = Activation::none) {
        return activate(tape, conv_transpose2d(tape, x, p(name + ".w"), p(name + ".b"), stride, pad), a);
    }
};

/// Probability clamp used inside every log.
inline constexpr double kProbEps = 1e-7;

/// -[t log p + (1-t) log(1-p)] with the clamp.
inline double bce_loss(double p, int target) {
    const double q = std::clamp(p, kProbEps, 1.0 - kProbEps);
    return target ? -std::log(q) : -std::log(1.0 - q);
}

/// -log of the clamped probability assigned to the label.
inline double ce_loss(std::span<const double> probs, int label) {
    return -std::log(std::clamp(probs[static_cast<std::size_t>(label)], kProbEps, 1.0 - kProbEps));
}

inline double ce_loss_logits(std::span<const double> logits, int label) {
    double mx = -INFINITY;
    for (double v : logits) mx = std::max(mx, v);
    double z = 0;
    for (double v : logits) z += std::exp(v - mx);
    std::vector<double> p;
    for (double v : logits) p.push_back(std::exp(v - mx) / z);
    return ce_loss(p, label);
}

} // namespace cpbigan::diff
